#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "phasecast/diff/tape.hpp"
#include "phasecast/random.hpp"
#include "phasecast/seq/config.hpp"
#include "phasecast/seq/lstm.hpp"

namespace phasecast::seq {

// Two label encoders: the past encoder reads the observed labels, the future
// encoder starts from its final state and reads the (real or generated)
// future. A sigmoid head on the last future state scores "real".
struct DiscriminatorParams {
  LstmWeights past;      // n_phases -> hidden
  LstmWeights future;    // n_phases -> hidden
  diff::Tensor head_W;   // hidden x 1
  diff::Tensor head_b;   // 1 x 1

  static DiscriminatorParams init(const ModelConfig& cfg, Rng& rng);
  static DiscriminatorParams zeros(const ModelConfig& cfg);
  void validate(const ModelConfig& cfg) const;

  template <typename F>
  void visit(F&& f) { visit_impl(*this, f); }
  template <typename F>
  void visit(F&& f) const { visit_impl(*this, f); }

  std::vector<diff::Tensor*> tensors();

  friend bool operator==(const DiscriminatorParams&, const DiscriminatorParams&) = default;

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, F& f) {
    f(std::string_view("discriminator.past.W"), self.past.W);
    f(std::string_view("discriminator.past.b"), self.past.b);
    f(std::string_view("discriminator.future.W"), self.future.W);
    f(std::string_view("discriminator.future.b"), self.future.b);
    f(std::string_view("discriminator.head.W"), self.head_W);
    f(std::string_view("discriminator.head.b"), self.head_b);
  }
};

struct DiscriminatorVars {
  LstmVars past;
  LstmVars future;
  diff::Var head_W, head_b;

  std::vector<diff::Var> list() const;
};

DiscriminatorVars bind(diff::Tape& tape, const DiscriminatorParams& params, bool trainable);

// past: t_past entries, future: t_future entries, each B x n_phases (the
// future may be relaxed one-hots). Returns the B x 1 pre-sigmoid score.
diff::Var discriminator_logit(const DiscriminatorVars& d, std::span<const diff::Var> past,
                              std::span<const diff::Var> future);

// B x 1 probabilities of "real", each in (0, 1).
diff::Var discriminate(const DiscriminatorVars& d, std::span<const diff::Var> past,
                       std::span<const diff::Var> future);

// Single window: past is t_past x n_phases, future is t_future x n_phases.
double discriminate(const DiscriminatorParams& params, const ModelConfig& cfg, const diff::Tensor& past,
                    const diff::Tensor& future);

}  // namespace phasecast::seq
