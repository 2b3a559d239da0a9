#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "phasecast/seq/config.hpp"
#include "phasecast/seq/discriminator.hpp"
#include "phasecast/seq/generator.hpp"

namespace phasecast::seq {

// Text checkpoint, version 1:
//
//   phasecast-checkpoint 1
//   config n_phases <int> hidden <int> feature_dim <int> noise_dim <int>
//          t_past <int> t_future <int> gumbel_tau <real>      (one line)
//   tensor <name> <rows> <cols>
//   <row 0 values, space separated, shortest round-trip form>
//   ...
//   end
//
// Tensors appear in GeneratorParams/DiscriminatorParams::visit order; either
// group may be absent. Loading checks every name and shape against the
// config block and rejects unknown or duplicate tensors.
struct Checkpoint {
  ModelConfig config;
  std::optional<GeneratorParams> generator;
  std::optional<DiscriminatorParams> discriminator;
};

inline constexpr int kCheckpointVersion = 1;

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace phasecast::seq
