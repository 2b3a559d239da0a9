#include "phasecast/baselines/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "phasecast/error.hpp"
#include "phasecast/random.hpp"
#include "phasecast/text_format.hpp"

namespace phasecast::baselines {

using diff::Tensor;

namespace {

constexpr double kStochasticTolerance = 1e-9;

void check_stochastic_rows(const Tensor& m, const char* name) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (!(m(i, j) >= 0.0)) throw ValidationError(std::string(name) + " has a negative or NaN entry");
      s += m(i, j);
    }
    if (std::abs(s - 1.0) > kStochasticTolerance) {
      throw ValidationError(std::string(name) + " row " + std::to_string(i) + " sums to " + format_double(s));
    }
  }
}

// Emission weights e_t(i), T x N.
Tensor emissions(const Tensor& lik, const HmmParams& p) {
  const std::size_t n = p.n_states();
  if (lik.cols() != n) {
    throw ShapeError("hmm: likelihood rows have " + std::to_string(lik.cols()) + " entries, model has " +
                     std::to_string(n) + " states");
  }
  for (std::size_t t = 0; t < lik.rows(); ++t) {
    bool any = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (!(lik(t, k) >= 0.0) || !std::isfinite(lik(t, k))) throw ValidationError("hmm: likelihoods must be finite and >= 0");
      any = any || lik(t, k) > 0.0;
    }
    if (!any) throw ValidationError("hmm: likelihood row " + std::to_string(t) + " is all zero");
  }
  if (!p.confusion) return lik;
  Tensor e = Tensor::zeros(lik.rows(), n);
  for (std::size_t t = 0; t < lik.rows(); ++t)
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += (*p.confusion)(i, k) * lik(t, k);
      e(t, i) = s;
    }
  return e;
}

struct Pass {
  Tensor alpha;  // scaled forward variables (filtered posteriors)
  std::vector<double> scale;
  double log_likelihood = 0.0;
};

Pass forward_pass(const Tensor& e, const HmmParams& p) {
  const std::size_t n = p.n_states(), T = e.rows();
  Pass out{Tensor::zeros(T, n), std::vector<double>(T, 0.0), 0.0};
  for (std::size_t t = 0; t < T; ++t) {
    double c = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double prior = 0.0;
      if (t == 0) {
        prior = p.initial[j];
      } else {
        for (std::size_t i = 0; i < n; ++i) prior += out.alpha(t - 1, i) * p.transition(i, j);
      }
      out.alpha(t, j) = prior * e(t, j);
      c += out.alpha(t, j);
    }
    if (!(c > 0.0)) throw ValidationError("hmm: frame " + std::to_string(t) + " has zero probability under the model");
    for (std::size_t j = 0; j < n; ++j) out.alpha(t, j) /= c;
    out.scale[t] = c;
    out.log_likelihood += std::log(c);
  }
  return out;
}

Tensor backward_pass(const Tensor& e, const HmmParams& p, const std::vector<double>& scale) {
  const std::size_t n = p.n_states(), T = e.rows();
  Tensor beta = Tensor::filled(T, n, 1.0);
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += p.transition(i, j) * e(t + 1, j) * beta(t + 1, j);
      beta(t, i) = s / scale[t + 1];
    }
  }
  return beta;
}

HmmParams count_init(std::span<const Tensor> seqs, std::size_t n, double smoothing) {
  HmmParams p;
  p.initial = Tensor::filled(1, n, 1.0 / static_cast<double>(n));
  p.transition = Tensor::filled(n, n, smoothing);
  for (const Tensor& s : seqs) {
    const std::vector<int> a = s.argmax_rows();
    for (std::size_t t = 1; t < a.size(); ++t) p.transition(static_cast<std::size_t>(a[t - 1]), static_cast<std::size_t>(a[t])) += 1.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += p.transition(i, j);
    for (std::size_t j = 0; j < n; ++j) p.transition(i, j) /= row;
  }
  return p;
}

HmmParams random_init(std::size_t n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x4d4d));
  std::uniform_real_distribution<double> u(0.05, 1.0);
  HmmParams p;
  p.initial = Tensor::filled(1, n, 1.0 / static_cast<double>(n));
  p.transition = Tensor::zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += p.transition(i, j) = u(rng);
    for (std::size_t j = 0; j < n; ++j) p.transition(i, j) /= row;
  }
  return p;
}

void normalise_rows(Tensor& m, const Tensor& fallback) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j);
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = s > 0.0 ? m(i, j) / s : fallback(i, j);
  }
}

}  // namespace

void HmmParams::validate() const {
  const std::size_t n = transition.rows();
  if (n < 1 || transition.cols() != n) throw ShapeError("hmm: transition matrix must be square");
  if (initial.size() != n) throw ShapeError("hmm: initial distribution has wrong length");
  check_stochastic_rows(Tensor(diff::Shape{1, n}, std::vector<double>(initial.values().begin(), initial.values().end())),
                        "hmm initial distribution");
  check_stochastic_rows(transition, "hmm transition matrix");
  if (confusion) {
    if (confusion->rows() != n || confusion->cols() != n) throw ShapeError("hmm: confusion matrix must be N x N");
    check_stochastic_rows(*confusion, "hmm confusion matrix");
  }
}

ForwardResult hmm_forward(const Tensor& likelihoods, const HmmParams& params) {
  params.validate();
  if (likelihoods.rows() == 0) throw ValidationError("hmm_forward: empty observation sequence");
  Pass pass = forward_pass(emissions(likelihoods, params), params);
  return ForwardResult{std::move(pass.alpha), pass.log_likelihood};
}

BaumWelchResult hmm_baum_welch(std::span<const Tensor> sequences, std::size_t n_states,
                               const BaumWelchOptions& options) {
  if (sequences.empty()) throw ValidationError("baum_welch: no sequences");
  if (options.iterations < 1) throw ValidationError("baum_welch: iterations must be >= 1");
  if (n_states < 1) throw ValidationError("baum_welch: n_states must be >= 1");
  if (std::none_of(sequences.begin(), sequences.end(), [](const Tensor& s) { return s.rows() >= 2; })) {
    throw ValidationError("baum_welch: every sequence is shorter than 2 frames");
  }
  for (const Tensor& s : sequences)
    if (s.cols() != n_states) throw ShapeError("baum_welch: sequence width differs from n_states");

  HmmParams p = options.initial     ? *options.initial
                : options.random_init ? random_init(n_states, options.seed)
                                      : count_init(sequences, n_states, options.smoothing);
  if (options.learn_confusion && !p.confusion) {
    // Mostly diagonal start so states keep their meaning.
    p.confusion = Tensor::filled(n_states, n_states, n_states > 1 ? 0.1 / static_cast<double>(n_states - 1) : 0.0);
    for (std::size_t i = 0; i < n_states; ++i) (*p.confusion)(i, i) = n_states > 1 ? 0.9 : 1.0;
  }
  p.validate();

  BaumWelchResult res;
  const std::size_t n = n_states;
  for (std::size_t iter = 0; iter <= options.iterations; ++iter) {
    Tensor init_acc = Tensor::zeros(1, n);
    Tensor trans_acc = Tensor::zeros(n, n);
    Tensor conf_acc = Tensor::zeros(n, n);
    double total_ll = 0.0;

    for (const Tensor& lik : sequences) {
      if (lik.rows() == 0) continue;
      const Tensor e = emissions(lik, p);
      const Pass fw = forward_pass(e, p);
      total_ll += fw.log_likelihood;
      if (iter == options.iterations) continue;
      const Tensor beta = backward_pass(e, p, fw.scale);
      const std::size_t T = lik.rows();
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
          const double gamma = fw.alpha(t, i) * beta(t, i);
          if (t == 0) init_acc[i] += gamma;
          if (p.confusion && gamma > 0.0 && e(t, i) > 0.0) {
            for (std::size_t k = 0; k < n; ++k) conf_acc(i, k) += gamma * (*p.confusion)(i, k) * lik(t, k) / e(t, i);
          }
        }
        if (t + 1 == T) break;
        for (std::size_t i = 0; i < n; ++i) {
          if (fw.alpha(t, i) == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) {
            trans_acc(i, j) += fw.alpha(t, i) * p.transition(i, j) * e(t + 1, j) * beta(t + 1, j) / fw.scale[t + 1];
          }
        }
      }
    }
    res.log_likelihoods.push_back(total_ll);
    if (iter == options.iterations) break;

    HmmParams next = p;
    normalise_rows(init_acc, p.initial);
    next.initial = init_acc;
    normalise_rows(trans_acc, p.transition);
    next.transition = trans_acc;
    if (p.confusion) {
      normalise_rows(conf_acc, *p.confusion);
      next.confusion = conf_acc;
    }
    p = std::move(next);
  }
  res.params = std::move(p);
  return res;
}

std::vector<int> hmm_predict(std::span<const double> posterior, const Tensor& transition, std::size_t t_future) {
  const std::size_t n = transition.rows();
  if (posterior.size() != n || transition.cols() != n) throw ShapeError("hmm_predict: posterior / transition mismatch");
  std::vector<double> belief(posterior.begin(), posterior.end()), next(n);
  std::vector<int> out;
  out.reserve(t_future);
  for (std::size_t step = 0; step < t_future; ++step) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += belief[i] * transition(i, j);
      next[j] = s;
    }
    belief.swap(next);
    out.push_back(static_cast<int>(std::max_element(belief.begin(), belief.end()) - belief.begin()));
  }
  return out;
}

std::vector<int> hmm_forecast(const Tensor& past_logits, const HmmParams& params, std::size_t t_future) {
  Tensor lik = past_logits;
  for (std::size_t t = 0; t < lik.rows(); ++t) {
    double mx = lik(t, 0);
    for (std::size_t k = 1; k < lik.cols(); ++k) mx = std::max(mx, lik(t, k));
    double z = 0.0;
    for (std::size_t k = 0; k < lik.cols(); ++k) z += lik(t, k) = std::exp(lik(t, k) - mx);
    for (std::size_t k = 0; k < lik.cols(); ++k) lik(t, k) /= z;
  }
  const ForwardResult fw = hmm_forward(lik, params);
  return hmm_predict(fw.posteriors.row_span(fw.posteriors.rows() - 1), params.transition, t_future);
}

std::vector<int> constant_predict(const Tensor& past_logits, std::size_t t_future) {
  if (past_logits.rows() == 0 || past_logits.size() == 0) throw ValidationError("constant_predict: empty past");
  const std::vector<int> am = past_logits.argmax_rows();
  return std::vector<int>(t_future, am.back());
}

void write_hmm(std::ostream& os, const HmmParams& p) {
  auto rows = [&os](const Tensor& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) os << (j ? " " : "") << format_double(m(i, j));
      os << '\n';
    }
  };
  os << "phasecast-hmm 1\nn_states " << p.n_states() << "\ninitial\n";
  rows(Tensor(diff::Shape{1, p.n_states()}, std::vector<double>(p.initial.values().begin(), p.initial.values().end())));
  os << "transition\n";
  rows(p.transition);
  if (p.confusion) {
    os << "confusion\n";
    rows(*p.confusion);
  }
  os << "end\n";
}

HmmParams read_hmm(std::istream& is) {
  std::string word;
  int version = 0;
  if (!(is >> word >> version) || word != "phasecast-hmm") throw ParseError("hmm: missing 'phasecast-hmm' header");
  if (version != 1) throw ParseError("hmm: unsupported version " + std::to_string(version));
  std::string nstr;
  if (!(is >> word >> nstr) || word != "n_states") throw ParseError("hmm: expected n_states");
  const long long n = parse_int(nstr, "n_states");
  if (n < 1) throw ParseError("hmm: n_states must be >= 1");
  const auto un = static_cast<std::size_t>(n);
  auto read = [&](std::size_t r, const char* what) {
    Tensor m = Tensor::zeros(r, un);
    for (auto& v : m.values()) {
      std::string tok;
      if (!(is >> tok)) throw ParseError(std::string("hmm: truncated ") + what);
      v = parse_double(tok, what);
    }
    return m;
  };
  HmmParams p;
  if (!(is >> word) || word != "initial") throw ParseError("hmm: expected 'initial'");
  p.initial = read(1, "initial");
  if (!(is >> word) || word != "transition") throw ParseError("hmm: expected 'transition'");
  p.transition = read(un, "transition");
  if (!(is >> word)) throw ParseError("hmm: missing 'end'");
  if (word == "confusion") {
    p.confusion = read(un, "confusion");
    if (!(is >> word)) throw ParseError("hmm: missing 'end'");
  }
  if (word != "end") throw ParseError("hmm: unexpected token '" + word + "'");
  p.validate();
  return p;
}

void save_hmm(const std::filesystem::path& path, const HmmParams& params) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  write_hmm(os, params);
}

HmmParams load_hmm(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  return read_hmm(is);
}

}  // namespace phasecast::baselines
