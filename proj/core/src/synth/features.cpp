#include "phasecast/synth/features.hpp"

#include <cmath>
#include <string>

#include "phasecast/error.hpp"

namespace phasecast::synth {

using diff::Tensor;

namespace {
constexpr std::uint64_t kPrototypeSeed = 0x5eed'0f'9a7e;
}

Tensor phase_prototypes(std::size_t n_phases, std::size_t feature_dim) {
  if (feature_dim < n_phases) {
    throw ValidationError("phase_prototypes: feature_dim " + std::to_string(feature_dim) + " < n_phases " +
                          std::to_string(n_phases));
  }
  Rng rng(derive_seed(kPrototypeSeed, n_phases * 1000 + feature_dim));
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor p = Tensor::zeros(n_phases, feature_dim);
  // Gram-Schmidt on Gaussian rows; redraw on (numerically) dependent rows.
  for (std::size_t i = 0; i < n_phases; ++i) {
    while (true) {
      for (std::size_t j = 0; j < feature_dim; ++j) p(i, j) = normal(rng);
      for (std::size_t k = 0; k < i; ++k) {
        double dot = 0.0;
        for (std::size_t j = 0; j < feature_dim; ++j) dot += p(i, j) * p(k, j);
        for (std::size_t j = 0; j < feature_dim; ++j) p(i, j) -= dot * p(k, j);
      }
      double norm = 0.0;
      for (std::size_t j = 0; j < feature_dim; ++j) norm += p(i, j) * p(i, j);
      norm = std::sqrt(norm);
      if (norm < 1e-6) continue;
      for (std::size_t j = 0; j < feature_dim; ++j) p(i, j) /= norm;
      break;
    }
  }
  return p;
}

Tensor emit_features(const PhaseSequence& seq, std::size_t n_phases, std::size_t feature_dim, double noise_sigma,
                     const std::optional<Tensor>& confusion, Rng& rng) {
  if (noise_sigma < 0.0) throw ValidationError("emit_features: noise_sigma must be >= 0");
  if (confusion && (confusion->rows() != n_phases || confusion->cols() != n_phases)) {
    throw ShapeError("emit_features: confusion matrix must be n_phases x n_phases");
  }
  const Tensor protos = phase_prototypes(n_phases, feature_dim);
  Tensor out = Tensor::zeros(seq.length(), feature_dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t t = 0; t < seq.length(); ++t) {
    const int label = seq.labels[t];
    if (label < 0 || static_cast<std::size_t>(label) >= n_phases) {
      throw ValidationError("emit_features: label " + std::to_string(label) + " out of range");
    }
    std::size_t shown = static_cast<std::size_t>(label);
    if (confusion) {
      double r = u(rng);
      for (std::size_t k = 0; k < n_phases; ++k) {
        shown = k;
        r -= (*confusion)(static_cast<std::size_t>(label), k);
        if (r < 0.0) break;
      }
    }
    for (std::size_t j = 0; j < feature_dim; ++j) {
      out(t, j) = protos(shown, j) + (noise_sigma > 0.0 ? noise_sigma * normal(rng) : 0.0);
    }
  }
  return out;
}

std::vector<int> nearest_prototype(const Tensor& features, const Tensor& prototypes) {
  if (features.cols() != prototypes.cols()) throw ShapeError("nearest_prototype: dimension mismatch");
  std::vector<int> out(features.rows());
  for (std::size_t t = 0; t < features.rows(); ++t) {
    double best = INFINITY;
    for (std::size_t k = 0; k < prototypes.rows(); ++k) {
      double d = 0.0;
      for (std::size_t j = 0; j < features.cols(); ++j) {
        const double diff = features(t, j) - prototypes(k, j);
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        out[t] = static_cast<int>(k);
      }
    }
  }
  return out;
}

}  // namespace phasecast::synth
