#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cpr/feature_store.hpp"

namespace cpr {

/// Linear map followed by L2 normalization: encode(x) = normalize(W^T x + b).
/// Weights are stored row-major as input_dim x output_dim.
class ToyEncoder {
 public:
  ToyEncoder() = default;
  ToyEncoder(std::size_t input_dim, std::size_t output_dim);

  // Gaussian weights with variance 1/output_dim, zero bias.
  static ToyEncoder random(std::size_t input_dim, std::size_t output_dim, std::mt19937_64& rng);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return output_dim_; }

  FeatureVec project(std::span<const double> x) const;  // pre-normalization output
  FeatureVec encode(std::span<const double> x) const;

  // Adds the parameter gradient for one sample into `grad` (same shape):
  // dW += x (d_raw)^T, db += d_raw, where d_raw is d loss / d project(x).
  void accumulate_grad(std::span<const double> x, std::span<const double> d_raw, ToyEncoder& grad) const;

  // this -= step * grad
  void sgd_step(const ToyEncoder& grad, double step);

  bool same_shape(const ToyEncoder& other) const;
  bool finite() const;

  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& bias() { return bias_; }
  const std::vector<double>& bias() const { return bias_; }

  friend bool operator==(const ToyEncoder&, const ToyEncoder&) = default;

 private:
  std::size_t input_dim_ = 0;
  std::size_t output_dim_ = 0;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

// momentum * ema + (1 - momentum) * live, elementwise over weights and bias.
ToyEncoder ema_update(const ToyEncoder& live, const ToyEncoder& ema, double momentum);

// Frobenius distance over weights and bias.
double parameter_distance(const ToyEncoder& a, const ToyEncoder& b);

}  // namespace cpr
