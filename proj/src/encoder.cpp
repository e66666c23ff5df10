#include "cpr/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace cpr {

ToyEncoder::ToyEncoder(std::size_t input_dim, std::size_t output_dim)
    : input_dim_(input_dim),
      output_dim_(output_dim),
      weights_(input_dim * output_dim, 0.0),
      bias_(output_dim, 0.0) {
  if (input_dim == 0 || output_dim == 0) throw ValidationError("encoder dims must be positive");
}

ToyEncoder ToyEncoder::random(std::size_t input_dim, std::size_t output_dim, std::mt19937_64& rng) {
  ToyEncoder enc(input_dim, output_dim);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(output_dim)));
  for (double& w : enc.weights_) w = gauss(rng);
  return enc;
}

FeatureVec ToyEncoder::project(std::span<const double> x) const {
  if (x.size() != input_dim_) throw ValidationError("encoder input dim mismatch");
  FeatureVec out(bias_);
  for (std::size_t i = 0; i < input_dim_; ++i) {
    const double xi = x[i];
    const double* row = weights_.data() + i * output_dim_;
    for (std::size_t j = 0; j < output_dim_; ++j) out[j] += xi * row[j];
  }
  return out;
}

FeatureVec ToyEncoder::encode(std::span<const double> x) const { return normalize(project(x)); }

void ToyEncoder::accumulate_grad(std::span<const double> x, std::span<const double> d_raw,
                                 ToyEncoder& grad) const {
  if (!same_shape(grad)) throw ValidationError("gradient shape mismatch");
  if (x.size() != input_dim_ || d_raw.size() != output_dim_) throw ValidationError("encoder grad dim mismatch");
  for (std::size_t i = 0; i < input_dim_; ++i) {
    double* row = grad.weights_.data() + i * output_dim_;
    for (std::size_t j = 0; j < output_dim_; ++j) row[j] += x[i] * d_raw[j];
  }
  for (std::size_t j = 0; j < output_dim_; ++j) grad.bias_[j] += d_raw[j];
}

void ToyEncoder::sgd_step(const ToyEncoder& grad, double step) {
  if (!same_shape(grad)) throw ValidationError("gradient shape mismatch");
  for (std::size_t k = 0; k < weights_.size(); ++k) weights_[k] -= step * grad.weights_[k];
  for (std::size_t k = 0; k < bias_.size(); ++k) bias_[k] -= step * grad.bias_[k];
}

bool ToyEncoder::same_shape(const ToyEncoder& other) const {
  return input_dim_ == other.input_dim_ && output_dim_ == other.output_dim_;
}

bool ToyEncoder::finite() const { return all_finite(weights_) && all_finite(bias_); }

ToyEncoder ema_update(const ToyEncoder& live, const ToyEncoder& ema, double momentum) {
  if (!live.same_shape(ema)) throw ValidationError("ema shape mismatch");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("ema momentum must be in [0, 1)");
  ToyEncoder out = ema;
  for (std::size_t k = 0; k < out.weights().size(); ++k) {
    out.weights()[k] = momentum * ema.weights()[k] + (1.0 - momentum) * live.weights()[k];
  }
  for (std::size_t k = 0; k < out.bias().size(); ++k) {
    out.bias()[k] = momentum * ema.bias()[k] + (1.0 - momentum) * live.bias()[k];
  }
  return out;
}

double parameter_distance(const ToyEncoder& a, const ToyEncoder& b) {
  if (!a.same_shape(b)) throw ValidationError("encoder shape mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.weights().size(); ++k) acc += std::pow(a.weights()[k] - b.weights()[k], 2);
  for (std::size_t k = 0; k < a.bias().size(); ++k) acc += std::pow(a.bias()[k] - b.bias()[k], 2);
  return std::sqrt(acc);
}

}  // namespace cpr
