#pragma once

#include <span>
#include <vector>

#include "cpr/feature_store.hpp"

namespace cpr {

inline constexpr double kDefaultTemperature = 0.07;

/// One query against a positive set P and negatives N. All vectors unit-norm
/// and of equal dim; similarities are dot products scaled by 1/temperature.
struct ContrastiveBatch {
  FeatureVec query;
  std::vector<FeatureVec> positives;
  std::vector<FeatureVec> negatives;
  double temperature = kDefaultTemperature;

  void validate() const;
};

// -log(sum_P exp(l) / sum_{P u N} exp(l)) over precomputed logits, evaluated
// with max-subtraction.
double multi_positive_nce(std::span<const double> positive_logits, std::span<const double> negative_logits);

// d loss / d logit, positives first then negatives.
std::vector<double> multi_positive_nce_logit_grad(std::span<const double> positive_logits,
                                                  std::span<const double> negative_logits);

// InfoNCE. Requires exactly one positive and at least one negative.
double info_nce(const ContrastiveBatch& batch);

// MIL-NCE. Requires at least one positive and at least one negative. Equals
// info_nce when there is a single positive.
double mil_nce(const ContrastiveBatch& batch);

struct LossGrad {
  double loss = 0.0;
  FeatureVec d_query;
};

// MIL-NCE and its gradient with respect to batch.query, treated as a free
// vector (no normalization in the path).
LossGrad mil_nce_grad(const ContrastiveBatch& batch);

// Backpropagates d_unit through unit = raw / |raw|.
FeatureVec normalization_backward(std::span<const double> raw, std::span<const double> d_unit);

// MIL-NCE and its gradient with respect to an unnormalized query: the loss is
// evaluated at normalize(raw_query). Other batch fields as in mil_nce;
// batch.query is ignored.
LossGrad mil_nce_grad_raw(std::span<const double> raw_query, const ContrastiveBatch& batch);

}  // namespace cpr
