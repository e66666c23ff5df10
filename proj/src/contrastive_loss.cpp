#include "cpr/contrastive_loss.hpp"

#include <algorithm>
#include <cmath>

namespace cpr {
namespace {

std::vector<double> logits(const FeatureVec& query, const std::vector<FeatureVec>& keys, double tau) {
  std::vector<double> out;
  out.reserve(keys.size());
  for (const auto& k : keys) out.push_back(dot(query, k) / tau);
  return out;
}

double max_of(std::span<const double> a, std::span<const double> b) {
  double m = -INFINITY;
  for (double x : a) m = std::max(m, x);
  for (double x : b) m = std::max(m, x);
  return m;
}

double sum_exp(std::span<const double> xs, double shift) {
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - shift);
  return acc;
}

}  // namespace

void ContrastiveBatch::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ValidationError("temperature must be > 0");
  if (positives.empty()) throw ValidationError("empty positive set");
  if (negatives.empty()) throw ValidationError("empty negative set");
  const std::size_t d = query.size();
  if (d == 0) throw ValidationError("empty query");
  auto check = [d](const FeatureVec& v) {
    if (v.size() != d) throw ValidationError("contrastive batch dim mismatch");
    if (!is_unit(v)) throw ValidationError("contrastive batch features must be unit-norm");
  };
  check(query);
  for (const auto& p : positives) check(p);
  for (const auto& n : negatives) check(n);
}

double multi_positive_nce(std::span<const double> positive_logits, std::span<const double> negative_logits) {
  if (positive_logits.empty()) throw ValidationError("empty positive set");
  if (negative_logits.empty()) throw ValidationError("empty negative set");
  const double shift = max_of(positive_logits, negative_logits);
  const double pos = sum_exp(positive_logits, shift);
  const double all = pos + sum_exp(negative_logits, shift);
  // -log(pos / all), split so neither term underflows to log(0) on its own.
  return std::log(all) - std::log(pos);
}

std::vector<double> multi_positive_nce_logit_grad(std::span<const double> positive_logits,
                                                  std::span<const double> negative_logits) {
  if (positive_logits.empty()) throw ValidationError("empty positive set");
  if (negative_logits.empty()) throw ValidationError("empty negative set");
  const double shift = max_of(positive_logits, negative_logits);
  const double pos = sum_exp(positive_logits, shift);
  const double all = pos + sum_exp(negative_logits, shift);
  std::vector<double> grad;
  grad.reserve(positive_logits.size() + negative_logits.size());
  for (double l : positive_logits) {
    const double e = std::exp(l - shift);
    grad.push_back(e / all - e / pos);
  }
  for (double l : negative_logits) grad.push_back(std::exp(l - shift) / all);
  return grad;
}

double info_nce(const ContrastiveBatch& batch) {
  if (batch.positives.size() != 1) throw ValidationError("info_nce needs exactly one positive");
  return mil_nce(batch);
}

double mil_nce(const ContrastiveBatch& batch) {
  batch.validate();
  return multi_positive_nce(logits(batch.query, batch.positives, batch.temperature),
                            logits(batch.query, batch.negatives, batch.temperature));
}

LossGrad mil_nce_grad(const ContrastiveBatch& batch) {
  batch.validate();
  const auto pos = logits(batch.query, batch.positives, batch.temperature);
  const auto neg = logits(batch.query, batch.negatives, batch.temperature);
  const auto d_logits = multi_positive_nce_logit_grad(pos, neg);

  LossGrad out{multi_positive_nce(pos, neg), FeatureVec(batch.query.size(), 0.0)};
  auto accumulate = [&](const FeatureVec& key, double w) {
    for (std::size_t i = 0; i < key.size(); ++i) out.d_query[i] += w * key[i];
  };
  for (std::size_t p = 0; p < batch.positives.size(); ++p) {
    accumulate(batch.positives[p], d_logits[p] / batch.temperature);
  }
  for (std::size_t j = 0; j < batch.negatives.size(); ++j) {
    accumulate(batch.negatives[j], d_logits[pos.size() + j] / batch.temperature);
  }
  return out;
}

FeatureVec normalization_backward(std::span<const double> raw, std::span<const double> d_unit) {
  if (raw.size() != d_unit.size()) throw ValidationError("normalization_backward dim mismatch");
  const double norm = l2_norm(raw);
  if (norm == 0.0) throw ValidationError("degenerate feature");
  // d unit / d raw = (I - u u^T) / |raw|
  double along = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) along += raw[i] / norm * d_unit[i];
  FeatureVec out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (d_unit[i] - along * raw[i] / norm) / norm;
  return out;
}

LossGrad mil_nce_grad_raw(std::span<const double> raw_query, const ContrastiveBatch& batch) {
  ContrastiveBatch unit = batch;
  unit.query = normalize(raw_query);
  LossGrad g = mil_nce_grad(unit);
  g.d_query = normalization_backward(raw_query, g.d_query);
  return g;
}

}  // namespace cpr
