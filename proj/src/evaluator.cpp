#include "cpr/evaluator.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <set>

#include <json.hpp>

namespace cpr {
namespace {

int label_of(const LabelMap& labels, const InstanceId& id) {
  auto it = labels.find(id);
  if (it == labels.end()) throw ValidationError("no label for instance " + id);
  return it->second;
}

int slot_label(std::span<const int> slot_labels, Slot t) {
  if (t >= slot_labels.size()) throw ValidationError("no label for slot " + std::to_string(t));
  return slot_labels[t];
}

}  // namespace

LabelMap label_map(const Dataset& dataset) {
  LabelMap out;
  for (const auto& rec : dataset.records) {
    if (!rec.class_label) throw ValidationError("instance " + rec.id + " has no class label");
    out.emplace(rec.id, *rec.class_label);
  }
  return out;
}

ClassSizes class_sizes(const Dataset& dataset) {
  ClassSizes out;
  for (const auto& rec : dataset.records) {
    if (!rec.class_label) throw ValidationError("instance " + rec.id + " has no class label");
    ++out[*rec.class_label];
  }
  return out;
}

double pmr(const MiningResult& mining, int query_class, std::span<const int> slot_labels) {
  if (mining.positives.empty()) throw ValidationError("empty positive set");
  const auto tp = std::count_if(mining.positives.begin(), mining.positives.end(),
                                [&](Slot t) { return slot_label(slot_labels, t) == query_class; });
  return static_cast<double>(tp) / static_cast<double>(mining.positives.size());
}

int mining_r_at_1(const MiningResult& mining, int query_class, std::span<const int> slot_labels) {
  if (mining.positives.empty()) throw ValidationError("empty positive set");
  return slot_label(slot_labels, mining.positives.front()) == query_class ? 1 : 0;
}

double pmr(const QueryTrace& trace, const LabelMap& labels) {
  if (trace.positive_ids.empty()) throw ValidationError("empty positive set");
  const int cls = label_of(labels, trace.query_id);
  const auto tp = std::count_if(trace.positive_ids.begin(), trace.positive_ids.end(),
                                [&](const InstanceId& id) { return label_of(labels, id) == cls; });
  return static_cast<double>(tp) / static_cast<double>(trace.positive_ids.size());
}

int mining_r_at_1(const QueryTrace& trace, const LabelMap& labels) {
  if (trace.positive_ids.empty()) throw ValidationError("empty positive set");
  return label_of(labels, trace.positive_ids.front()) == label_of(labels, trace.query_id) ? 1 : 0;
}

std::map<int, std::size_t> distinct_tp_counts(std::span<const QueryTrace> traces, const LabelMap& labels) {
  std::map<int, std::set<InstanceId>> mined;
  for (const auto& trace : traces) {
    const int cls = label_of(labels, trace.query_id);
    for (const auto& id : trace.positive_ids) {
      if (id != trace.query_id && label_of(labels, id) == cls) mined[cls].insert(id);
    }
  }
  std::map<int, std::size_t> out;
  for (const auto& [cls, ids] : mined) out[cls] = ids.size();
  return out;
}

std::map<int, double> cmr(std::span<const QueryTrace> traces, const LabelMap& labels, const ClassSizes& sizes) {
  const auto counts = distinct_tp_counts(traces, labels);
  for (const auto& [cls, n] : counts) {
    if (!sizes.count(cls)) throw ValidationError("unknown class size for class " + std::to_string(cls));
  }
  std::map<int, double> out;
  for (const auto& [cls, size] : sizes) {
    if (size == 0) throw ValidationError("class " + std::to_string(cls) + " has zero instances");
    auto it = counts.find(cls);
    const std::size_t n = it == counts.end() ? 0 : it->second;
    out[cls] = static_cast<double>(n) / static_cast<double>(size);
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

LabeledEmbeddings embed(const Dataset& dataset, const ToyEncoder& encoder, const ViewId& view) {
  LabeledEmbeddings out;
  for (const auto& rec : dataset.records) {
    if (!rec.class_label) throw ValidationError("instance " + rec.id + " has no class label");
    out.vectors.push_back(encoder.encode(rec.features.at(view)));
    out.labels.push_back(*rec.class_label);
  }
  return out;
}

LabeledEmbeddings raw_features(const Dataset& dataset, const ViewId& view) {
  LabeledEmbeddings out;
  for (const auto& rec : dataset.records) {
    if (!rec.class_label) throw ValidationError("instance " + rec.id + " has no class label");
    out.vectors.push_back(normalize(rec.features.at(view)));
    out.labels.push_back(*rec.class_label);
  }
  return out;
}

std::map<std::size_t, double> retrieval_recall(const LabeledEmbeddings& test, const LabeledEmbeddings& train,
                                               std::span<const std::size_t> ks) {
  if (train.vectors.empty()) throw ValidationError("empty train set");
  if (test.vectors.empty()) throw ValidationError("empty test set");
  if (train.vectors.size() != train.labels.size() || test.vectors.size() != test.labels.size()) {
    throw ValidationError("embedding/label count mismatch");
  }
  if (ks.empty()) throw ValidationError("no k values");
  for (std::size_t k : ks) {
    if (k == 0) throw ValidationError("k must be >= 1");
  }
  const std::size_t max_k = *std::max_element(ks.begin(), ks.end());

  std::map<std::size_t, std::size_t> hits;
  std::vector<ScoredSlot> scored(train.vectors.size());
  for (std::size_t i = 0; i < test.vectors.size(); ++i) {
    for (std::size_t j = 0; j < train.vectors.size(); ++j) {
      if (train.vectors[j].size() != test.vectors[i].size()) throw ValidationError("embedding dim mismatch");
      scored[j] = {j, dot(test.vectors[i], train.vectors[j])};
    }
    const std::size_t depth = std::min(max_k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(depth), scored.end(), ranks_before);
    // Rank of the first same-class neighbour; everything from there on is a hit.
    std::size_t first_hit = depth;
    for (std::size_t r = 0; r < depth; ++r) {
      if (train.labels[scored[r].slot] == test.labels[i]) {
        first_hit = r;
        break;
      }
    }
    for (std::size_t k : ks) {
      if (first_hit < k) ++hits[k];
    }
  }
  std::map<std::size_t, double> out;
  for (std::size_t k : ks) out[k] = static_cast<double>(hits[k]) / static_cast<double>(test.vectors.size());
  return out;
}

EpochMetrics summarize_epoch(const EpochLog& log, const LabelMap& labels, const ClassSizes& sizes) {
  EpochMetrics m;
  m.epoch = log.epoch;
  m.cycle = log.cycle;
  m.train_view = log.train_view;
  m.final_topk = log.final_topk;
  m.loss_mean = log.loss_mean;
  if (log.queries.empty()) throw ValidationError("epoch log has no queries");
  double pmr_sum = 0.0;
  double r1_sum = 0.0;
  for (const auto& q : log.queries) {
    pmr_sum += pmr(q, labels);
    r1_sum += mining_r_at_1(q, labels);
  }
  const auto n = static_cast<double>(log.queries.size());
  m.pmr_mean = pmr_sum / n;
  m.mining_r_at_1 = r1_sum / n;
  m.cmr_per_class = cmr(log.queries, labels, sizes);
  m.tp_counts = distinct_tp_counts(log.queries, labels);
  for (const auto& [cls, size] : sizes) m.tp_counts.try_emplace(cls, 0);
  std::vector<double> values;
  for (const auto& [cls, v] : m.cmr_per_class) values.push_back(v);
  m.cmr_median = median(std::move(values));
  return m;
}

MetricsReport build_report(std::vector<EpochMetrics> epochs, std::map<std::size_t, double> retrieval_recalls) {
  MetricsReport r;
  for (const auto& e : epochs) r.pmr_series.push_back(e.pmr_mean);
  if (!epochs.empty()) {
    const EpochMetrics& last = epochs.back();
    r.cmr_per_class = last.cmr_per_class;
    r.cmr_median = last.cmr_median;
    r.mining_r_at_1 = last.mining_r_at_1;
    r.per_class_tp_counts = last.tp_counts;
  }
  r.epochs = std::move(epochs);
  r.retrieval_recalls = std::move(retrieval_recalls);
  return r;
}

namespace {

nlohmann::ordered_json int_keyed(const auto& m) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m) j[std::to_string(k)] = v;
  return j;
}

}  // namespace

void write_report_jsonl(std::ostream& out, const MetricsReport& report, const Provenance& config) {
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config) cfg[k] = v;
  out << nlohmann::ordered_json{{"type", "config"}, {"config", cfg}}.dump() << '\n';
  for (const auto& e : report.epochs) {
    nlohmann::ordered_json j;
    j["type"] = "epoch";
    j["epoch"] = e.epoch;
    j["cycle"] = e.cycle;
    j["train_view"] = e.train_view;
    j["final_topk"] = e.final_topk;
    j["loss_mean"] = e.loss_mean;
    j["pmr_mean"] = e.pmr_mean;
    j["mining_r_at_1"] = e.mining_r_at_1;
    j["cmr_median"] = e.cmr_median;
    j["cmr_per_class"] = int_keyed(e.cmr_per_class);
    out << j.dump() << '\n';
  }
  nlohmann::ordered_json s;
  s["type"] = "summary";
  s["pmr_series"] = report.pmr_series;
  s["cmr_median"] = report.cmr_median;
  s["mining_r_at_1"] = report.mining_r_at_1;
  s["cmr_per_class"] = int_keyed(report.cmr_per_class);
  s["per_class_tp_counts"] = int_keyed(report.per_class_tp_counts);
  s["retrieval_recalls"] = int_keyed(report.retrieval_recalls);
  out << s.dump() << '\n';
}

void write_cmr_table(std::ostream& out, const MetricsReport& report, const ClassSizes& sizes) {
  out << "class,cmr,distinct_tp,class_size\n";
  const auto old_precision = out.precision(17);
  for (const auto& [cls, v] : report.cmr_per_class) {
    auto tp = report.per_class_tp_counts.find(cls);
    auto size = sizes.find(cls);
    out << cls << ',' << v << ',' << (tp == report.per_class_tp_counts.end() ? 0 : tp->second) << ','
        << (size == sizes.end() ? 0 : size->second) << '\n';
  }
  out.precision(old_precision);
}

void write_pmr_series(std::ostream& out, const MetricsReport& report) {
  out << "epoch,cycle,train_view,final_topk,loss_mean,pmr_mean,mining_r_at_1,cmr_median\n";
  const auto old_precision = out.precision(17);
  for (const auto& e : report.epochs) {
    out << e.epoch << ',' << e.cycle << ',' << e.train_view << ',' << e.final_topk << ',' << e.loss_mean << ','
        << e.pmr_mean << ',' << e.mining_r_at_1 << ',' << e.cmr_median << '\n';
  }
  out.precision(old_precision);
}

void write_run_log(std::ostream& out, const MetricsReport& report) {
  const auto flags = out.flags();
  out << std::fixed << std::setprecision(6);
  for (const auto& e : report.epochs) {
    out << "epoch " << e.epoch << " loss " << e.loss_mean << " pmr " << e.pmr_mean << " cmr_median "
        << e.cmr_median << '\n';
  }
  out.flags(flags);
}

}  // namespace cpr
