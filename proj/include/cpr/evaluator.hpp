#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpr/cascade_miner.hpp"
#include "cpr/encoder.hpp"
#include "cpr/feature_store.hpp"
#include "cpr/trainer.hpp"

namespace cpr {

// Ground truth lives here and nowhere upstream of this module.
using LabelMap = std::map<InstanceId, int>;
using ClassSizes = std::map<int, std::size_t>;

LabelMap label_map(const Dataset& dataset);    // every record must be labeled
ClassSizes class_sizes(const Dataset& dataset);

// Fraction of the mined positive set sharing the query's class (#TP / |positives|).
// slot_labels is indexed by bank slot. q+ is never part of the set.
double pmr(const MiningResult& mining, int query_class, std::span<const int> slot_labels);
// 1 iff the best-ranked final-stage slot shares the query's class.
int mining_r_at_1(const MiningResult& mining, int query_class, std::span<const int> slot_labels);

// The same metrics over a recorded trace, labels looked up by instance id.
double pmr(const QueryTrace& trace, const LabelMap& labels);
int mining_r_at_1(const QueryTrace& trace, const LabelMap& labels);

// Distinct same-class instances mined as positives for queries of each class.
std::map<int, std::size_t> distinct_tp_counts(std::span<const QueryTrace> traces, const LabelMap& labels);

// Class mining recall: distinct TPs mined for class c over one epoch divided
// by the number of class-c instances. Classes with no TP map to 0.
std::map<int, double> cmr(std::span<const QueryTrace> traces, const LabelMap& labels, const ClassSizes& sizes);

// Median of the values; mean of the middle pair for even counts.
double median(std::vector<double> values);

struct LabeledEmbeddings {
  std::vector<FeatureVec> vectors;
  std::vector<int> labels;
};

LabeledEmbeddings embed(const Dataset& dataset, const ToyEncoder& encoder, const ViewId& view);
LabeledEmbeddings raw_features(const Dataset& dataset, const ViewId& view);

inline const std::vector<std::size_t> kDefaultRecallKs{1, 5, 10, 20};

/// Nearest-neighbour retrieval recall: a test item counts as correct at k
/// when any of its k most similar (cosine) training items shares its label.
/// Ties in similarity go to the lower training index.
std::map<std::size_t, double> retrieval_recall(const LabeledEmbeddings& test, const LabeledEmbeddings& train,
                                               std::span<const std::size_t> ks);

struct EpochMetrics {
  int epoch = 0;
  int cycle = 0;
  ViewId train_view;
  std::size_t final_topk = 0;
  double loss_mean = 0.0;
  double pmr_mean = 0.0;
  double mining_r_at_1 = 0.0;
  double cmr_median = 0.0;
  std::map<int, double> cmr_per_class;
  std::map<int, std::size_t> tp_counts;
};

EpochMetrics summarize_epoch(const EpochLog& log, const LabelMap& labels, const ClassSizes& sizes);

struct MetricsReport {
  std::vector<double> pmr_series;
  std::vector<EpochMetrics> epochs;
  // Last-epoch aggregates.
  std::map<int, double> cmr_per_class;
  double cmr_median = 0.0;
  double mining_r_at_1 = 0.0;
  std::map<int, std::size_t> per_class_tp_counts;
  std::map<std::size_t, double> retrieval_recalls;
};

MetricsReport build_report(std::vector<EpochMetrics> epochs, std::map<std::size_t, double> retrieval_recalls = {});

using Provenance = std::vector<std::pair<std::string, std::string>>;

// Line-delimited JSON: one "config" line, one "epoch" line per epoch, one
// "summary" line.
void write_report_jsonl(std::ostream& out, const MetricsReport& report, const Provenance& config);
// CSV: class,cmr,distinct_tp,class_size
void write_cmr_table(std::ostream& out, const MetricsReport& report, const ClassSizes& sizes);
// CSV: epoch,cycle,train_view,final_topk,loss_mean,pmr_mean,mining_r_at_1,cmr_median
void write_pmr_series(std::ostream& out, const MetricsReport& report);
// One whitespace-separated line per epoch: epoch, loss mean, PMR mean, CMR median.
void write_run_log(std::ostream& out, const MetricsReport& report);

}  // namespace cpr
