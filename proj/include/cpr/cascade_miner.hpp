#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "cpr/feature_store.hpp"

namespace cpr {

/// Shape of one cascade: n stages, the first n-1 keep ceil(ratio * |candidates|)
/// in their view, the last keeps final_topk. An empty view_schedule means
/// "alternate starting from the view opposite the query" and is resolved per
/// query view with resolve_schedule().
struct CascadeConfig {
  int num_stages = 1;
  double selection_ratio = 0.5;
  std::vector<ViewId> view_schedule;
  std::size_t final_topk = 5;

  void validate() const;
};

// Views for each stage when none are given: for query view q over views
// [q, o], returns [o, q, o, ...] of length n. With more than two views the
// rotation starts at the view following q in `views`. Single-view banks repeat q.
std::vector<ViewId> alternating_schedule(const ViewId& query_view, std::span<const ViewId> views,
                                         int num_stages);

CascadeConfig resolve_schedule(CascadeConfig cfg, const ViewId& query_view,
                               std::span<const ViewId> views);

struct StageRecord {
  int stage = 0;  // 1-based
  ViewId view;
  std::size_t candidate_count = 0;  // candidates entering the stage
  std::vector<Slot> selected;       // best first
  bool truncated = false;           // final stage had fewer than final_topk candidates
};

struct MiningResult {
  std::vector<Slot> positives;  // best first
  std::vector<Slot> negatives;  // ascending
  std::vector<Slot> excluded;   // ascending
  std::vector<StageRecord> stage_trace;
};

// The ceil(ratio * |candidates|) best candidates under `view`, best first.
std::vector<Slot> select(std::span<const double> query, const MemoryBank& bank, const ViewId& view,
                         std::span<const Slot> candidates, double ratio);

// The min(k, |candidates|) best candidates under `view`, best first.
std::vector<Slot> topk(std::span<const double> query, const MemoryBank& bank, const ViewId& view,
                       std::span<const Slot> candidates, std::size_t k);

// Number kept by a ratio stage over `count` candidates.
std::size_t ratio_keep_count(std::size_t count, double ratio);

/// Runs the staged selection for one query. query_variant holds the positive
/// variant's features in every scheduled view; stage s scores against the
/// bank in view_schedule[s-1] using query_variant at that view. `exclude` is
/// removed from both candidates and negatives. cfg.view_schedule must be
/// resolved (length num_stages).
MiningResult cascade_mine(const ViewFeatures& query_variant, const MemoryBank& bank,
                          const CascadeConfig& cfg, std::span<const Slot> exclude);

// One tab-separated line per stage: query id, stage, view, candidate count,
// selected "slot:instance" pairs best first, and "truncated" when flagged.
void write_stage_trace(std::ostream& out, const InstanceId& query_id, const MiningResult& result,
                       const MemoryBank& bank);

}  // namespace cpr
