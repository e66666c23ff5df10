#include "cpr/cascade_miner.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace cpr {
namespace {

std::vector<Slot> best_n(std::span<const double> query, const MemoryBank& bank, const ViewId& view,
                         std::span<const Slot> candidates, std::size_t n) {
  std::vector<ScoredSlot> scored = bank.similarities(query, view, candidates);
  scored.resize(std::min(n, scored.size()));
  std::vector<Slot> out;
  out.reserve(scored.size());
  for (const auto& s : scored) out.push_back(s.slot);
  return out;
}

const FeatureVec& variant_in(const ViewFeatures& feats, const ViewId& view) {
  auto it = feats.find(view);
  if (it == feats.end()) throw ValidationError("query variant missing view: " + view);
  return it->second;
}

void check_distinct(std::span<const Slot> candidates) {
  std::vector<Slot> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("duplicate candidate slot");
  }
}

}  // namespace

void CascadeConfig::validate() const {
  if (num_stages < 1) throw ValidationError("num_stages must be >= 1");
  if (!(selection_ratio > 0.0 && selection_ratio <= 1.0)) {
    throw ValidationError("selection_ratio must be in (0, 1]");
  }
  if (final_topk < 1) throw ValidationError("final_topk must be >= 1");
  if (!view_schedule.empty() && view_schedule.size() != static_cast<std::size_t>(num_stages)) {
    throw ValidationError("view_schedule length must equal num_stages");
  }
}

std::vector<ViewId> alternating_schedule(const ViewId& query_view, std::span<const ViewId> views,
                                         int num_stages) {
  auto it = std::find(views.begin(), views.end(), query_view);
  if (it == views.end()) throw ValidationError("unknown query view: " + query_view);
  const std::size_t q = static_cast<std::size_t>(it - views.begin());
  std::vector<ViewId> out;
  for (int s = 0; s < num_stages; ++s) {
    // Even stages (0-based) take the next view round-robin after q, odd ones return to q.
    if (views.size() == 1 || s % 2 == 1) {
      out.push_back(query_view);
    } else {
      const std::size_t step = static_cast<std::size_t>(s / 2) % (views.size() - 1);
      out.push_back(views[(q + 1 + step) % views.size()]);
    }
  }
  return out;
}

CascadeConfig resolve_schedule(CascadeConfig cfg, const ViewId& query_view,
                               std::span<const ViewId> views) {
  cfg.validate();
  if (cfg.view_schedule.empty()) {
    cfg.view_schedule = alternating_schedule(query_view, views, cfg.num_stages);
  }
  for (const auto& v : cfg.view_schedule) {
    if (std::find(views.begin(), views.end(), v) == views.end()) {
      throw ValidationError("view_schedule names unknown view: " + v);
    }
  }
  return cfg;
}

std::size_t ratio_keep_count(std::size_t count, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ValidationError("selection ratio must be in (0, 1]");
  // The slack keeps products like 0.3 * 10 = 3.0000000000000004 at 3.
  const double raw = ratio * static_cast<double>(count);
  const auto keep = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  return std::clamp<std::size_t>(keep, count == 0 ? 0 : 1, count);
}

std::vector<Slot> select(std::span<const double> query, const MemoryBank& bank, const ViewId& view,
                         std::span<const Slot> candidates, double ratio) {
  if (candidates.empty()) throw ValidationError("empty candidates");
  check_distinct(candidates);
  return best_n(query, bank, view, candidates, ratio_keep_count(candidates.size(), ratio));
}

std::vector<Slot> topk(std::span<const double> query, const MemoryBank& bank, const ViewId& view,
                       std::span<const Slot> candidates, std::size_t k) {
  if (k < 1) throw ValidationError("k must be >= 1");
  check_distinct(candidates);
  return best_n(query, bank, view, candidates, k);
}

MiningResult cascade_mine(const ViewFeatures& query_variant, const MemoryBank& bank,
                          const CascadeConfig& cfg, std::span<const Slot> exclude) {
  cfg.validate();
  if (cfg.view_schedule.size() != static_cast<std::size_t>(cfg.num_stages)) {
    throw ValidationError("cascade_mine needs a resolved view_schedule");
  }

  MiningResult result;
  result.excluded.assign(exclude.begin(), exclude.end());
  std::sort(result.excluded.begin(), result.excluded.end());
  result.excluded.erase(std::unique(result.excluded.begin(), result.excluded.end()), result.excluded.end());
  for (Slot t : result.excluded) {
    if (t >= bank.size()) throw ValidationError("excluded slot out of range");
  }

  const std::vector<Slot> filled = bank.filled_slots();
  std::vector<Slot> candidates;
  std::set_difference(filled.begin(), filled.end(), result.excluded.begin(),
                      result.excluded.end(), std::back_inserter(candidates));
  if (candidates.empty()) throw ValidationError("empty candidate set after exclusion");

  for (int s = 1; s <= cfg.num_stages; ++s) {
    const ViewId& view = cfg.view_schedule[static_cast<std::size_t>(s - 1)];
    const FeatureVec& q = variant_in(query_variant, view);
    StageRecord rec{s, view, candidates.size(), {}, false};
    if (s == cfg.num_stages) {
      rec.selected = topk(q, bank, view, candidates, cfg.final_topk);
      rec.truncated = candidates.size() < cfg.final_topk;
    } else {
      rec.selected = select(q, bank, view, candidates, cfg.selection_ratio);
    }
    candidates = rec.selected;
    std::sort(candidates.begin(), candidates.end());
    result.stage_trace.push_back(std::move(rec));
  }

  result.positives = result.stage_trace.back().selected;
  std::vector<Slot> taken(result.positives.begin(), result.positives.end());
  taken.insert(taken.end(), result.excluded.begin(), result.excluded.end());
  std::sort(taken.begin(), taken.end());
  for (Slot t = 0; t < bank.size(); ++t) {
    if (!std::binary_search(taken.begin(), taken.end(), t)) result.negatives.push_back(t);
  }
  return result;
}

void write_stage_trace(std::ostream& out, const InstanceId& query_id, const MiningResult& result,
                       const MemoryBank& bank) {
  for (const auto& rec : result.stage_trace) {
    out << query_id << '\t' << rec.stage << '\t' << rec.view << '\t' << rec.candidate_count << '\t';
    for (std::size_t i = 0; i < rec.selected.size(); ++i) {
      if (i) out << ',';
      out << rec.selected[i] << ':' << bank.slot_id(rec.selected[i]);
    }
    if (rec.truncated) out << "\ttruncated";
    out << '\n';
  }
}

}  // namespace cpr
