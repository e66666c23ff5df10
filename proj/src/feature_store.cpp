#include "cpr/feature_store.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace cpr {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

bool is_unit(std::span<const double> v, double tol) {
  return all_finite(v) && std::abs(l2_norm(v) - 1.0) <= tol;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

FeatureVec normalize(std::span<const double> v) {
  if (!all_finite(v)) throw ValidationError("degenerate feature: non-finite entry");
  const double norm = l2_norm(v);
  if (norm == 0.0) throw ValidationError("degenerate feature");
  FeatureVec out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

std::size_t Dataset::dim(const ViewId& view) const {
  for (const auto& rec : records) {
    auto it = rec.features.find(view);
    if (it != rec.features.end()) return it->second.size();
  }
  throw ValidationError("unknown view: " + view);
}

void Dataset::validate() const {
  if (views.empty()) throw ValidationError("dataset has no views");
  std::set<ViewId> seen_views;
  for (const auto& v : views) {
    if (v.empty()) throw ValidationError("empty view name");
    if (!seen_views.insert(v).second) throw ValidationError("duplicate view: " + v);
  }
  std::map<ViewId, std::size_t> dims;
  std::set<InstanceId> ids;
  for (const auto& rec : records) {
    if (rec.id.empty()) throw ValidationError("empty instance id");
    if (!ids.insert(rec.id).second) throw ValidationError("duplicate instance id: " + rec.id);
    if (rec.features.size() != views.size()) {
      for (const auto& v : views) {
        if (!rec.features.count(v)) {
          throw ValidationError("missing view " + v + " for instance " + rec.id);
        }
      }
      throw ValidationError("unexpected view for instance " + rec.id);
    }
    for (const auto& v : views) {
      auto it = rec.features.find(v);
      if (it == rec.features.end()) {
        throw ValidationError("missing view " + v + " for instance " + rec.id);
      }
      const FeatureVec& f = it->second;
      if (f.empty()) throw ValidationError("empty feature for instance " + rec.id);
      if (!all_finite(f)) throw ValidationError("non-finite feature for instance " + rec.id);
      auto [d, inserted] = dims.emplace(v, f.size());
      if (!inserted && d->second != f.size()) {
        throw ValidationError("dim mismatch in view " + v + " for instance " + rec.id);
      }
    }
  }
}

UnlabeledDataset strip_labels(const Dataset& dataset) {
  UnlabeledDataset out;
  out.views = dataset.views;
  out.records.reserve(dataset.records.size());
  for (const auto& rec : dataset.records) out.records.push_back({rec.id, rec.features});
  return out;
}

bool ranks_before(const ScoredSlot& a, const ScoredSlot& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.slot < b.slot;
}

MemoryBank::MemoryBank(std::size_t capacity, std::vector<ViewShape> views)
    : capacity_(capacity) {
  if (capacity == 0) throw ValidationError("bank capacity must be positive");
  if (views.empty()) throw ValidationError("bank needs at least one view");
  for (const auto& shape : views) {
    if (shape.view.empty()) throw ValidationError("empty view name");
    if (shape.dim == 0) throw ValidationError("view " + shape.view + " has zero dim");
    if (std::find(views_.begin(), views_.end(), shape.view) != views_.end()) {
      throw ValidationError("duplicate view: " + shape.view);
    }
    views_.push_back(shape.view);
    dims_.push_back(shape.dim);
    storage_.emplace_back(capacity * shape.dim, 0.0);
  }
  slot_ids_.resize(capacity);
}

bool MemoryBank::has_view(const ViewId& view) const {
  return std::find(views_.begin(), views_.end(), view) != views_.end();
}

std::size_t MemoryBank::view_index(const ViewId& view) const {
  auto it = std::find(views_.begin(), views_.end(), view);
  if (it == views_.end()) throw ValidationError("unknown view: " + view);
  return static_cast<std::size_t>(it - views_.begin());
}

std::size_t MemoryBank::dim(const ViewId& view) const { return dims_[view_index(view)]; }

void MemoryBank::check_slot(Slot slot) const {
  if (slot >= size_) {
    throw ValidationError("slot " + std::to_string(slot) + " out of range (bank holds " +
                          std::to_string(size_) + ")");
  }
}

void MemoryBank::update(std::span<const BankEntry> batch) {
  if (batch.size() > capacity_) throw ValidationError("batch larger than bank capacity");
  // Validate everything first so a bad entry leaves the bank untouched.
  for (const auto& entry : batch) {
    for (std::size_t v = 0; v < views_.size(); ++v) {
      auto it = entry.features.find(views_[v]);
      if (it == entry.features.end()) throw ValidationError("missing view: " + views_[v]);
      if (it->second.size() != dims_[v]) throw ValidationError("dim mismatch in view " + views_[v]);
      if (!is_unit(it->second)) throw ValidationError("bank features must be unit-norm");
    }
    if (entry.features.size() != views_.size()) throw ValidationError("unknown view in batch entry");
  }
  for (const auto& entry : batch) {
    for (std::size_t v = 0; v < views_.size(); ++v) {
      const FeatureVec& f = entry.features.at(views_[v]);
      std::copy(f.begin(), f.end(), storage_[v].begin() + static_cast<std::ptrdiff_t>(cursor_ * dims_[v]));
    }
    slot_ids_[cursor_] = entry.id;
    cursor_ = (cursor_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
  }
}

std::span<const double> MemoryBank::feature(const ViewId& view, Slot slot) const {
  const std::size_t v = view_index(view);
  check_slot(slot);
  return std::span<const double>(storage_[v]).subspan(slot * dims_[v], dims_[v]);
}

const InstanceId& MemoryBank::slot_id(Slot slot) const {
  check_slot(slot);
  return slot_ids_[slot];
}

std::vector<Slot> MemoryBank::filled_slots() const {
  std::vector<Slot> out(size_);
  for (Slot t = 0; t < size_; ++t) out[t] = t;
  return out;
}

std::vector<Slot> MemoryBank::slots_of(const InstanceId& id) const {
  std::vector<Slot> out;
  for (Slot t = 0; t < size_; ++t) {
    if (slot_ids_[t] == id) out.push_back(t);
  }
  return out;
}

std::vector<ScoredSlot> MemoryBank::similarities(std::span<const double> query, const ViewId& view,
                                                 std::span<const Slot> candidates) const {
  const std::size_t v = view_index(view);
  if (query.size() != dims_[v]) throw ValidationError("query dim mismatch in view " + view);
  std::vector<ScoredSlot> scored;
  scored.reserve(candidates.size());
  for (Slot t : candidates) {
    check_slot(t);
    scored.push_back({t, dot(query, std::span<const double>(storage_[v]).subspan(t * dims_[v], dims_[v]))});
  }
  std::sort(scored.begin(), scored.end(), ranks_before);
  return scored;
}

void MemoryBank::restore(std::size_t cursor, std::size_t size, std::vector<InstanceId> slot_ids,
                         std::map<ViewId, std::vector<double>> storage) {
  if (size > capacity_ || cursor >= capacity_) throw ValidationError("bank restore: bad cursor/size");
  if (size < capacity_ && cursor != size) throw ValidationError("bank restore: cursor must equal size until full");
  if (slot_ids.size() != capacity_) throw ValidationError("bank restore: slot id count mismatch");
  if (storage.size() != views_.size()) throw ValidationError("bank restore: view count mismatch");
  std::vector<std::vector<double>> next(views_.size());
  for (std::size_t v = 0; v < views_.size(); ++v) {
    auto it = storage.find(views_[v]);
    if (it == storage.end()) throw ValidationError("bank restore: missing view " + views_[v]);
    if (it->second.size() != capacity_ * dims_[v]) throw ValidationError("bank restore: storage size mismatch");
    for (Slot t = 0; t < size; ++t) {
      if (!is_unit(std::span<const double>(it->second).subspan(t * dims_[v], dims_[v]))) {
        throw ValidationError("bank restore: non-unit feature");
      }
    }
    next[v] = std::move(it->second);
  }
  storage_ = std::move(next);
  slot_ids_ = std::move(slot_ids);
  cursor_ = cursor;
  size_ = size;
}

}  // namespace cpr
