#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpr/errors.hpp"

namespace cpr {

using ViewId = std::string;
using InstanceId = std::string;
using Slot = std::size_t;
using FeatureVec = std::vector<double>;
using ViewFeatures = std::map<ViewId, FeatureVec>;

inline constexpr double kUnitTolerance = 1e-6;

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
bool is_unit(std::span<const double> v, double tol = kUnitTolerance);
bool all_finite(std::span<const double> v);

/// Scales v to unit L2 norm. Throws ValidationError("degenerate feature") for
/// an all-zero or non-finite input.
FeatureVec normalize(std::span<const double> v);

struct InstanceRecord {
  InstanceId id;
  std::optional<int> class_label;  // evaluation only
  ViewFeatures features;
};

/// Multi-view feature dataset. Every record carries every view, and each
/// view has a single dimensionality across records.
struct Dataset {
  std::vector<ViewId> views;
  std::vector<InstanceRecord> records;

  std::size_t dim(const ViewId& view) const;
  void validate() const;
};

/// Label-free projection of a Dataset, the only form the trainer sees.
struct UnlabeledRecord {
  InstanceId id;
  ViewFeatures features;
};

struct UnlabeledDataset {
  std::vector<ViewId> views;
  std::vector<UnlabeledRecord> records;
};

UnlabeledDataset strip_labels(const Dataset& dataset);

struct BankEntry {
  InstanceId id;
  ViewFeatures features;
};

struct ScoredSlot {
  Slot slot;
  double score;

  friend bool operator==(const ScoredSlot&, const ScoredSlot&) = default;
};

// Orders by descending score, then ascending slot.
bool ranks_before(const ScoredSlot& a, const ScoredSlot& b);

/// Fixed-capacity FIFO feature queue, one queue per view, index-aligned: slot t
/// holds the same instance in every view. Single writer, many readers; const
/// members are safe to call concurrently when no update() is in flight.
class MemoryBank {
 public:
  struct ViewShape {
    ViewId view;
    std::size_t dim;
  };

  MemoryBank(std::size_t capacity, std::vector<ViewShape> views);

  // Writes the batch at the cursor, wrapping, one slot per entry in every view.
  void update(std::span<const BankEntry> batch);

  // Dot products of query against candidates in the given view, best first.
  std::vector<ScoredSlot> similarities(std::span<const double> query, const ViewId& view,
                                       std::span<const Slot> candidates) const;

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return size_; }
  std::size_t cursor() const { return cursor_; }
  bool empty() const { return size_ == 0; }

  const std::vector<ViewId>& views() const { return views_; }
  bool has_view(const ViewId& view) const;
  std::size_t dim(const ViewId& view) const;

  std::span<const double> feature(const ViewId& view, Slot slot) const;
  const InstanceId& slot_id(Slot slot) const;

  // Slots that currently hold data, ascending.
  std::vector<Slot> filled_slots() const;
  // Filled slots holding the given instance id, ascending.
  std::vector<Slot> slots_of(const InstanceId& id) const;

  // Raw state restore for checkpoints. Validates shapes and norms.
  void restore(std::size_t cursor, std::size_t size, std::vector<InstanceId> slot_ids,
               std::map<ViewId, std::vector<double>> storage);

 private:
  std::size_t view_index(const ViewId& view) const;
  void check_slot(Slot slot) const;

  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::size_t size_ = 0;
  std::vector<ViewId> views_;
  std::vector<std::size_t> dims_;
  std::vector<std::vector<double>> storage_;  // per view, capacity * dim
  std::vector<InstanceId> slot_ids_;
};

}  // namespace cpr
