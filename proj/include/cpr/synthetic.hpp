#pragma once

#include <cstdint>
#include <vector>

#include "cpr/feature_store.hpp"

namespace cpr {

struct ConfusablePair {
  ViewId view;
  int class_a = 0;
  int class_b = 0;
};

/// Desk-scale stand-in for multi-view video features. Each class has one
/// random unit prototype per view; classes linked by a confusable pair in a
/// view share that view's prototype, up to a small class-specific offset
/// of norm `confusable_offset`. Every pair that is confused in one view
/// must stay separable in some other view. The optional nuisance subspace
/// is class-independent variation that an encoder has to learn to ignore.
struct SyntheticSpec {
  int num_classes = 10;
  int instances_per_class = 18;
  std::vector<ViewId> views{"rgb", "flow"};
  std::size_t dim = 16;
  double noise = 0.35;  // expected L2 norm of the per-instance perturbation
  double confusable_offset = 0.0;
  // Per-view structured nuisance: a random subspace of this rank shared by all
  // classes, with per-instance Gaussian coefficients of this scale.
  std::size_t nuisance_rank = 0;
  double nuisance_scale = 0.0;
  std::vector<ConfusablePair> confusable{{"rgb", 0, 1}, {"rgb", 2, 3}, {"flow", 4, 5}, {"flow", 6, 7}};

  void validate() const;
};

// Deterministic in (spec, seed, split). Prototypes depend on the seed only, so
// splits drawn with the same seed share class structure and differ in noise.
// Ids are "c<class>_i<k>" for split 0 and "s<split>_c<class>_i<k>" otherwise.
Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed, std::uint64_t split = 0);

}  // namespace cpr
