#include "cpr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace cpr {
namespace {

// Union-find over classes for one view's confusable pairs.
std::vector<int> prototype_groups(const SyntheticSpec& spec, const ViewId& view) {
  std::vector<int> parent(static_cast<std::size_t>(spec.num_classes));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int c) {
    while (parent[static_cast<std::size_t>(c)] != c) c = parent[static_cast<std::size_t>(c)];
    return c;
  };
  for (const auto& pair : spec.confusable) {
    if (pair.view != view) continue;
    const int a = find(pair.class_a), b = find(pair.class_b);
    parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }
  std::vector<int> group(parent.size());
  for (int c = 0; c < spec.num_classes; ++c) group[static_cast<std::size_t>(c)] = find(c);
  return group;
}

std::string instance_id(std::uint64_t split, int cls, int k) {
  std::string id = split == 0 ? "" : "s" + std::to_string(split) + "_";
  return id + "c" + std::to_string(cls) + "_i" + std::to_string(k);
}

}  // namespace

void SyntheticSpec::validate() const {
  if (num_classes < 1) throw ValidationError("num_classes must be >= 1");
  if (instances_per_class < 1) throw ValidationError("instances_per_class must be >= 1");
  if (dim < 1) throw ValidationError("dim must be >= 1");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ValidationError("noise must be finite and >= 0");
  if (!(confusable_offset >= 0.0) || !std::isfinite(confusable_offset)) {
    throw ValidationError("confusable_offset must be finite and >= 0");
  }
  if (nuisance_rank > dim) throw ValidationError("nuisance_rank must be <= dim");
  if (!(nuisance_scale >= 0.0) || !std::isfinite(nuisance_scale)) {
    throw ValidationError("nuisance_scale must be finite and >= 0");
  }
  if (views.empty()) throw ValidationError("synthetic spec needs at least one view");
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (views[i].empty()) throw ValidationError("empty view name");
    if (std::find(views.begin() + static_cast<std::ptrdiff_t>(i) + 1, views.end(), views[i]) != views.end()) {
      throw ValidationError("duplicate view: " + views[i]);
    }
  }
  for (const auto& pair : confusable) {
    if (std::find(views.begin(), views.end(), pair.view) == views.end()) {
      throw ValidationError("confusable pair names unknown view: " + pair.view);
    }
    for (int c : {pair.class_a, pair.class_b}) {
      if (c < 0 || c >= num_classes) {
        throw ValidationError("confusable pair names unknown class: " + std::to_string(c));
      }
    }
    if (pair.class_a == pair.class_b) {
      throw ValidationError("confusable pair repeats class " + std::to_string(pair.class_a));
    }
  }
  // Complementary views: any two classes sharing a prototype in one view must
  // differ in at least one other view.
  std::vector<std::vector<int>> groups;
  for (const auto& v : views) groups.push_back(prototype_groups(*this, v));
  for (int a = 0; a < num_classes; ++a) {
    for (int b = a + 1; b < num_classes; ++b) {
      bool separable = false;
      bool confused = false;
      for (const auto& g : groups) {
        const bool same = g[static_cast<std::size_t>(a)] == g[static_cast<std::size_t>(b)];
        confused = confused || same;
        separable = separable || !same;
      }
      if (confused && !separable) {
        throw ValidationError("classes " + std::to_string(a) + " and " + std::to_string(b) +
                              " are confusable in every view");
      }
    }
  }
}

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed, std::uint64_t split) {
  spec.validate();
  std::seed_seq proto_seed{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x9e37u};
  std::mt19937_64 proto_rng(proto_seed);
  std::seed_seq offset_seed{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x0ff5u};
  std::mt19937_64 offset_rng(offset_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // prototypes[view][class]
  std::vector<std::vector<FeatureVec>> prototypes;
  for (const auto& view : spec.views) {
    const auto group = prototype_groups(spec, view);
    std::vector<FeatureVec> by_group(static_cast<std::size_t>(spec.num_classes));
    std::vector<FeatureVec> per_class(static_cast<std::size_t>(spec.num_classes));
    for (int c = 0; c < spec.num_classes; ++c) {
      FeatureVec raw(spec.dim);
      for (double& x : raw) x = gauss(proto_rng);
      by_group[static_cast<std::size_t>(c)] = normalize(raw);
    }
    for (int c = 0; c < spec.num_classes; ++c) {
      const auto g = static_cast<std::size_t>(group[static_cast<std::size_t>(c)]);
      FeatureVec proto = by_group[g];
      FeatureVec dir(spec.dim);
      for (double& x : dir) x = gauss(offset_rng);
      const bool shared = std::count(group.begin(), group.end(), group[static_cast<std::size_t>(c)]) > 1;
      if (shared && spec.confusable_offset > 0.0) {
        dir = normalize(dir);
        for (std::size_t i = 0; i < spec.dim; ++i) proto[i] += spec.confusable_offset * dir[i];
        proto = normalize(proto);
      }
      per_class[static_cast<std::size_t>(c)] = std::move(proto);
    }
    prototypes.push_back(std::move(per_class));
  }

  // nuisance[view][basis vector]
  std::vector<std::vector<FeatureVec>> nuisance(spec.views.size());
  for (auto& basis : nuisance) {
    for (std::size_t r = 0; r < spec.nuisance_rank; ++r) {
      FeatureVec dir(spec.dim);
      for (double& x : dir) x = gauss(offset_rng);
      basis.push_back(normalize(dir));
    }
  }

  std::seed_seq noise_seed{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                           static_cast<std::uint32_t>(split), static_cast<std::uint32_t>(split >> 32), 0x5eedu};
  std::mt19937_64 noise_rng(noise_seed);
  const double per_entry = spec.noise / std::sqrt(static_cast<double>(spec.dim));

  Dataset ds;
  ds.views = spec.views;
  for (int c = 0; c < spec.num_classes; ++c) {
    for (int k = 0; k < spec.instances_per_class; ++k) {
      InstanceRecord rec{instance_id(split, c, k), c, {}};
      for (std::size_t v = 0; v < spec.views.size(); ++v) {
        FeatureVec f = prototypes[v][static_cast<std::size_t>(c)];
        if (per_entry > 0.0) {
          for (double& x : f) x += per_entry * gauss(noise_rng);
        }
        for (const auto& dir : nuisance[v]) {
          const double coef = spec.nuisance_scale * gauss(noise_rng);
          for (std::size_t i = 0; i < spec.dim; ++i) f[i] += coef * dir[i];
        }
        rec.features.emplace(spec.views[v], normalize(f));
      }
      ds.records.push_back(std::move(rec));
    }
  }
  return ds;
}

}  // namespace cpr
