#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cpr/cascade_miner.hpp"
#include "cpr/evaluator.hpp"
#include "cpr/synthetic.hpp"
#include "cpr/trainer.hpp"

namespace cpr {

struct SweepAxis {
  std::string key;  // "section.key"
  std::vector<std::string> values;
};

/// Everything one run needs. Loaded from an INI file:
///
///   [run]        seed, out, dataset, test_dataset, eval_ks, eval_view
///   [synthetic]  num_classes, instances_per_class, test_instances_per_class,
///                views, dim, noise, confusable_offset, nuisance_rank,
///                nuisance_scale, confusable (view:a-b, comma-separated)
///   [cascade]    num_stages, selection_ratio, view_schedule
///   [train]      cycles, epochs_per_cycle, topk_schedule, train_views,
///                batch_size, ema_momentum, learning_rate, temperature,
///                bank_capacity, embedding_dim, augment_noise,
///                reset_bank_each_cycle
///   [sweep]      section.key = v1 | v2 | ...
///
/// Lists are comma-separated. Unknown sections or keys are rejected.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out = "cpr_out";
  std::string dataset;       // empty: generate from [synthetic]
  std::string test_dataset;  // empty: generate a held-out split from [synthetic]
  std::vector<std::size_t> eval_ks = kDefaultRecallKs;
  ViewId eval_view;  // empty: first train view

  SyntheticSpec synthetic;
  int test_instances_per_class = 6;

  CascadeConfig cascade;

  int cycles = 1;
  int epochs_per_cycle = 1;
  std::vector<std::size_t> topk_schedule{5};
  std::vector<ViewId> train_views;  // empty: all dataset views in order
  TrainSchedule train;              // cycles filled in by schedule()

  std::vector<SweepAxis> sweep;

  void validate() const;

  // Builds the cycle list against the dataset's views.
  TrainSchedule schedule(const std::vector<ViewId>& dataset_views) const;
  ViewId resolved_eval_view(const std::vector<ViewId>& dataset_views) const;

  // Sets one "section.key" from its text form. Throws ValidationError for
  // unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);

  // Every key in canonical order with its current text form.
  Provenance provenance() const;
  // INI text that parses back to this config (sweep included).
  std::string to_ini() const;
};

RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::filesystem::path& path);

struct SweepPoint {
  std::string name;  // run directory name, "base" when there is no sweep
  RunConfig config;  // sweep cleared, axis values applied
};

// Cartesian product of the sweep axes in declaration order.
std::vector<SweepPoint> expand_sweep(const RunConfig& config);

}  // namespace cpr
