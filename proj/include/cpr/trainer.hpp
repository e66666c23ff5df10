#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cpr/cascade_miner.hpp"
#include "cpr/contrastive_loss.hpp"
#include "cpr/encoder.hpp"
#include "cpr/feature_store.hpp"

namespace cpr {

struct CycleSpec {
  int epochs = 1;
  std::size_t final_topk = 5;  // Top-k of the last cascade stage during this cycle
  ViewId train_view;

  friend bool operator==(const CycleSpec&, const CycleSpec&) = default;
};

struct TrainSchedule {
  std::vector<CycleSpec> cycles;
  std::size_t batch_size = 16;
  double ema_momentum = 0.999;
  double learning_rate = 0.1;
  double temperature = kDefaultTemperature;
  std::size_t bank_capacity = 2048;
  std::size_t embedding_dim = 16;
  double augment_noise = 0.05;  // expected L2 norm of the jitter that makes q and q+
  bool reset_bank_each_cycle = false;

  void validate() const;
  int total_epochs() const;
};

// Cycles alternating over train_views (co-training), with one Top-k per cycle.
// A single-entry topk list is reused for every cycle.
std::vector<CycleSpec> make_cycles(int num_cycles, int epochs_per_cycle, const std::vector<std::size_t>& topk,
                                   const std::vector<ViewId>& train_views);

struct QueryTrace {
  InstanceId query_id;
  std::vector<InstanceId> positive_ids;  // mined positives best first, q+ not included
};

struct EpochLog {
  int epoch = 0;  // 0-based over the whole run
  int cycle = 0;
  ViewId train_view;
  std::size_t final_topk = 0;
  double loss_mean = 0.0;
  std::vector<QueryTrace> queries;
};

struct EncoderSet {
  ToyEncoder live;
  ToyEncoder ema;
  ToyEncoder frozen;  // snapshot of `live` at the start of the current cycle

  friend bool operator==(const EncoderSet&, const EncoderSet&) = default;
};

// Embeds one instance the way the bank sees it while `query_view` trains:
// the EMA encoder in that view, the frozen encoders elsewhere.
ViewFeatures encode_variant(const std::map<ViewId, EncoderSet>& encoders, const ViewFeatures& inputs,
                            const ViewId& query_view);

/// Serializable trainer state: schedule position, parameters, bank and RNG.
struct TrainerState {
  std::uint64_t seed = 0;
  int cycle = 0;           // index into the schedule's cycles
  int epoch_in_cycle = 0;  // epochs already run in `cycle`
  int epoch = 0;           // epochs already run overall
  bool bank_ready = false;
  std::string rng_state;
  std::map<ViewId, EncoderSet> encoders;
  std::optional<MemoryBank> bank;
};

/// Progressive multi-view contrastive training with cascade-mined positives.
/// Per batch: the live encoder of the training view embeds the query; the
/// positive variant q+ is embedded by that view's EMA encoder and by the
/// frozen encoders of the other views; q+ drives cascade mining against the
/// bank; MIL-NCE over {q+} plus the mined slots against the remaining bank
/// updates the live encoder by SGD; then the EMA encoder follows and q+ is
/// enqueued in every view. The trainer never sees class labels.
class Trainer {
 public:
  Trainer(UnlabeledDataset data, CascadeConfig cascade, TrainSchedule schedule, std::uint64_t seed);
  Trainer(UnlabeledDataset data, CascadeConfig cascade, TrainSchedule schedule, TrainerState state);

  // Encodes one pass over the dataset into the bank. Called automatically by
  // run_epoch() if the bank is not ready.
  void initialize_bank();

  bool finished() const;
  EpochLog run_epoch();
  std::vector<EpochLog> run(const std::function<void(const EpochLog&)>& on_epoch = {});

  const MemoryBank& bank() const;
  bool bank_ready() const { return state_.bank_ready; }
  const std::map<ViewId, EncoderSet>& encoders() const { return state_.encoders; }
  const TrainerState& state() const;
  const TrainSchedule& schedule() const { return schedule_; }
  const CascadeConfig& cascade() const { return cascade_; }

  // Cascade for a query in `query_view` with the given final Top-k.
  CascadeConfig stage_config(const ViewId& query_view, std::size_t final_topk) const;

 private:
  void begin_cycle();
  FeatureVec jitter(const FeatureVec& x);
  double train_batch(std::span<const std::size_t> order, const CycleSpec& cycle, EpochLog& log);

  UnlabeledDataset data_;
  CascadeConfig cascade_;
  TrainSchedule schedule_;
  mutable TrainerState state_;
  std::mt19937_64 rng_;
};

}  // namespace cpr
