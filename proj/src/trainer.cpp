#include "cpr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cpr {

void TrainSchedule::validate() const {
  if (cycles.empty()) throw ValidationError("schedule needs at least one cycle");
  for (const auto& c : cycles) {
    if (c.epochs < 1) throw ValidationError("cycle epochs must be >= 1");
    if (c.final_topk < 1) throw ValidationError("cycle final_topk must be >= 1");
    if (c.train_view.empty()) throw ValidationError("cycle needs a train view");
  }
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(ema_momentum >= 0.0 && ema_momentum < 1.0)) throw ValidationError("ema_momentum must be in [0, 1)");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning_rate must be >= 0");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ValidationError("temperature must be > 0");
  if (bank_capacity < 1) throw ValidationError("bank_capacity must be >= 1");
  if (embedding_dim < 1) throw ValidationError("embedding_dim must be >= 1");
  if (!(augment_noise >= 0.0) || !std::isfinite(augment_noise)) throw ValidationError("augment_noise must be >= 0");
}

int TrainSchedule::total_epochs() const {
  int total = 0;
  for (const auto& c : cycles) total += c.epochs;
  return total;
}

std::vector<CycleSpec> make_cycles(int num_cycles, int epochs_per_cycle, const std::vector<std::size_t>& topk,
                                   const std::vector<ViewId>& train_views) {
  if (num_cycles < 1) throw ValidationError("num_cycles must be >= 1");
  if (train_views.empty()) throw ValidationError("need at least one train view");
  if (topk.empty()) throw ValidationError("need at least one Top-k");
  if (topk.size() != 1 && topk.size() != static_cast<std::size_t>(num_cycles)) {
    throw ValidationError("topk schedule length must be 1 or num_cycles");
  }
  std::vector<CycleSpec> cycles;
  for (int c = 0; c < num_cycles; ++c) {
    const auto idx = static_cast<std::size_t>(c);
    cycles.push_back({epochs_per_cycle, topk.size() == 1 ? topk[0] : topk[idx],
                      train_views[idx % train_views.size()]});
  }
  return cycles;
}

Trainer::Trainer(UnlabeledDataset data, CascadeConfig cascade, TrainSchedule schedule, std::uint64_t seed)
    : data_(std::move(data)), cascade_(std::move(cascade)), schedule_(std::move(schedule)) {
  cascade_.validate();
  schedule_.validate();
  if (data_.records.empty()) throw ValidationError("training set is empty");
  if (data_.views.size() < 2) throw ValidationError("training needs at least two views");
  for (const auto& c : schedule_.cycles) {
    if (std::find(data_.views.begin(), data_.views.end(), c.train_view) == data_.views.end()) {
      throw ValidationError("train view not in dataset: " + c.train_view);
    }
  }
  // Resolve once up front so view mismatches surface before any work.
  for (const auto& v : data_.views) resolve_schedule(cascade_, v, data_.views);

  state_.seed = seed;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x7a1u};
  rng_.seed(seq);
  std::vector<MemoryBank::ViewShape> shapes;
  for (const auto& v : data_.views) {
    const std::size_t in_dim = data_.records.front().features.at(v).size();
    ToyEncoder live = ToyEncoder::random(in_dim, schedule_.embedding_dim, rng_);
    state_.encoders.emplace(v, EncoderSet{live, live, live});
    shapes.push_back({v, schedule_.embedding_dim});
  }
  state_.bank.emplace(schedule_.bank_capacity, std::move(shapes));
}

Trainer::Trainer(UnlabeledDataset data, CascadeConfig cascade, TrainSchedule schedule, TrainerState state)
    : data_(std::move(data)), cascade_(std::move(cascade)), schedule_(std::move(schedule)), state_(std::move(state)) {
  cascade_.validate();
  schedule_.validate();
  if (state_.cycle < 0 || static_cast<std::size_t>(state_.cycle) > schedule_.cycles.size()) {
    throw ValidationError("checkpoint position outside schedule");
  }
  if (!state_.bank || state_.bank->capacity() != schedule_.bank_capacity) {
    throw ValidationError("checkpoint bank does not match schedule capacity");
  }
  for (const auto& v : data_.views) {
    auto it = state_.encoders.find(v);
    if (it == state_.encoders.end()) throw ValidationError("checkpoint missing encoder for view " + v);
    if (it->second.live.output_dim() != schedule_.embedding_dim) {
      throw ValidationError("checkpoint encoder dim does not match schedule");
    }
  }
  std::istringstream rs(state_.rng_state);
  rs >> rng_;
  if (!rs) throw ValidationError("checkpoint rng state unreadable");
}

const MemoryBank& Trainer::bank() const { return *state_.bank; }

const TrainerState& Trainer::state() const {
  std::ostringstream os;
  os << rng_;
  state_.rng_state = os.str();
  return state_;
}

bool Trainer::finished() const { return static_cast<std::size_t>(state_.cycle) >= schedule_.cycles.size(); }

CascadeConfig Trainer::stage_config(const ViewId& query_view, std::size_t final_topk) const {
  CascadeConfig cfg = cascade_;
  cfg.final_topk = final_topk;
  return resolve_schedule(std::move(cfg), query_view, data_.views);
}

ViewFeatures encode_variant(const std::map<ViewId, EncoderSet>& encoders, const ViewFeatures& inputs,
                            const ViewId& query_view) {
  ViewFeatures out;
  for (const auto& [view, x] : inputs) {
    const auto it = encoders.find(view);
    if (it == encoders.end()) throw ValidationError("no encoder for view: " + view);
    out.emplace(view, (view == query_view ? it->second.ema : it->second.frozen).encode(x));
  }
  return out;
}

void Trainer::initialize_bank() {
  const ViewId& train_view = schedule_.cycles[std::min<std::size_t>(state_.cycle, schedule_.cycles.size() - 1)].train_view;
  MemoryBank fresh(schedule_.bank_capacity, [&] {
    std::vector<MemoryBank::ViewShape> shapes;
    for (const auto& v : data_.views) shapes.push_back({v, schedule_.embedding_dim});
    return shapes;
  }());
  std::vector<BankEntry> pending;
  auto flush = [&] {
    fresh.update(pending);
    pending.clear();
  };
  for (const auto& rec : data_.records) {
    pending.push_back({rec.id, encode_variant(state_.encoders, rec.features, train_view)});
    if (pending.size() == schedule_.bank_capacity) flush();
  }
  flush();
  state_.bank = std::move(fresh);
  state_.bank_ready = true;
}

void Trainer::begin_cycle() {
  for (auto& [view, enc] : state_.encoders) enc.frozen = enc.live;
  if (!state_.bank_ready || (schedule_.reset_bank_each_cycle && state_.cycle > 0)) initialize_bank();
}

FeatureVec Trainer::jitter(const FeatureVec& x) {
  if (schedule_.augment_noise == 0.0) return x;
  const double per_entry = schedule_.augment_noise / std::sqrt(static_cast<double>(x.size()));
  std::normal_distribution<double> gauss(0.0, per_entry);
  FeatureVec out = x;
  for (double& v : out) v += gauss(rng_);
  return normalize(out);
}

double Trainer::train_batch(std::span<const std::size_t> order, const CycleSpec& cycle, EpochLog& log) {
  const ViewId& qv = cycle.train_view;
  EncoderSet& trained = state_.encoders.at(qv);
  const MemoryBank& bank = *state_.bank;
  const CascadeConfig cfg = stage_config(qv, cycle.final_topk);

  ToyEncoder grad(trained.live.input_dim(), trained.live.output_dim());
  std::vector<BankEntry> enqueue;
  double loss_sum = 0.0;

  for (std::size_t idx : order) {
    const UnlabeledRecord& rec = data_.records[idx];
    const FeatureVec query_in = jitter(rec.features.at(qv));
    ViewFeatures variant_in;
    for (const auto& v : data_.views) variant_in.emplace(v, jitter(rec.features.at(v)));

    ViewFeatures variant = encode_variant(state_.encoders, variant_in, qv);

    const MiningResult mined = cascade_mine(variant, bank, cfg, bank.slots_of(rec.id));

    ContrastiveBatch batch;
    batch.temperature = schedule_.temperature;
    batch.positives.push_back(variant.at(qv));
    for (Slot t : mined.positives) {
      const auto f = bank.feature(qv, t);
      batch.positives.emplace_back(f.begin(), f.end());
    }
    for (Slot t : mined.negatives) {
      const auto f = bank.feature(qv, t);
      batch.negatives.emplace_back(f.begin(), f.end());
    }
    const FeatureVec raw = trained.live.project(query_in);
    const LossGrad g = mil_nce_grad_raw(raw, batch);
    trained.live.accumulate_grad(query_in, g.d_query, grad);
    loss_sum += g.loss;

    QueryTrace trace{rec.id, {}};
    for (Slot t : mined.positives) trace.positive_ids.push_back(bank.slot_id(t));
    log.queries.push_back(std::move(trace));
    enqueue.push_back({rec.id, std::move(variant)});
  }

  // Mean reduction over the batch.
  trained.live.sgd_step(grad, schedule_.learning_rate / static_cast<double>(order.size()));
  trained.ema = ema_update(trained.live, trained.ema, schedule_.ema_momentum);
  if (!trained.live.finite()) throw std::runtime_error("encoder parameters diverged");

  // A batch larger than the bank only leaves its tail behind.
  const std::size_t keep = std::min(enqueue.size(), schedule_.bank_capacity);
  state_.bank->update(std::span<const BankEntry>(enqueue).last(keep));
  return loss_sum;
}

EpochLog Trainer::run_epoch() {
  if (finished()) throw std::logic_error("training schedule already finished");
  if (state_.epoch_in_cycle == 0) begin_cycle();
  if (!state_.bank_ready) initialize_bank();
  if (state_.bank->empty()) throw ValidationError("bank not initialized");

  const CycleSpec& cycle = schedule_.cycles[static_cast<std::size_t>(state_.cycle)];
  EpochLog log;
  log.epoch = state_.epoch;
  log.cycle = state_.cycle;
  log.train_view = cycle.train_view;
  log.final_topk = cycle.final_topk;

  std::vector<std::size_t> order(data_.records.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);

  double loss_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += schedule_.batch_size) {
    const std::size_t len = std::min(schedule_.batch_size, order.size() - start);
    loss_sum += train_batch(std::span<const std::size_t>(order).subspan(start, len), cycle, log);
  }
  log.loss_mean = loss_sum / static_cast<double>(order.size());

  ++state_.epoch;
  if (++state_.epoch_in_cycle == cycle.epochs) {
    state_.epoch_in_cycle = 0;
    ++state_.cycle;
  }
  return log;
}

std::vector<EpochLog> Trainer::run(const std::function<void(const EpochLog&)>& on_epoch) {
  std::vector<EpochLog> logs;
  while (!finished()) {
    logs.push_back(run_epoch());
    if (on_epoch) on_epoch(logs.back());
  }
  return logs;
}

}  // namespace cpr
