#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cpr/checkpoint.hpp"
#include "cpr/contrastive_loss.hpp"
#include "cpr/evaluator.hpp"
#include "cpr/synthetic.hpp"
#include "cpr/trainer.hpp"
#include "test_support.hpp"

using namespace cpr;

namespace {

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.num_classes = 4;
  s.instances_per_class = 6;
  s.dim = 8;
  s.noise = 0.3;
  s.confusable = {{"rgb", 0, 1}, {"flow", 2, 3}};
  return s;
}

TrainSchedule small_schedule(int cycles = 1, int epochs = 1) {
  TrainSchedule s;
  s.cycles = make_cycles(cycles, epochs, {3}, {"rgb", "flow"});
  s.batch_size = 5;
  s.ema_momentum = 0.9;
  s.learning_rate = 0.5;
  s.bank_capacity = 24;
  s.embedding_dim = 8;
  s.augment_noise = 0.05;
  return s;
}

CascadeConfig cascade(int n, double r = 0.5) { return CascadeConfig{n, r, {}, 3}; }

bool same_logs(const std::vector<EpochLog>& a, const std::vector<EpochLog>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].loss_mean != b[i].loss_mean || a[i].queries.size() != b[i].queries.size()) return false;
    for (std::size_t q = 0; q < a[i].queries.size(); ++q) {
      if (a[i].queries[q].query_id != b[i].queries[q].query_id) return false;
      if (a[i].queries[q].positive_ids != b[i].queries[q].positive_ids) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("ema_update") {
  std::mt19937_64 rng(31);
  const ToyEncoder live = ToyEncoder::random(4, 3, rng);
  const ToyEncoder ema = ToyEncoder::random(4, 3, rng);

  CHECK(ema_update(live, ema, 0.0) == live);

  const double eps = 1e-6;
  const auto nudged = ema_update(live, ema, 1.0 - eps);
  CHECK(parameter_distance(nudged, ema) <= eps * parameter_distance(live, ema) * (1 + 1e-9));

  // 1000 steps towards a fixed target shrink the gap by momentum^1000.
  ToyEncoder tracked = ema;
  for (int i = 0; i < 1000; ++i) tracked = ema_update(live, tracked, 0.999);
  const double ratio = parameter_distance(tracked, live) / parameter_distance(ema, live);
  CHECK(ratio == doctest::Approx(std::pow(0.999, 1000)).epsilon(1e-9));
  CHECK(ratio == doctest::Approx(0.3677).epsilon(1e-3));

  CHECK_THROWS_AS(ema_update(live, ToyEncoder(3, 3), 0.5), ValidationError);
  CHECK_THROWS_AS(ema_update(live, ema, 1.0), ValidationError);
}

TEST_CASE("encoder parameter gradient agrees with finite differences") {
  std::mt19937_64 rng(32);
  ToyEncoder enc = ToyEncoder::random(6, 5, rng);
  for (double& b : enc.bias()) b = 0.1;
  ContrastiveBatch batch;
  batch.temperature = 0.07;
  batch.positives = {oracle::random_unit(rng, 5), oracle::random_unit(rng, 5)};
  for (int i = 0; i < 12; ++i) batch.negatives.push_back(oracle::random_unit(rng, 5));
  const FeatureVec x = oracle::random_unit(rng, 6);

  const auto g = mil_nce_grad_raw(enc.project(x), batch);
  ToyEncoder grad(6, 5);
  enc.accumulate_grad(x, g.d_query, grad);

  auto loss_with = [&](const ToyEncoder& e) {
    ContrastiveBatch c = batch;
    c.query = e.encode(x);
    return mil_nce(c);
  };
  const double h = 1e-5;
  double diff = 0.0, norm = 0.0;
  for (std::size_t k = 0; k < enc.weights().size(); ++k) {
    ToyEncoder hi = enc, lo = enc;
    hi.weights()[k] += h;
    lo.weights()[k] -= h;
    const double fd = (loss_with(hi) - loss_with(lo)) / (2 * h);
    diff += std::pow(fd - grad.weights()[k], 2);
    norm += std::pow(grad.weights()[k], 2);
  }
  for (std::size_t k = 0; k < enc.bias().size(); ++k) {
    ToyEncoder hi = enc, lo = enc;
    hi.bias()[k] += h;
    lo.bias()[k] -= h;
    const double fd = (loss_with(hi) - loss_with(lo)) / (2 * h);
    diff += std::pow(fd - grad.bias()[k], 2);
    norm += std::pow(grad.bias()[k], 2);
  }
  CHECK(std::sqrt(diff) / std::sqrt(norm) <= 1e-4);
}

TEST_CASE("generate_synthetic") {
  SyntheticSpec spec;
  SUBCASE("default size mirrors ten classes of eighteen") {
    const auto ds = generate_synthetic(spec, 1);
    CHECK(ds.records.size() == 180);
    CHECK(ds.views == std::vector<ViewId>{"rgb", "flow"});
    CHECK(class_sizes(ds).size() == 10);
    for (const auto& rec : ds.records) {
      for (const auto& [v, f] : rec.features) CHECK(is_unit(f));
    }
  }
  SUBCASE("zero noise makes classes collapse to their prototypes") {
    spec.noise = 0.0;
    const auto ds = generate_synthetic(spec, 2);
    for (const auto& rec : ds.records) {
      const auto& first = ds.records[static_cast<std::size_t>(*rec.class_label) * 18];
      CHECK(rec.features == first.features);
    }
    // Confusable pair 0/1 shares the rgb prototype but not the flow one.
    CHECK(ds.records[0].features.at("rgb") == ds.records[18].features.at("rgb"));
    CHECK(ds.records[0].features.at("flow") != ds.records[18].features.at("flow"));
    CHECK(ds.records[4 * 18].features.at("flow") == ds.records[5 * 18].features.at("flow"));
  }
  SUBCASE("deterministic per seed, splits share prototypes") {
    const auto a = generate_synthetic(spec, 5), b = generate_synthetic(spec, 5);
    for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(a.records[i].features == b.records[i].features);
    CHECK(generate_synthetic(spec, 6).records[0].features != a.records[0].features);
    spec.noise = 0.0;
    const auto train = generate_synthetic(spec, 5, 0), held = generate_synthetic(spec, 5, 1);
    CHECK(train.records[0].features == held.records[0].features);
    CHECK(held.records[0].id == "s1_c0_i0");
  }
  SUBCASE("offset separates confusable prototypes by a small margin") {
    spec.noise = 0.0;
    spec.confusable_offset = 0.1;
    const auto ds = generate_synthetic(spec, 2);
    const double sim = dot(ds.records[0].features.at("rgb"), ds.records[18].features.at("rgb"));
    CHECK(sim < 1.0 - 1e-6);
    CHECK(sim > 0.9);
    // Classes outside any pair keep the offset-free prototype.
    spec.confusable_offset = 0.0;
    CHECK(generate_synthetic(spec, 2).records[8 * 18].features == ds.records[8 * 18].features);
  }
  SUBCASE("nuisance adds class-independent variation in a low-rank subspace") {
    spec.noise = 0.0;
    spec.nuisance_rank = 2;
    spec.nuisance_scale = 1.0;
    const auto ds = generate_synthetic(spec, 3);
    CHECK(ds.records[0].features != ds.records[1].features);
    spec.nuisance_rank = 17;
    CHECK_THROWS_AS(generate_synthetic(spec, 3), ValidationError);
    spec.nuisance_rank = 2;
    spec.nuisance_scale = -1.0;
    CHECK_THROWS_AS(generate_synthetic(spec, 3), ValidationError);
  }
  SUBCASE("inconsistent confusability maps are rejected") {
    spec.confusable = {{"rgb", 0, 12}};
    CHECK_THROWS_WITH_AS(generate_synthetic(spec, 1), doctest::Contains("unknown class: 12"), ValidationError);
    spec.confusable = {{"rgb", 0, 1}, {"flow", 0, 1}};
    CHECK_THROWS_WITH_AS(generate_synthetic(spec, 1), doctest::Contains("every view"), ValidationError);
    spec.confusable = {{"rgb", 0, 1}, {"rgb", 1, 2}, {"flow", 0, 2}};
    CHECK_THROWS_AS(generate_synthetic(spec, 1), ValidationError);  // 0~2 through 1 in rgb
    spec.confusable = {{"depth", 0, 1}};
    CHECK_THROWS_AS(generate_synthetic(spec, 1), ValidationError);
    spec.confusable = {{"rgb", 3, 3}};
    CHECK_THROWS_AS(generate_synthetic(spec, 1), ValidationError);
  }
}

TEST_CASE("make_cycles alternates views and expands Top-k") {
  const auto cycles = make_cycles(5, 2, {1, 2, 3, 4, 5}, {"rgb", "flow"});
  REQUIRE(cycles.size() == 5);
  CHECK(cycles[0] == CycleSpec{2, 1, "rgb"});
  CHECK(cycles[1] == CycleSpec{2, 2, "flow"});
  CHECK(cycles[4] == CycleSpec{2, 5, "rgb"});
  CHECK(make_cycles(3, 1, {7}, {"rgb"})[2] == CycleSpec{1, 7, "rgb"});
  CHECK_THROWS_AS(make_cycles(3, 1, {1, 2}, {"rgb"}), ValidationError);
}

TEST_CASE("training is deterministic per seed") {
  const auto data = strip_labels(generate_synthetic(small_spec(), 3));
  Trainer a(data, cascade(3), small_schedule(2, 2), 99);
  Trainer b(data, cascade(3), small_schedule(2, 2), 99);
  const auto la = a.run(), lb = b.run();
  CHECK(same_logs(la, lb));
  CHECK(a.encoders() == b.encoders());
  Trainer c(data, cascade(3), small_schedule(2, 2), 100);
  CHECK_FALSE(same_logs(la, c.run()));
}

TEST_CASE("zero learning rate leaves the live encoders untouched") {
  const auto labeled = generate_synthetic(small_spec(), 4);
  auto sched = small_schedule(2, 2);
  sched.cycles = make_cycles(2, 2, {3}, {"rgb"});
  sched.learning_rate = 0.0;
  sched.augment_noise = 0.0;
  // One batch per epoch so every query mines against the same full bank.
  sched.batch_size = 24;
  Trainer t(strip_labels(labeled), cascade(3), sched, 5);
  const auto before = t.encoders();
  const auto logs = t.run();
  for (const auto& [view, enc] : t.encoders()) CHECK(enc.live == before.at(view).live);
  const auto labels = label_map(labeled);
  const auto sizes = class_sizes(labeled);
  const double first = summarize_epoch(logs.front(), labels, sizes).pmr_mean;
  for (const auto& log : logs) CHECK(summarize_epoch(log, labels, sizes).pmr_mean == doctest::Approx(first).epsilon(1e-12));
}

TEST_CASE("an epoch changes only the training view's live and EMA encoders") {
  const auto data = strip_labels(generate_synthetic(small_spec(), 6));
  Trainer t(data, cascade(2), small_schedule(2, 1), 7);
  t.initialize_bank();
  const auto before = t.encoders();
  const auto log = t.run_epoch();
  CHECK(log.train_view == "rgb");
  const auto& after = t.encoders();
  CHECK(after.at("rgb").live != before.at("rgb").live);
  CHECK(after.at("rgb").ema != before.at("rgb").ema);
  CHECK(after.at("rgb").frozen == before.at("rgb").live);
  CHECK(after.at("flow") == before.at("flow"));

  const auto second = t.run_epoch();
  CHECK(second.train_view == "flow");
  CHECK(t.encoders().at("rgb").live == after.at("rgb").live);
  CHECK(t.encoders().at("flow").frozen == before.at("flow").live);
  CHECK(t.finished());
  CHECK_THROWS_AS(t.run_epoch(), std::logic_error);
}

TEST_CASE("bank holds the last capacity variants in enqueue order") {
  const auto data = strip_labels(generate_synthetic(small_spec(), 8));
  auto sched = small_schedule(1, 2);
  sched.bank_capacity = 10;
  Trainer t(data, cascade(2), sched, 9);
  t.run_epoch();
  const auto log = t.run_epoch();
  const auto& bank = t.bank();
  REQUIRE(bank.size() == 10);
  const std::size_t n = log.queries.size();
  for (std::size_t i = 0; i < 10; ++i) {
    const Slot slot = (bank.cursor() + i) % 10;
    CHECK(bank.slot_id(slot) == log.queries[n - 10 + i].query_id);
  }
}

TEST_CASE("one-stage training ignores the selection ratio") {
  const auto data = strip_labels(generate_synthetic(small_spec(), 10));
  Trainer a(data, cascade(1, 0.5), small_schedule(2, 1), 11);
  Trainer b(data, cascade(1, 0.8), small_schedule(2, 1), 11);
  CHECK(same_logs(a.run(), b.run()));
}

TEST_CASE("self never appears among mined positives") {
  const auto data = strip_labels(generate_synthetic(small_spec(), 12));
  Trainer t(data, cascade(3), small_schedule(1, 2), 13);
  for (const auto& log : t.run()) {
    for (const auto& q : log.queries) {
      CHECK(std::find(q.positive_ids.begin(), q.positive_ids.end(), q.query_id) == q.positive_ids.end());
      CHECK(q.positive_ids.size() == 3);
    }
  }
}

TEST_CASE("trainer validation") {
  const auto data = strip_labels(generate_synthetic(small_spec(), 14));
  auto sched = small_schedule();
  sched.cycles[0].train_view = "depth";
  CHECK_THROWS_AS(Trainer(data, cascade(2), sched, 1), ValidationError);
  CascadeConfig bad_view{2, 0.5, {"rgb", "depth"}, 3};
  CHECK_THROWS_AS(Trainer(data, bad_view, small_schedule(), 1), ValidationError);
  UnlabeledDataset one_view = data;
  one_view.views = {"rgb"};
  CHECK_THROWS_AS(Trainer(one_view, cascade(2), small_schedule(), 1), ValidationError);
  sched = small_schedule();
  sched.ema_momentum = 1.0;
  CHECK_THROWS_AS(Trainer(data, cascade(2), sched, 1), ValidationError);
}

TEST_CASE("checkpoint round trip resumes bit-identically") {
  const auto data = strip_labels(generate_synthetic(small_spec(), 15));
  Trainer straight(data, cascade(3), small_schedule(2, 2), 16);
  const auto all = straight.run();

  Trainer first(data, cascade(3), small_schedule(2, 2), 16);
  std::vector<EpochLog> resumed{first.run_epoch()};
  std::stringstream file;
  write_checkpoint(file, first.state());
  TrainerState state = read_checkpoint(file);
  CHECK(state.encoders == first.state().encoders);
  CHECK(state.epoch == 1);

  Trainer second(data, cascade(3), small_schedule(2, 2), std::move(state));
  while (!second.finished()) resumed.push_back(second.run_epoch());
  CHECK(same_logs(all, resumed));
  CHECK(second.encoders() == straight.encoders());

  std::stringstream again;
  write_checkpoint(again, second.state());
  std::stringstream ref;
  write_checkpoint(ref, straight.state());
  CHECK(again.str() == ref.str());
}

TEST_CASE("checkpoint rejects bad input") {
  std::istringstream wrong_version("cpr-checkpoint 99\n");
  CHECK_THROWS_WITH_AS(read_checkpoint(wrong_version), doctest::Contains("version"), ValidationError);
  std::istringstream garbage("hello\n");
  CHECK_THROWS_AS(read_checkpoint(garbage), ValidationError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.txt"), ValidationError);
}
