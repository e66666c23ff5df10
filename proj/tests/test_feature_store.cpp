#include <doctest.h>

#include <sstream>

#include "cpr/feature_file.hpp"
#include "cpr/feature_store.hpp"
#include "test_support.hpp"

using namespace cpr;

namespace {

MemoryBank two_view_bank(std::size_t capacity) {
  return MemoryBank(capacity, {{"rgb", 2}, {"flow", 2}});
}

BankEntry entry(const std::string& id, double angle) {
  return {id, {{"rgb", {std::cos(angle), std::sin(angle)}}, {"flow", {std::sin(angle), std::cos(angle)}}}};
}

}  // namespace

TEST_CASE("normalize scales to unit length") {
  const auto v = normalize(FeatureVec{3, 4});
  CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(normalize(FeatureVec{1, 0, 0}) == FeatureVec{1, 0, 0});
  CHECK_THROWS_WITH_AS(normalize(FeatureVec{0, 0}), "degenerate feature", ValidationError);
  CHECK_THROWS_AS(normalize(FeatureVec{1, NAN}), ValidationError);
}

TEST_CASE("bank_update writes FIFO with wraparound") {
  MemoryBank bank = two_view_bank(4);
  std::vector<BankEntry> first{entry("x", 0.1), entry("y", 0.2)};
  bank.update(first);
  REQUIRE(bank.cursor() == 2);

  std::vector<BankEntry> batch{entry("a", 0.3), entry("b", 0.4), entry("c", 0.5)};
  bank.update(batch);
  CHECK(bank.slot_id(2) == "a");
  CHECK(bank.slot_id(3) == "b");
  CHECK(bank.slot_id(0) == "c");
  CHECK(bank.slot_id(1) == "y");
  CHECK(bank.cursor() == 1);
  CHECK(bank.size() == 4);
  // Alignment: slot 0 holds c in both views.
  CHECK(bank.feature("rgb", 0)[0] == doctest::Approx(std::cos(0.5)));
  CHECK(bank.feature("flow", 0)[0] == doctest::Approx(std::sin(0.5)));
}

TEST_CASE("bank_update edge cases") {
  MemoryBank bank = two_view_bank(4);
  std::vector<BankEntry> one{entry("x", 0.1)};
  bank.update(one);

  SUBCASE("empty batch is a no-op") {
    bank.update({});
    CHECK(bank.cursor() == 1);
    CHECK(bank.size() == 1);
    CHECK(bank.slot_id(0) == "x");
  }
  SUBCASE("missing view") {
    std::vector<BankEntry> bad{{"z", {{"rgb", {1.0, 0.0}}}}};
    CHECK_THROWS_WITH_AS(bank.update(bad), doctest::Contains("missing view"), ValidationError);
    CHECK(bank.size() == 1);
  }
  SUBCASE("dim mismatch") {
    std::vector<BankEntry> bad{{"z", {{"rgb", {1.0, 0.0, 0.0}}, {"flow", {1.0, 0.0}}}}};
    CHECK_THROWS_WITH_AS(bank.update(bad), doctest::Contains("dim mismatch"), ValidationError);
  }
  SUBCASE("non-unit vectors rejected") {
    std::vector<BankEntry> bad{{"z", {{"rgb", {2.0, 0.0}}, {"flow", {1.0, 0.0}}}}};
    CHECK_THROWS_AS(bank.update(bad), ValidationError);
  }
  SUBCASE("oversized batch rejected") {
    std::vector<BankEntry> big(5, entry("q", 0.0));
    CHECK_THROWS_AS(bank.update(big), ValidationError);
  }
  SUBCASE("extra view rejected") {
    auto e = entry("z", 0.2);
    e.features.emplace("depth", FeatureVec{1.0, 0.0});
    std::vector<BankEntry> bad{e};
    CHECK_THROWS_AS(bank.update(bad), ValidationError);
  }
}

TEST_CASE("index alignment and FIFO hold over random update sequences") {
  std::mt19937_64 rng(7);
  const std::size_t capacity = 13;
  MemoryBank bank(capacity, {{"rgb", 3}, {"flow", 5}});
  std::vector<std::string> expected(capacity);
  std::map<std::string, std::pair<FeatureVec, FeatureVec>> written;
  std::size_t total = 0, counter = 0;
  for (int round = 0; round < 40; ++round) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, capacity)(rng);
    std::vector<BankEntry> batch;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = "i" + std::to_string(counter++);
      auto rgb = oracle::random_unit(rng, 3);
      auto flow = oracle::random_unit(rng, 5);
      written[id] = {rgb, flow};
      batch.push_back({id, {{"rgb", rgb}, {"flow", flow}}});
      expected[(total + i) % capacity] = id;
    }
    bank.update(batch);
    total += n;
    CHECK(bank.cursor() == total % capacity);
    for (Slot t = 0; t < bank.size(); ++t) {
      REQUIRE(bank.slot_id(t) == expected[t]);
      const auto& [rgb, flow] = written.at(expected[t]);
      CHECK(std::equal(rgb.begin(), rgb.end(), bank.feature("rgb", t).begin()));
      CHECK(std::equal(flow.begin(), flow.end(), bank.feature("flow", t).begin()));
    }
  }
}

TEST_CASE("capacity insertions overwrite every slot exactly once") {
  MemoryBank bank = two_view_bank(5);
  std::vector<BankEntry> seed{entry("a", 0.0), entry("b", 0.1), entry("c", 0.2)};
  bank.update(seed);
  std::vector<BankEntry> fill{entry("d", 0.3), entry("e", 0.4)};
  bank.update(fill);
  std::vector<BankEntry> next;
  for (int i = 0; i < 5; ++i) next.push_back(entry("n" + std::to_string(i), 0.5 + i));
  std::set<std::string> before;
  for (Slot t = 0; t < 5; ++t) before.insert(bank.slot_id(t));
  bank.update(next);
  std::set<std::string> after;
  for (Slot t = 0; t < 5; ++t) after.insert(bank.slot_id(t));
  CHECK(after == std::set<std::string>{"n0", "n1", "n2", "n3", "n4"});
  CHECK(bank.cursor() == 0);
}

TEST_CASE("similarities rank by score then slot") {
  MemoryBank bank(2, {{"rgb", 2}});
  std::vector<BankEntry> batch{{"a", {{"rgb", {1.0, 0.0}}}}, {"b", {{"rgb", {0.0, 1.0}}}}};
  bank.update(batch);
  const FeatureVec q{1.0, 0.0};
  std::vector<Slot> all{0, 1};
  CHECK(bank.similarities(q, "rgb", all) == std::vector<ScoredSlot>{{0, 1.0}, {1, 0.0}});
  CHECK(bank.similarities(q, "rgb", {}).empty());
  CHECK_THROWS_WITH_AS(bank.similarities(q, "flow", all), doctest::Contains("unknown view"), ValidationError);

  SUBCASE("ties go to the lower slot") {
    MemoryBank tied(3, {{"rgb", 2}});
    std::vector<BankEntry> same{{"a", {{"rgb", {0.0, 1.0}}}}, {"b", {{"rgb", {1.0, 0.0}}}}, {"c", {{"rgb", {1.0, 0.0}}}}};
    tied.update(same);
    std::vector<Slot> reversed{2, 1, 0};
    const auto got = tied.similarities(q, "rgb", reversed);
    CHECK(got[0].slot == 1);
    CHECK(got[1].slot == 2);
    CHECK(got[2].slot == 0);
  }
}

TEST_CASE("similarities match a double-loop oracle and ignore candidate order") {
  std::mt19937_64 rng(11);
  auto plain = testing::random_plain_bank(rng, 8, 4, {"rgb"});
  MemoryBank bank = testing::to_bank(plain);
  const auto q = oracle::random_unit(rng, 4);
  std::vector<Slot> cands{0, 1, 2, 3, 4, 5, 6, 7};
  const auto got = bank.similarities(q, "rgb", cands);
  REQUIRE(got.size() == 8);
  for (const auto& s : got) CHECK(s.score == oracle::dot(q, plain.views[0][s.slot]));
  for (std::size_t i = 1; i < got.size(); ++i) CHECK(got[i - 1].score >= got[i].score);

  std::shuffle(cands.begin(), cands.end(), rng);
  CHECK(bank.similarities(q, "rgb", cands) == got);
}

TEST_CASE("feature file round trip and validation") {
  std::istringstream in(
      "# id label view values\n"
      "a\t3\trgb\t1,0\n"
      "a\t3\tflow\t0,2\n"
      "b -1 rgb 0.5,0.5\n"
      "b -1 flow 1e-3,-4\n");
  Dataset ds = read_feature_file(in);
  CHECK(ds.views == std::vector<ViewId>{"rgb", "flow"});
  REQUIRE(ds.records.size() == 2);
  CHECK(ds.records[0].class_label == 3);
  CHECK_FALSE(ds.records[1].class_label.has_value());
  CHECK(ds.records[1].features.at("flow") == FeatureVec{1e-3, -4});

  std::ostringstream out;
  write_feature_file(out, ds);
  std::istringstream back(out.str());
  Dataset again = read_feature_file(back);
  CHECK(again.records[1].features == ds.records[1].features);
  CHECK(again.records[0].class_label == 3);

  SUBCASE("unequal dims rejected") {
    std::istringstream bad("a 0 rgb 1,0\nb 0 rgb 1,0,0\n");
    CHECK_THROWS_WITH_AS(read_feature_file(bad), doctest::Contains("dim mismatch"), ValidationError);
  }
  SUBCASE("missing view coverage rejected") {
    std::istringstream bad("a 0 rgb 1,0\na 0 flow 1,0\nb 0 rgb 1,0\n");
    CHECK_THROWS_WITH_AS(read_feature_file(bad), doctest::Contains("missing view flow"), ValidationError);
  }
  SUBCASE("bad float rejected") {
    std::istringstream bad("a 0 rgb 1,x\n");
    CHECK_THROWS_AS(read_feature_file(bad), ValidationError);
  }
  SUBCASE("conflicting labels rejected") {
    std::istringstream bad("a 0 rgb 1,0\na 1 flow 1,0\n");
    CHECK_THROWS_AS(read_feature_file(bad), ValidationError);
  }
}
