#pragma once

// Hand-built metric fixtures shared by the evaluator tests and the acceptance
// suite. Expected values are worked out in the comments.

#include <cmath>
#include <string>
#include <vector>

#include "cpr/evaluator.hpp"
#include "cpr/feature_store.hpp"

namespace cpr::fixtures {

inline FeatureVec at_angle(double a) { return {std::cos(a), std::sin(a)}; }

// 20 slots. Flow angle grows with the slot index, so stage 1 of an rgb query
// (flow view, ratio 0.5) keeps slots 0..9. Odd slots below 10 have the
// smallest rgb angles, so stage 2 (rgb) keeps {1,3,5,7,9}. Stage 3 (flow,
// Top-3) then picks 1, 3, 5 in that order: labels 0, 1, 0 -> PMR 2/3, R@1 1.
// A single flow stage with Top-3 picks 0, 1, 2: labels 2, 0, 2 -> PMR 1/3, R@1 0.
struct CraftedBank {
  MemoryBank bank{20, {{"rgb", 2}, {"flow", 2}}};
  std::vector<int> labels{2, 0, 2, 1, 0, 0, 3, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  ViewFeatures query{{"rgb", at_angle(0.0)}, {"flow", at_angle(0.0)}};
  int query_class = 0;

  CraftedBank() {
    std::vector<BankEntry> batch;
    for (int t = 0; t < 20; ++t) {
      const double rgb = (t < 10 && t % 2 == 1) ? 0.1 * t : 1.0 + 0.05 * t;
      batch.push_back({"s" + std::to_string(t), {{"rgb", at_angle(rgb)}, {"flow", at_angle(0.05 * (t + 1))}}});
    }
    bank.update(batch);
  }
};

// 10 test points e_0..e_9 and 30 training points whose coordinate i is their
// similarity to test i (a padding coordinate makes them unit). Every training
// item has its own label; test i takes the label of the item planted at rank
// planted[i], or a label nobody has. First-hit ranks 0,0,1,2,4,5,9,12,19,never
// give R@1 = 0.2, R@5 = 0.5, R@10 = 0.7, R@20 = 0.9.
struct PlantedRecall {
  LabeledEmbeddings test;
  LabeledEmbeddings train;
  std::map<std::size_t, double> expected{{1, 0.2}, {5, 0.5}, {10, 0.7}, {20, 0.9}};

  PlantedRecall() {
    const std::vector<int> planted{0, 0, 1, 2, 4, 5, 9, 12, 19, -1};
    const std::size_t dim = 11;
    auto item_at = [](std::size_t i, std::size_t rank) { return (rank + 30 - (7 * i) % 30) % 30; };
    std::vector<std::vector<double>> coords(30, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < 10; ++i) {
      for (std::size_t rank = 0; rank < 30; ++rank) {
        coords[item_at(i, rank)][i] = 0.17 - 0.005 * static_cast<double>(rank);
      }
    }
    for (std::size_t j = 0; j < 30; ++j) {
      double sq = 0.0;
      for (std::size_t i = 0; i < 10; ++i) sq += coords[j][i] * coords[j][i];
      coords[j][10] = std::sqrt(1.0 - sq);
      train.vectors.push_back(coords[j]);
      train.labels.push_back(static_cast<int>(j));
    }
    for (std::size_t i = 0; i < 10; ++i) {
      FeatureVec e(dim, 0.0);
      e[i] = 1.0;
      test.vectors.push_back(e);
      test.labels.push_back(planted[i] < 0 ? 1000 : static_cast<int>(item_at(i, static_cast<std::size_t>(planted[i]))));
    }
  }
};

// Scripted epoch over three classes of sizes 4, 3, 5. Class 0 recovers a1
// and a2 (self and cross-class hits excluded) -> 2/4; class 1 nothing -> 0;
// class 2 recovers c0..c3 -> 4/5. Median CMR 0.5.
struct ScriptedEpoch {
  LabelMap labels{{"a0", 0}, {"a1", 0}, {"a2", 0}, {"a3", 0}, {"b0", 1}, {"b1", 1}, {"b2", 1},
                  {"c0", 2}, {"c1", 2}, {"c2", 2}, {"c3", 2}, {"c4", 2}};
  ClassSizes sizes{{0, 4}, {1, 3}, {2, 5}};
  std::vector<QueryTrace> traces{
      {"a0", {"a1", "b0", "a1"}},  // duplicate slot of a1 counts once
      {"a1", {"a2", "a1", "c0"}},  // self never counts
      {"b0", {"a0", "a3"}},        // a-class ids mined for a b query are not TPs
      {"c0", {"c1", "c2", "c3"}},
      {"c4", {"c1", "c0", "c2"}},
  };
  std::map<int, double> expected_cmr{{0, 0.5}, {1, 0.0}, {2, 0.8}};
  std::map<int, std::size_t> expected_tp{{0, 2}, {2, 4}};
};

}  // namespace cpr::fixtures
