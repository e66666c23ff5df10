#pragma once

#include <random>

#include "cpr/feature_store.hpp"
#include "oracles.hpp"

namespace cpr::testing {

inline MemoryBank to_bank(const oracle::PlainBank& plain) {
  std::vector<MemoryBank::ViewShape> shapes;
  for (std::size_t v = 0; v < plain.view_names.size(); ++v) {
    shapes.push_back({plain.view_names[v], plain.views[v].front().size()});
  }
  MemoryBank bank(plain.ids.size(), shapes);
  std::vector<BankEntry> batch;
  for (std::size_t t = 0; t < plain.ids.size(); ++t) {
    BankEntry e{plain.ids[t], {}};
    for (std::size_t v = 0; v < plain.view_names.size(); ++v) e.features.emplace(plain.view_names[v], plain.views[v][t]);
    batch.push_back(std::move(e));
  }
  bank.update(batch);
  return bank;
}

inline oracle::PlainBank random_plain_bank(std::mt19937_64& rng, std::size_t slots, std::size_t dim,
                                           std::vector<std::string> views = {"rgb", "flow"}) {
  oracle::PlainBank plain;
  plain.view_names = views;
  plain.views.resize(views.size());
  for (std::size_t t = 0; t < slots; ++t) {
    plain.ids.push_back("id" + std::to_string(t));
    for (auto& v : plain.views) v.push_back(oracle::random_unit(rng, dim));
  }
  return plain;
}

inline ViewFeatures random_query(std::mt19937_64& rng, std::size_t dim, const std::vector<std::string>& views) {
  ViewFeatures q;
  for (const auto& v : views) q.emplace(v, oracle::random_unit(rng, dim));
  return q;
}

inline std::vector<Slot> sorted(std::vector<Slot> s) {
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace cpr::testing
