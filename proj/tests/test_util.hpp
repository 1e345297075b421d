// Shared helpers for building random feasible points in tests.
#pragma once

#include <random>
#include <vector>

#include "sspcache/analysis.hpp"
#include "sspcache/combinations.hpp"
#include "sspcache/scenario.hpp"

namespace testutil {

inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n,
                                          double uniform_mix = 0.2) {
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> x(n);
  double s = 0.0;
  for (auto& v : x) s += (v = ex(rng));
  for (auto& v : x) v = (1.0 - uniform_mix) * v / s + uniform_mix / static_cast<double>(n);
  return x;
}

struct DensePoint {
  std::vector<double> a;
  std::vector<std::vector<double>> b;
};

// Random (a, b) that is strictly queue-stable under the scenario: shares start
// from the stability lower bounds and spread the remaining budget randomly.
// Returns an engaged point or retries with more uniform mixing.
inline DensePoint random_feasible_point(const sspcache::ScenarioConfig& cfg,
                                        const sspcache::DerivedConstants& d,
                                        const sspcache::CombinationIndex& idx,
                                        std::mt19937_64& rng) {
  using namespace sspcache;
  for (int attempt = 0; attempt < 64; ++attempt) {
    DensePoint pt;
    pt.a = random_simplex(rng, static_cast<std::size_t>(idx.size()),
                          attempt < 32 ? 0.25 : 0.9);
    std::vector<double> t(static_cast<std::size_t>(cfg.n_services), 0.0);
    for (int j = 0; j < idx.size(); ++j)
      for (int n : idx.members(j)) t[static_cast<std::size_t>(n)] += pt.a[static_cast<std::size_t>(j)];
    bool ok = true;
    pt.b.resize(static_cast<std::size_t>(idx.size()));
    for (int j = 0; j < idx.size() && ok; ++j) {
      const auto& mem = idx.members(j);
      std::vector<double> lb(mem.size());
      double need = 0.0;
      for (std::size_t i = 0; i < mem.size(); ++i) {
        const double lam = arrival_rate(d, mem[i], t[static_cast<std::size_t>(mem[i])]);
        lb[i] = lam / d.mu[static_cast<std::size_t>(mem[i])];
        need += lb[i];
      }
      if (need >= 0.95) {
        ok = false;
        break;
      }
      auto spread = random_simplex(rng, mem.size(), 0.3);
      auto& bj = pt.b[static_cast<std::size_t>(j)];
      bj.resize(mem.size());
      for (std::size_t i = 0; i < mem.size(); ++i)
        bj[i] = lb[i] + (1.0 - need) * spread[i];
    }
    if (ok) return pt;
  }
  throw std::runtime_error("random_feasible_point: could not build a stable point");
}

}  // namespace testutil
