#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "sspcache/analysis.hpp"
#include "sspcache/optimizer.hpp"

namespace sspcache {

struct BaselineResult {
  std::vector<SupportEntry> support;
  std::vector<double> t;
  bool sampled = false; // true when the combination set was subsampled (huge J)
};

namespace detail {

inline std::vector<double> popularity_shares(const ScenarioConfig& cfg,
                                             const std::vector<int>& combo) {
  std::vector<double> b(combo.size());
  double s = 0.0;
  for (std::size_t i = 0; i < combo.size(); ++i) s += cfg.service(combo[i]).popularity;
  for (std::size_t i = 0; i < combo.size(); ++i)
    b[i] = s > 0.0 ? cfg.service(combo[i]).popularity / s : 1.0 / static_cast<double>(combo.size());
  return b;
}

inline std::vector<int> top_popularity_combo(const ScenarioConfig& cfg) {
  std::vector<int> order(static_cast<std::size_t>(cfg.n_services));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return cfg.service(x).popularity > cfg.service(y).popularity;
  });
  order.resize(static_cast<std::size_t>(cfg.cache_size));
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace detail

// Uniform caching with popularity-proportional shares. For combination counts
// beyond the enumeration limit the uniform mixture is represented by a
// uniform sample of `sample_size` combinations (flagged in the result).
inline BaselineResult ucps(const ScenarioConfig& cfg, std::uint64_t seed = 1,
                           int sample_size = 2000) {
  BaselineResult out;
  const double j_count = binomial(cfg.n_services, cfg.cache_size);
  if (j_count <= 2e6 && j_count <= 4 * sample_size) {
    auto idx = enumerate_combinations(cfg.n_services, cfg.cache_size);
    for (int j = 0; j < idx.size(); ++j)
      out.support.push_back({idx.members(j), 1.0 / idx.size(),
                             detail::popularity_shares(cfg, idx.members(j))});
  } else {
    out.sampled = true;
    std::mt19937_64 rng(seed);
    std::vector<int> pool(static_cast<std::size_t>(cfg.n_services));
    std::iota(pool.begin(), pool.end(), 0);
    for (int s = 0; s < sample_size; ++s) {
      for (int i = 0; i < cfg.cache_size; ++i) {
        std::uniform_int_distribution<int> pick(i, cfg.n_services - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
      }
      std::vector<int> combo(pool.begin(), pool.begin() + cfg.cache_size);
      std::sort(combo.begin(), combo.end());
      out.support.push_back({combo, 1.0 / sample_size, detail::popularity_shares(cfg, combo)});
    }
  }
  // T is exact either way: uniform caching gives T_n = K/N.
  out.t.assign(static_cast<std::size_t>(cfg.n_services),
               static_cast<double>(cfg.cache_size) / cfg.n_services);
  return out;
}

// Popularity-driven geographic caching: T_n = K p_n scaled to sum K with
// capping at one and proportional redistribution of the excess.
inline std::vector<double> gcps_service_probabilities(const ScenarioConfig& cfg) {
  const int n = cfg.n_services;
  std::vector<double> t(static_cast<std::size_t>(n));
  std::vector<char> capped(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = cfg.cache_size * cfg.service(i).popularity;
  for (int round = 0; round < n; ++round) {
    bool newly = false;
    double over_budget = cfg.cache_size;
    double free_weight = 0.0;
    for (int i = 0; i < n; ++i) {
      if (t[static_cast<std::size_t>(i)] >= 1.0) {
        if (!capped[static_cast<std::size_t>(i)]) newly = true;
        capped[static_cast<std::size_t>(i)] = 1;
        t[static_cast<std::size_t>(i)] = 1.0;
        over_budget -= 1.0;
      } else if (!capped[static_cast<std::size_t>(i)]) {
        free_weight += cfg.service(i).popularity;
      }
    }
    if (!newly && round > 0) break;
    int free_count = 0;
    for (int i = 0; i < n; ++i)
      if (!capped[static_cast<std::size_t>(i)]) ++free_count;
    for (int i = 0; i < n; ++i)
      if (!capped[static_cast<std::size_t>(i)])
        t[static_cast<std::size_t>(i)] =
            free_weight > 0.0
                ? over_budget * cfg.service(i).popularity / free_weight
                : over_budget / free_count;
  }
  return t;
}

inline BaselineResult gcps(const ScenarioConfig& cfg) {
  BaselineResult out;
  out.t = gcps_service_probabilities(cfg);
  for (auto& e : a_support_from_t(out.t, cfg.cache_size)) {
    e.shares = detail::popularity_shares(cfg, e.combo);
    out.support.push_back(std::move(e));
  }
  return out;
}

// Transmission-centric caching: T maximizes the popularity-weighted SDTP over
// the capped simplex. The objective is concave and separable, so the exact
// argmax comes from KKT waterfilling: p_n sdtp'_n(T_n) = nu (clipped to [0,1]),
// with nu found by bisection.
inline std::vector<double> tcps_service_probabilities(const ScenarioConfig& cfg,
                                                      const DerivedConstants& d) {
  const int n = cfg.n_services;
  // sdtp(T) = T / (D' T + C) with D' = 1 + B - C; derivative p C / (D' T + C)^2.
  auto t_of_nu = [&](double nu) {
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const double dp = 1.0 + d.b_d[ii] - d.c_d[ii];
      const double c = d.c_d[ii];
      const double p = cfg.service(i).popularity;
      if (c <= 0.0 || p <= 0.0) {
        // no interference (or no demand): the objective is flat in T_n
        t[ii] = p > 0.0 ? 1.0 : 0.0;
        continue;
      }
      const double root = std::sqrt(p * c / nu);
      t[ii] = std::clamp((root - c) / dp, 0.0, 1.0);
    }
    return t;
  };
  auto total = [&](double nu) {
    auto t = t_of_nu(nu);
    double s = 0.0;
    for (double v : t) s += v;
    return s;
  };
  double lo = 1e-18, hi = 1e18;
  // total(nu) is nonincreasing in nu.
  for (int it = 0; it < 400; ++it) {
    const double mid = std::sqrt(lo * hi);
    (total(mid) > cfg.cache_size ? lo : hi) = mid;
  }
  auto t = t_of_nu(std::sqrt(lo * hi));
  // Flat directions (C = 0 or p = 0) may leave slack: spread it evenly.
  double s = 0.0;
  for (double v : t) s += v;
  if (std::abs(s - cfg.cache_size) > 1e-9) {
    double deficit = cfg.cache_size - s;
    for (int round = 0; round < n && std::abs(deficit) > 1e-12; ++round) {
      int movable = 0;
      for (double v : t)
        if ((deficit > 0 && v < 1.0) || (deficit < 0 && v > 0.0)) ++movable;
      if (movable == 0) break;
      const double delta = deficit / movable;
      deficit = 0.0;
      for (auto& v : t) {
        const double nv = std::clamp(v + delta, 0.0, 1.0);
        deficit += (v + delta) - nv;
        v = nv;
      }
    }
  }
  return t;
}

inline BaselineResult tcps(const ScenarioConfig& cfg, const DerivedConstants& d) {
  BaselineResult out;
  out.t = tcps_service_probabilities(cfg, d);
  for (auto& e : a_support_from_t(out.t, cfg.cache_size)) {
    e.shares = detail::popularity_shares(cfg, e.combo);
    out.support.push_back(std::move(e));
  }
  return out;
}

// Most-popular caching with shares optimized by the b-only loop of the main
// iteration, restricted to the single active combination.
inline BaselineResult pcos(const ScenarioConfig& cfg, const DerivedConstants& d,
                           ServiceTimeCase stc) {
  BaselineResult out;
  const auto combo = detail::top_popularity_combo(cfg);
  out.t.assign(static_cast<std::size_t>(cfg.n_services), 0.0);
  for (int n : combo) out.t[static_cast<std::size_t>(n)] = 1.0;

  // Restricted index holding only the active combination.
  CombinationIndex idx;
  idx.n_services = cfg.n_services;
  idx.cache_size = cfg.cache_size;
  idx.combos = {combo};
  idx.combos_of.assign(static_cast<std::size_t>(cfg.n_services), {});
  for (int n : combo) idx.combos_of[static_cast<std::size_t>(n)] = {0};

  std::vector<double> lb(combo.size());
  double need = 0.0;
  for (std::size_t i = 0; i < combo.size(); ++i)
    need += (lb[i] = arrival_rate(d, combo[i], 1.0) / d.mu[static_cast<std::size_t>(combo[i])]);
  if (need >= 1.0)
    throw infeasibility_error("most-popular caching cannot stabilise its queues: load " +
                              std::to_string(need));
  std::vector<double> b0(combo.size());
  for (std::size_t i = 0; i < combo.size(); ++i)
    b0[i] = lb[i] + (1.0 - need) / static_cast<double>(combo.size());

  Algorithm1Options opts;
  opts.freeze_a = true;
  opts.record_trace = false;
  opts.init = {{std::vector<double>{1.0}, {b0}}};
  auto res = run_algorithm1(cfg, d, idx, stc, opts);
  out.support.push_back({combo, 1.0, res.b[0]});
  return out;
}

}  // namespace sspcache
