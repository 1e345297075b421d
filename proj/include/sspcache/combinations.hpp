#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "sspcache/errors.hpp"

namespace sspcache {

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline std::string combo_to_string(const std::vector<int>& combo) {
  std::string s = "{";
  for (std::size_t i = 0; i < combo.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(combo[i] + 1);
  }
  return s + "}";
}

// All C(N,K) service combinations in lexicographic order, together with the
// per-service membership sets J_n and per-combination member sets N_j.
struct CombinationIndex {
  int n_services = 0;
  int cache_size = 0;
  std::vector<std::vector<int>> combos;    // N_j, each sorted ascending
  std::vector<std::vector<int>> combos_of; // J_n, sorted ascending

  int size() const { return static_cast<int>(combos.size()); }
  const std::vector<int>& members(int j) const { return combos[static_cast<std::size_t>(j)]; }
  const std::vector<int>& containing(int n) const {
    return combos_of[static_cast<std::size_t>(n)];
  }

  // Lexicographic rank of a sorted K-subset (combinadic).
  int rank(const std::vector<int>& combo) const {
    int r = 0;
    int prev = -1;
    for (int i = 0; i < cache_size; ++i) {
      for (int v = prev + 1; v < combo[static_cast<std::size_t>(i)]; ++v)
        r += static_cast<int>(binomial(n_services - 1 - v, cache_size - 1 - i));
      prev = combo[static_cast<std::size_t>(i)];
    }
    return r;
  }
};

inline CombinationIndex enumerate_combinations(int n_services, int cache_size) {
  if (cache_size > n_services)
    throw invalid_config_error("cache size K exceeds service count N");
  if (cache_size < 1 || n_services < 1)
    throw invalid_config_error("need N >= 1 and 1 <= K <= N");
  const double count = binomial(n_services, cache_size);
  if (count > 2e6)
    throw invalid_config_error("C(N,K) = " + std::to_string(count) +
                               " combinations is too large to enumerate");

  CombinationIndex idx;
  idx.n_services = n_services;
  idx.cache_size = cache_size;
  idx.combos.reserve(static_cast<std::size_t>(count));
  std::vector<int> cur(static_cast<std::size_t>(cache_size));
  std::iota(cur.begin(), cur.end(), 0);
  while (true) {
    idx.combos.push_back(cur);
    int i = cache_size - 1;
    while (i >= 0 && cur[static_cast<std::size_t>(i)] == n_services - cache_size + i) --i;
    if (i < 0) break;
    ++cur[static_cast<std::size_t>(i)];
    for (int k = i + 1; k < cache_size; ++k)
      cur[static_cast<std::size_t>(k)] = cur[static_cast<std::size_t>(k - 1)] + 1;
  }
  idx.combos_of.assign(static_cast<std::size_t>(n_services), {});
  for (int j = 0; j < idx.size(); ++j)
    for (int n : idx.members(j)) idx.combos_of[static_cast<std::size_t>(n)].push_back(j);
  return idx;
}

// Probability vector over the J combinations.
struct CachingDistribution {
  std::vector<double> a;

  void check(const CombinationIndex& idx) const {
    if (static_cast<int>(a.size()) != idx.size())
      throw invalid_config_error("caching distribution has wrong length");
    double s = 0.0;
    for (double v : a) {
      if (v < -1e-12) throw infeasibility_error("caching probability below zero");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9)
      throw infeasibility_error("caching probabilities sum to " + std::to_string(s));
  }
};

// Per-service cache-hit probabilities T_n.
struct ServiceProbabilities {
  std::vector<double> t;

  void check(int cache_size) const {
    double s = 0.0;
    for (double v : t) {
      if (v < -1e-12 || v > 1.0 + 1e-12)
        throw infeasibility_error("service probability outside [0,1]");
      s += v;
    }
    if (std::abs(s - cache_size) > 1e-9)
      throw infeasibility_error("service probabilities sum to " + std::to_string(s) +
                                ", expected " + std::to_string(cache_size));
  }
};

// Fractional CPU shares b_{n,j}, stored per combination aligned with N_j.
struct ComputingAllocation {
  std::vector<std::vector<double>> b; // b[j][i] for service members(j)[i]

  double at(const CombinationIndex& idx, int n, int j) const {
    const auto& mem = idx.members(j);
    auto it = std::lower_bound(mem.begin(), mem.end(), n);
    if (it == mem.end() || *it != n)
      throw invalid_config_error("b_{n,j} requested for service outside combination");
    return b[static_cast<std::size_t>(j)][static_cast<std::size_t>(it - mem.begin())];
  }

  void check(const CombinationIndex& idx) const {
    if (static_cast<int>(b.size()) != idx.size())
      throw invalid_config_error("computing allocation has wrong length");
    for (int j = 0; j < idx.size(); ++j) {
      const auto& bj = b[static_cast<std::size_t>(j)];
      if (bj.size() != idx.members(j).size())
        throw invalid_config_error("allocation block size mismatch");
      double s = 0.0;
      for (double v : bj) {
        if (v < -1e-12) throw infeasibility_error("computing share below zero");
        s += v;
      }
      if (std::abs(s - 1.0) > 1e-9)
        throw infeasibility_error("computing shares of combination " +
                                  combo_to_string(idx.members(j)) + " sum to " +
                                  std::to_string(s));
    }
  }
};

inline ServiceProbabilities t_from_a(const CachingDistribution& a, const CombinationIndex& idx) {
  a.check(idx);
  ServiceProbabilities out;
  out.t.assign(static_cast<std::size_t>(idx.n_services), 0.0);
  for (int j = 0; j < idx.size(); ++j)
    for (int n : idx.members(j)) out.t[static_cast<std::size_t>(n)] += a.a[static_cast<std::size_t>(j)];
  return out;
}

// One atom of a sparse caching design: a combination, its probability and
// (optionally) the computing shares aligned with the sorted member list.
struct SupportEntry {
  std::vector<int> combo;
  double weight = 0.0;
  std::vector<double> shares;
};

// Block-filling construction: lay the services as segments of length T_n into
// K unit-height columns, cut at segment boundaries and read each vertical
// slice as one combination whose probability is the slice width. The result
// has at most N+1 atoms, so it stays tractable for any N.
inline std::vector<SupportEntry> a_support_from_t(const std::vector<double>& t, int cache_size) {
  const int n_services = static_cast<int>(t.size());
  double sum = 0.0;
  for (double v : t) {
    if (v < -1e-9 || v > 1.0 + 1e-9)
      throw infeasibility_error("service probability outside [0,1]");
    sum += v;
  }
  if (std::abs(sum - cache_size) > 1e-9)
    throw infeasibility_error("service probabilities sum to " + std::to_string(sum) +
                              ", expected " + std::to_string(cache_size));

  struct Segment {
    int service;
    double begin, end;
  };
  std::vector<Segment> segs;
  double cum = 0.0;
  for (int n = 0; n < n_services; ++n) {
    const double len = std::min(t[static_cast<std::size_t>(n)], 1.0);
    if (len <= 1e-12) continue;
    segs.push_back({n, cum, cum + len});
    cum += len;
  }

  std::vector<double> cuts{0.0, 1.0};
  for (const auto& s : segs) {
    double f = s.begin - std::floor(s.begin);
    if (f > 1e-12 && f < 1.0 - 1e-12) cuts.push_back(f);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [](double x, double y) { return std::abs(x - y) < 1e-12; }),
             cuts.end());

  std::vector<SupportEntry> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double width = cuts[i + 1] - cuts[i];
    if (width < 1e-12) continue;
    const double x = 0.5 * (cuts[i] + cuts[i + 1]);
    std::vector<int> combo;
    for (int col = 0; col < cache_size; ++col) {
      const double pos = col + x;
      for (const auto& s : segs)
        if (pos >= s.begin - 1e-12 && pos < s.end - 1e-12) {
          combo.push_back(s.service);
          break;
        }
    }
    std::sort(combo.begin(), combo.end());
    combo.erase(std::unique(combo.begin(), combo.end()), combo.end());
    if (static_cast<int>(combo.size()) != cache_size) {
      if (width <= 1e-8) continue; // rounding sliver at a clamped boundary
      throw infeasibility_error("block filling produced a malformed slice");
    }
    bool merged = false;
    for (auto& e : out)
      if (e.combo == combo) {
        e.weight += width;
        merged = true;
        break;
      }
    if (!merged) out.push_back({combo, width, {}});
  }
  double total = 0.0;
  for (const auto& e : out) total += e.weight;
  if (std::abs(total - 1.0) > 1e-12) {
    if (std::abs(total - 1.0) > 1e-7)
      throw infeasibility_error("block filling lost probability mass");
    for (auto& e : out) e.weight /= total;
  }
  return out;
}

inline CachingDistribution a_from_t(const ServiceProbabilities& t, const CombinationIndex& idx) {
  t.check(idx.cache_size);
  auto support = a_support_from_t(t.t, idx.cache_size);
  CachingDistribution out;
  out.a.assign(static_cast<std::size_t>(idx.size()), 0.0);
  for (const auto& e : support) out.a[static_cast<std::size_t>(idx.rank(e.combo))] += e.weight;
  return out;
}

}  // namespace sspcache
