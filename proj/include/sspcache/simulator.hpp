#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sspcache/analysis.hpp"
#include "sspcache/rng.hpp"

namespace sspcache {

enum class UplinkMode { thinned_ppp, dependent };
enum class CorrelationMode { independent, joint };
enum class QueueMode { sojourn_formula_sampling, discrete_event };

struct SimConfig {
  long long trials = 1000000;
  double window_radius_m = 0.0; // 0: 10 / sqrt(lambda_bs * min active T_n)
  UplinkMode uplink_mode = UplinkMode::thinned_ppp;
  CorrelationMode correlation_mode = CorrelationMode::independent;
  QueueMode queue_mode = QueueMode::discrete_event;
  int threads = 2;

  void check() const {
    if (trials < 1) throw invalid_config_error("simulation needs at least one trial");
  }
};

inline double auto_window_radius(const ScenarioConfig& cfg, const std::vector<double>& t) {
  double tmin = 1.0;
  for (double v : t)
    if (v > 1e-12) tmin = std::min(tmin, v);
  return 10.0 / std::sqrt(cfg.density_bs * tmin);
}

// --- spatial scene ----------------------------------------------------------------

struct SpatialScene {
  struct Point {
    double x, y;
  };
  std::vector<Point> bs;
  std::vector<int> bs_entry;      // index into the generating support (combination)
  std::vector<Point> users;
  std::vector<int> user_service;  // -1: idle this slot
  double window_radius_m = 0.0;
  std::uint64_t seed = 0;
  const std::vector<SupportEntry>* support = nullptr;

  bool bs_caches(int bs_index, int service) const {
    const auto& combo = (*support)[static_cast<std::size_t>(bs_entry[static_cast<std::size_t>(bs_index)])].combo;
    return std::binary_search(combo.begin(), combo.end(), service);
  }
};

inline SpatialScene sample_scene(const ScenarioConfig& cfg, const std::vector<SupportEntry>& support,
                                 double window_radius, std::uint64_t seed) {
  SpatialScene scene;
  scene.window_radius_m = window_radius;
  scene.seed = seed;
  scene.support = &support;
  Rng rng(seed);
  const double area = M_PI * window_radius * window_radius;

  auto place = [&](std::vector<SpatialScene::Point>& pts, long long count) {
    pts.resize(static_cast<std::size_t>(count));
    for (auto& p : pts) {
      const double r = window_radius * std::sqrt(rng.uniform());
      const double phi = rng.uniform(0.0, 2.0 * M_PI);
      p = {r * std::cos(phi), r * std::sin(phi)};
    }
  };

  long long n_bs = rng.poisson(cfg.density_bs * area);
  for (int retry = 0; n_bs == 0 && retry < 64; ++retry) n_bs = rng.poisson(cfg.density_bs * area);
  place(scene.bs, n_bs);
  scene.bs_entry.resize(static_cast<std::size_t>(n_bs));
  for (auto& e : scene.bs_entry) {
    const double u = rng.uniform();
    double acc = 0.0;
    int pick = static_cast<int>(support.size()) - 1;
    for (std::size_t k = 0; k < support.size(); ++k) {
      acc += support[k].weight;
      if (u < acc) {
        pick = static_cast<int>(k);
        break;
      }
    }
    e = pick;
  }

  const long long n_u = rng.poisson(cfg.density_u * area);
  place(scene.users, n_u);
  scene.user_service.resize(static_cast<std::size_t>(n_u));
  for (auto& s : scene.user_service) {
    if (rng.uniform() >= cfg.p_s) {
      s = -1;
      continue;
    }
    const double u = rng.uniform();
    double acc = 0.0;
    s = cfg.n_services - 1;
    for (int n = 0; n < cfg.n_services; ++n) {
      acc += cfg.service(n).popularity;
      if (u < acc) {
        s = n;
        break;
      }
    }
  }
  return scene;
}

// Nearest BS caching service n as seen from the origin (the typical user).
struct Association {
  int bs_index = -1;
  double distance = 0.0;
  bool censored = true; // no caching BS inside the window
};

inline Association associate(const SpatialScene& scene, int service) {
  Association out;
  double best = 1e300;
  for (std::size_t i = 0; i < scene.bs.size(); ++i) {
    if (!scene.bs_caches(static_cast<int>(i), service)) continue;
    const double d2 = scene.bs[i].x * scene.bs[i].x + scene.bs[i].y * scene.bs[i].y;
    if (d2 < best) {
      best = d2;
      out.bs_index = static_cast<int>(i);
    }
  }
  if (out.bs_index >= 0) {
    out.distance = std::sqrt(best);
    out.censored = false;
  }
  return out;
}

namespace detail {

// SIR threshold test at a receiver from a set of interferer distances.
inline bool sir_success(Rng& rng, double serve_distance, double alpha,
                        const std::vector<double>& interferer_distances, double theta) {
  const double signal = rng.exp_fading() * std::pow(serve_distance, -alpha);
  double interference = 0.0;
  for (double r : interferer_distances)
    interference += rng.exp_fading() * std::pow(std::max(r, 1e-6), -alpha);
  if (interference == 0.0) return true; // no interferers: SIR = infinity
  return signal >= theta * interference;
}

}  // namespace detail

// Uplink leg on a sampled scene. thinned_ppp draws the interferer users as a
// fresh PPP of density p_s lambda_bs / kappa (the analytical assumption);
// dependent places one user uniformly inside each cochannel Voronoi cell and
// keeps it with probability p_s.
inline std::optional<bool> uplink_success(const SpatialScene& scene, int service,
                                          const ScenarioConfig& cfg, const DerivedConstants& d,
                                          UplinkMode mode, Rng& rng) {
  const auto assoc = associate(scene, service);
  if (assoc.censored) return std::nullopt;
  const auto serving = scene.bs[static_cast<std::size_t>(assoc.bs_index)];
  const double window = scene.window_radius_m;
  std::vector<double> interferers;
  if (mode == UplinkMode::thinned_ppp) {
    const double density = cfg.p_s * cfg.density_bs / cfg.reuse_kappa;
    const long long count = rng.poisson(density * M_PI * window * window);
    interferers.reserve(static_cast<std::size_t>(count));
    for (long long i = 0; i < count; ++i) {
      const double r = window * std::sqrt(rng.uniform());
      const double phi = rng.uniform(0.0, 2.0 * M_PI);
      const double dx = r * std::cos(phi) - serving.x;
      const double dy = r * std::sin(phi) - serving.y;
      interferers.push_back(std::sqrt(dx * dx + dy * dy));
    }
  } else {
    // One interfering user per cochannel cell, placed uniformly inside the
    // cell by rejection sampling over a local disk that covers it w.h.p.
    const double local = 3.0 / std::sqrt(M_PI * cfg.density_bs);
    for (std::size_t k = 0; k < scene.bs.size(); ++k) {
      if (static_cast<int>(k) == assoc.bs_index) continue;
      if (rng.uniform() >= 1.0 / cfg.reuse_kappa) continue;
      if (rng.uniform() >= cfg.p_s) continue;
      for (int attempt = 0; attempt < 128; ++attempt) {
        const double r = local * std::sqrt(rng.uniform());
        const double phi = rng.uniform(0.0, 2.0 * M_PI);
        const double px = scene.bs[k].x + r * std::cos(phi);
        const double py = scene.bs[k].y + r * std::sin(phi);
        double best = 1e300;
        std::size_t owner = 0;
        for (std::size_t i = 0; i < scene.bs.size(); ++i) {
          const double dx = px - scene.bs[i].x, dy = py - scene.bs[i].y;
          const double d2 = dx * dx + dy * dy;
          if (d2 < best) {
            best = d2;
            owner = i;
          }
        }
        if (owner == k) {
          const double dx = px - serving.x, dy = py - serving.y;
          interferers.push_back(std::sqrt(dx * dx + dy * dy));
          break;
        }
      }
    }
  }
  return detail::sir_success(rng, std::max(assoc.distance, 1e-6), cfg.alpha, interferers,
                             d.theta_u[static_cast<std::size_t>(service)]);
}

// Downlink leg on a sampled scene: every other BS interferes independently
// with probability p_s / kappa; the receiver is the typical user at the origin.
inline std::optional<bool> downlink_success(const SpatialScene& scene, int service,
                                            const ScenarioConfig& cfg, const DerivedConstants& d,
                                            Rng& rng) {
  const auto assoc = associate(scene, service);
  if (assoc.censored) return std::nullopt;
  std::vector<double> interferers;
  const double p_act = cfg.p_s / cfg.reuse_kappa;
  for (std::size_t i = 0; i < scene.bs.size(); ++i) {
    if (static_cast<int>(i) == assoc.bs_index) continue;
    if (rng.uniform() >= p_act) continue;
    interferers.push_back(std::hypot(scene.bs[i].x, scene.bs[i].y));
  }
  return detail::sir_success(rng, std::max(assoc.distance, 1e-6), cfg.alpha, interferers,
                             d.theta_d[static_cast<std::size_t>(service)]);
}

// --- queueing samplers -------------------------------------------------------------

// Stationary sojourn-time sampler for one virtual-server queue. The
// discrete-event mode replays Poisson arrivals through the Lindley recursion
// with a warm-up discard and a decorrelation lag; the formula mode draws the
// M/M/1 sojourn law directly.
class QueueSampler {
 public:
  QueueSampler(double lambda, double rate, bool deterministic_service, QueueMode mode,
               std::uint64_t seed)
      : lambda_(lambda),
        rate_(rate),
        deterministic_(deterministic_service),
        mode_(mode),
        rng_(seed) {
    if (rate_ <= lambda_) throw queue_unstable_error("queue sampler needs rate > lambda");
    if (mode_ == QueueMode::sojourn_formula_sampling && deterministic_)
      mode_ = QueueMode::discrete_event; // no closed sampling law for M/D/1
    if (mode_ == QueueMode::discrete_event) {
      const double rho = lambda_ / rate_;
      lag_ = static_cast<int>(std::ceil(10.0 / (1.0 - rho)));
      const long long warmup =
          static_cast<long long>(std::ceil(10.0 / (rate_ - lambda_) * lambda_)) + 100;
      for (long long i = 0; i < warmup; ++i) advance();
    }
  }

  double next() {
    if (mode_ == QueueMode::sojourn_formula_sampling) return rng_.exponential(rate_ - lambda_);
    double s = 0.0;
    for (int i = 0; i < lag_; ++i) s = advance();
    return s;
  }

 private:
  double advance() {
    const double service = deterministic_ ? 1.0 / rate_ : rng_.exponential(rate_);
    const double sojourn = wait_ + service;
    wait_ = std::max(0.0, sojourn - rng_.exponential(lambda_));
    return sojourn;
  }

  double lambda_, rate_;
  bool deterministic_;
  QueueMode mode_;
  Rng rng_;
  double wait_ = 0.0;
  int lag_ = 1;
};

// One-shot stationary sojourn sample (a fresh sampler per call).
inline double queue_delay_sample(double lambda, double rate, ServiceTimeCase stc, QueueMode mode,
                                 std::uint64_t seed) {
  QueueSampler sampler(lambda, rate, stc == ServiceTimeCase::deterministic, mode, seed);
  return sampler.next();
}

// --- estimators ---------------------------------------------------------------------

struct Estimate {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  long long trials = 0;
  long long censored = 0;
};

inline Estimate wilson_interval(long long hits, long long trials) {
  Estimate e;
  e.trials = trials;
  if (trials == 0) return e;
  const double z = 1.959963984540054; // 95%
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  e.mean = p;
  e.ci_low = std::max(0.0, centre - half);
  e.ci_high = std::min(1.0, centre + half);
  return e;
}

namespace detail {

// Nearest-point distance of a PPP with intensity `density`: Rayleigh law.
inline double nearest_distance(Rng& rng, double density) {
  return std::sqrt(-std::log1p(-rng.uniform()) / (M_PI * density));
}

// Reduced exact sampling of the uplink leg: serving distance d, interfering
// users as a PPP of density p_s lambda_bs/kappa around the receiver.
inline bool uplink_leg(Rng& rng, const ScenarioConfig& cfg, const DerivedConstants& d, int n,
                       double serve_distance, double window) {
  const double density = cfg.p_s * cfg.density_bs / cfg.reuse_kappa;
  const long long count = rng.poisson(density * M_PI * window * window);
  const double signal = rng.exp_fading() * std::pow(serve_distance, -cfg.alpha);
  double interference = 0.0;
  // receiver at (serve_distance, 0); interferers uniform in the window disk
  for (long long i = 0; i < count; ++i) {
    const double r = window * std::sqrt(rng.uniform());
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    const double dx = r * std::cos(phi) - serve_distance;
    const double dy = r * std::sin(phi);
    interference +=
        rng.exp_fading() * std::pow(std::max(std::sqrt(dx * dx + dy * dy), 1e-6), -cfg.alpha);
  }
  if (interference == 0.0) return true;
  return signal >= d.theta_u[static_cast<std::size_t>(n)] * interference;
}

// Reduced exact sampling of the downlink leg: caching interferers live beyond
// the serving distance, non-caching ones anywhere; both thinned by p_s/kappa.
inline bool downlink_leg(Rng& rng, const ScenarioConfig& cfg, const DerivedConstants& d, int n,
                         double t_n, double serve_distance, double window) {
  const double thin = cfg.p_s / cfg.reuse_kappa;
  const double signal = rng.exp_fading() * std::pow(serve_distance, -cfg.alpha);
  double interference = 0.0;
  const double caching_density = t_n * cfg.density_bs * thin;
  const double ring_area = M_PI * std::max(0.0, window * window - serve_distance * serve_distance);
  const long long n_caching = rng.poisson(caching_density * ring_area);
  for (long long i = 0; i < n_caching; ++i) {
    const double r = std::sqrt(serve_distance * serve_distance +
                               rng.uniform() * (window * window - serve_distance * serve_distance));
    interference += rng.exp_fading() * std::pow(r, -cfg.alpha);
  }
  const double other_density = (1.0 - t_n) * cfg.density_bs * thin;
  const long long n_other = rng.poisson(other_density * M_PI * window * window);
  for (long long i = 0; i < n_other; ++i) {
    const double r = window * std::sqrt(rng.uniform());
    interference += rng.exp_fading() * std::pow(std::max(r, 1e-6), -cfg.alpha);
  }
  if (interference == 0.0) return true;
  return signal >= d.theta_d[static_cast<std::size_t>(n)] * interference;
}

}  // namespace detail

// Empirical SUTP for one service under the reduced sampler (exact for the
// thinned-PPP uplink model).
inline Estimate estimate_sutp(const ScenarioConfig& cfg, const DerivedConstants& d, int n,
                              double t_n, const SimConfig& sim, std::uint64_t seed) {
  sim.check();
  const double window = sim.window_radius_m > 0.0
                            ? sim.window_radius_m
                            : 10.0 / std::sqrt(cfg.density_bs * std::max(t_n, 1e-12));
  long long hits = 0, censored = 0;
  Rng rng(split_seed(seed, 0xABCDu));
  for (long long i = 0; i < sim.trials; ++i) {
    const double dist = detail::nearest_distance(rng, t_n * cfg.density_bs);
    if (dist > window) {
      ++censored;
      continue;
    }
    hits += detail::uplink_leg(rng, cfg, d, n, dist, window) ? 1 : 0;
  }
  auto e = wilson_interval(hits, sim.trials - censored);
  e.censored = censored;
  return e;
}

inline Estimate estimate_sdtp(const ScenarioConfig& cfg, const DerivedConstants& d, int n,
                              double t_n, const SimConfig& sim, std::uint64_t seed) {
  sim.check();
  const double window = sim.window_radius_m > 0.0
                            ? sim.window_radius_m
                            : 10.0 / std::sqrt(cfg.density_bs * std::max(t_n, 1e-12));
  long long hits = 0, censored = 0;
  Rng rng(split_seed(seed, 0xDCBAu));
  for (long long i = 0; i < sim.trials; ++i) {
    const double dist = detail::nearest_distance(rng, t_n * cfg.density_bs);
    if (dist > window) {
      ++censored;
      continue;
    }
    hits += detail::downlink_leg(rng, cfg, d, n, t_n, dist, window) ? 1 : 0;
  }
  auto e = wilson_interval(hits, sim.trials - censored);
  e.censored = censored;
  return e;
}

// Empirical SCPP of one (service, share) queue.
inline Estimate estimate_scpp(const ScenarioConfig& cfg, const DerivedConstants& d, int n,
                              double lambda, double b_share, ServiceTimeCase stc,
                              const SimConfig& sim, std::uint64_t seed) {
  sim.check();
  const double rate = b_share * d.mu[static_cast<std::size_t>(n)];
  QueueSampler sampler(lambda, rate, stc == ServiceTimeCase::deterministic, sim.queue_mode,
                       split_seed(seed, 0x5157u));
  const double gamma = cfg.service(n).gamma_q_s;
  long long hits = 0;
  for (long long i = 0; i < sim.trials; ++i) hits += sampler.next() <= gamma ? 1 : 0;
  return wilson_interval(hits, sim.trials);
}

// Full SSP estimator over the reduced exact sampler. `joint` shares the
// serving distance between the uplink and downlink legs (the model's only
// cross-leg coupling); `independent` redraws it.
inline Estimate estimate_ssp_sim(const ScenarioConfig& cfg, const DerivedConstants& d,
                                 const std::vector<SupportEntry>& support, ServiceTimeCase stc,
                                 const SimConfig& sim, std::uint64_t seed,
                                 StabilityPolicy policy = StabilityPolicy::strict_error) {
  sim.check();
  const auto t = t_from_support(support, cfg.n_services);
  const double window =
      sim.window_radius_m > 0.0 ? sim.window_radius_m : auto_window_radius(cfg, t);

  // Queue samplers per (support entry, member) pair, built once.
  struct Leg {
    double lambda = 0.0;
    double rate = 0.0;
    bool unstable = false;
  };
  std::vector<std::vector<Leg>> legs(support.size());
  for (std::size_t k = 0; k < support.size(); ++k) {
    legs[k].resize(support[k].combo.size());
    for (std::size_t i = 0; i < support[k].combo.size(); ++i) {
      const int n = support[k].combo[i];
      const double tn = t[static_cast<std::size_t>(n)];
      if (tn <= 1e-15 || support[k].weight <= 0.0) continue;
      auto& leg = legs[k][i];
      leg.lambda = arrival_rate(d, n, tn);
      leg.rate = support[k].shares[i] * d.mu[static_cast<std::size_t>(n)];
      if (leg.rate <= leg.lambda) {
        if (policy == StabilityPolicy::strict_error)
          throw queue_unstable_error(n, combo_to_string(support[k].combo), leg.rate, leg.lambda);
        leg.unstable = true;
      }
    }
  }

  // Per-service cumulative tables for the conditional combination draw.
  struct Choice {
    double cum;
    int entry;
    int pos;
  };
  std::vector<std::vector<Choice>> choices(static_cast<std::size_t>(cfg.n_services));
  for (std::size_t k = 0; k < support.size(); ++k) {
    const auto& combo = support[k].combo;
    for (std::size_t i = 0; i < combo.size(); ++i) {
      auto& list = choices[static_cast<std::size_t>(combo[i])];
      const double prev = list.empty() ? 0.0 : list.back().cum;
      list.push_back({prev + support[k].weight, static_cast<int>(k), static_cast<int>(i)});
    }
  }

  const int blocks = 64;
  const long long per_block = (sim.trials + blocks - 1) / blocks;
  std::vector<long long> hits(blocks, 0), censored(blocks, 0), counted(blocks, 0);

  auto run_block = [&](int blk) {
    Rng rng(split_seed(seed, static_cast<std::uint64_t>(blk)));
    std::map<std::pair<int, int>, QueueSampler> samplers;
    const long long lo = blk * per_block;
    const long long hi = std::min<long long>(sim.trials, lo + per_block);
    for (long long trial = lo; trial < hi; ++trial) {
      // service n ~ popularity
      int n = cfg.n_services - 1;
      {
        const double u = rng.uniform();
        double acc = 0.0;
        for (int m = 0; m < cfg.n_services; ++m) {
          acc += cfg.service(m).popularity;
          if (u < acc) {
            n = m;
            break;
          }
        }
      }
      const double tn = t[static_cast<std::size_t>(n)];
      if (tn <= 1e-15) {
        ++counted[static_cast<std::size_t>(blk)]; // never served: a sure failure
        continue;
      }
      // serving combination ~ a_j / T_n over entries containing n
      const auto& list = choices[static_cast<std::size_t>(n)];
      if (list.empty()) {
        ++counted[static_cast<std::size_t>(blk)];
        continue;
      }
      const double u = rng.uniform() * list.back().cum;
      auto pick = std::lower_bound(list.begin(), list.end(), u,
                                   [](const Choice& c, double v) { return c.cum < v; });
      if (pick == list.end()) --pick;
      const int entry = pick->entry;
      const std::size_t pos = static_cast<std::size_t>(pick->pos);
      const double d_up = detail::nearest_distance(rng, tn * cfg.density_bs);
      const double d_down = sim.correlation_mode == CorrelationMode::joint
                                ? d_up
                                : detail::nearest_distance(rng, tn * cfg.density_bs);
      if (d_up > window || d_down > window) {
        ++censored[static_cast<std::size_t>(blk)];
        continue;
      }
      ++counted[static_cast<std::size_t>(blk)];
      if (!detail::uplink_leg(rng, cfg, d, n, d_up, window)) continue;
      const auto& leg = legs[static_cast<std::size_t>(entry)][pos];
      if (leg.unstable) continue; // steady-state success probability zero
      auto key = std::make_pair(entry, static_cast<int>(pos));
      auto it = samplers.find(key);
      if (it == samplers.end())
        it = samplers
                 .emplace(key,
                          QueueSampler(leg.lambda, leg.rate, stc == ServiceTimeCase::deterministic,
                                       sim.queue_mode,
                                       split_seed(seed, 0x9999u + 131ull * blk + 7ull * entry +
                                                            static_cast<std::uint64_t>(pos))))
                 .first;
      if (it->second.next() > cfg.service(n).gamma_q_s) continue;
      if (!detail::downlink_leg(rng, cfg, d, n, tn, d_down, window)) continue;
      ++hits[static_cast<std::size_t>(blk)];
    }
  };

  if (sim.threads > 1) {
    std::vector<std::future<void>> futs;
    std::atomic<int> next{0};
    for (int w = 0; w < sim.threads; ++w)
      futs.push_back(std::async(std::launch::async, [&]() {
        for (int blk = next.fetch_add(1); blk < blocks; blk = next.fetch_add(1)) run_block(blk);
      }));
    for (auto& f : futs) f.get();
  } else {
    for (int blk = 0; blk < blocks; ++blk) run_block(blk);
  }

  long long h = 0, c = 0, m = 0;
  for (int blk = 0; blk < blocks; ++blk) {
    h += hits[static_cast<std::size_t>(blk)];
    c += censored[static_cast<std::size_t>(blk)];
    m += counted[static_cast<std::size_t>(blk)];
  }
  auto e = wilson_interval(h, m);
  e.censored = c;
  return e;
}

// Per-estimator CSV row: (estimator, n, trials, mean, ci_low, ci_high, modes, seed).
inline void emit_estimator_csv(std::ostream& out, const std::string& estimator, int service,
                               const Estimate& e, const SimConfig& sim, std::uint64_t seed) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%d,%lld,%.10g,%.10g,%.10g,%s,%s,%s,%llu\n",
                estimator.c_str(), service + 1, e.trials, e.mean, e.ci_low, e.ci_high,
                sim.uplink_mode == UplinkMode::thinned_ppp ? "thinned_ppp" : "dependent",
                sim.correlation_mode == CorrelationMode::joint ? "joint" : "independent",
                sim.queue_mode == QueueMode::discrete_event ? "discrete_event" : "formula",
                static_cast<unsigned long long>(seed));
  out << buf;
}

}  // namespace sspcache
