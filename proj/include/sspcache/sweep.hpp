#pragma once

#include <atomic>
#include <cmath>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sspcache/asymptotic.hpp"
#include "sspcache/baselines.hpp"
#include "sspcache/config.hpp"
#include "sspcache/optimizer.hpp"
#include "sspcache/simulator.hpp"

namespace sspcache {

enum class Scheme { alg1, alg3, ucps, gcps, tcps, pcos };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::alg1: return "alg1";
    case Scheme::alg3: return "alg3";
    case Scheme::ucps: return "ucps";
    case Scheme::gcps: return "gcps";
    case Scheme::tcps: return "tcps";
    case Scheme::pcos: return "pcos";
  }
  return "?";
}

inline Scheme parse_scheme(const std::string& name) {
  for (Scheme s : {Scheme::alg1, Scheme::alg3, Scheme::ucps, Scheme::gcps, Scheme::tcps,
                   Scheme::pcos})
    if (name == scheme_name(s)) return s;
  throw invalid_config_error("unknown scheme: " + name);
}

// One computed caching/allocation design plus solver metadata.
struct SchemeSolution {
  std::vector<SupportEntry> support;
  long long iterations = 0;
  double grad_sq = std::numeric_limits<double>::quiet_NaN();
  bool lenient = false; // baselines may be evaluated with unstable pairs zeroed
  bool sampled = false;
};

// Computes a scheme at a given scenario. Algorithm 1 is warm-started from the
// near-optimal solution in addition to the default feasible start.
inline SchemeSolution compute_scheme(const ScenarioConfig& cfg, const DerivedConstants& d,
                                     Scheme scheme, ServiceTimeCase stc) {
  SchemeSolution out;
  switch (scheme) {
    case Scheme::alg1: {
      auto idx = enumerate_combinations(cfg.n_services, cfg.cache_size);
      std::vector<std::pair<std::vector<double>, std::vector<std::vector<double>>>> warm;
      try {
        auto a3 = run_algorithm3(cfg, d, stc);
        std::vector<double> a(static_cast<std::size_t>(idx.size()), 0.0);
        std::vector<std::vector<double>> b(static_cast<std::size_t>(idx.size()));
        for (int j = 0; j < idx.size(); ++j) {
          const auto& mem = idx.members(j);
          b[static_cast<std::size_t>(j)].assign(mem.size(), 1.0 / static_cast<double>(mem.size()));
        }
        for (const auto& e : a3.solution) {
          const int j = idx.rank(e.combo);
          a[static_cast<std::size_t>(j)] = e.weight;
          b[static_cast<std::size_t>(j)] = e.shares;
        }
        // Nudge shares of empty combinations toward stability so the warm
        // start lies in the barrier domain.
        auto [a0, b0] = find_feasible_start(cfg, d, idx);
        for (int j = 0; j < idx.size(); ++j)
          if (a[static_cast<std::size_t>(j)] == 0.0) b[static_cast<std::size_t>(j)] = b0[static_cast<std::size_t>(j)];
        // Mix a touch of the feasible start to stay strictly stable.
        for (int j = 0; j < idx.size(); ++j)
          a[static_cast<std::size_t>(j)] = 0.98 * a[static_cast<std::size_t>(j)] + 0.02 * a0[static_cast<std::size_t>(j)];
        warm.push_back({a, b});
      } catch (const error&) {
        // near-optimal warm start unavailable; continue with the default start
      }
      auto res = run_algorithm1_multistart(cfg, d, idx, stc, warm);
      out.support = make_support(idx, CachingDistribution{res.a}, ComputingAllocation{res.b});
      out.iterations = res.iterations;
      out.grad_sq = res.grad_sq;
      return out;
    }
    case Scheme::alg3: {
      auto res = run_algorithm3(cfg, d, stc);
      out.support = std::move(res.solution);
      out.iterations = res.cccp_iterations + res.sca_iterations;
      out.grad_sq = res.trace.empty() ? 0.0 : res.trace.back().grad_sq;
      return out;
    }
    case Scheme::ucps: {
      auto r = ucps(cfg);
      out.support = std::move(r.support);
      out.lenient = true;
      out.sampled = r.sampled;
      return out;
    }
    case Scheme::gcps: {
      auto r = gcps(cfg);
      out.support = std::move(r.support);
      out.lenient = true;
      return out;
    }
    case Scheme::tcps: {
      auto r = tcps(cfg, d);
      out.support = std::move(r.support);
      out.lenient = true;
      return out;
    }
    case Scheme::pcos: {
      auto r = pcos(cfg, d, stc);
      out.support = std::move(r.support);
      return out;
    }
  }
  throw invalid_config_error("unreachable scheme");
}

struct SweepSpec {
  enum class Variable { target_delay_scale, f_bs, cache_size };
  Variable variable = Variable::f_bs;
  std::vector<double> grid;
  std::vector<Scheme> schemes;
  std::vector<ServiceTimeCase> cases{ServiceTimeCase::random, ServiceTimeCase::deterministic};
  std::uint64_t seed = 1;
  long long trials = 0; // 0: analytic columns only
  SimConfig sim;
  int threads = 2;

  void check() const {
    if (grid.empty()) throw invalid_config_error("sweep grid must be nonempty");
    if (schemes.empty()) throw invalid_config_error("sweep needs at least one scheme");
    if (cases.empty()) throw invalid_config_error("sweep needs at least one case");
  }

  static const char* variable_name(Variable v) {
    switch (v) {
      case Variable::target_delay_scale: return "R";
      case Variable::f_bs: return "F_bs";
      case Variable::cache_size: return "K";
    }
    return "?";
  }

  static Variable parse_variable(const std::string& name) {
    if (name == "R") return Variable::target_delay_scale;
    if (name == "F_bs" || name == "f_bs") return Variable::f_bs;
    if (name == "K" || name == "cache_size") return Variable::cache_size;
    throw invalid_config_error("unknown sweep variable: " + name);
  }
};

struct SweepRow {
  std::string sweep_var;
  double value = 0.0;
  Scheme scheme = Scheme::alg1;
  ServiceTimeCase stc = ServiceTimeCase::random;
  double ssp_analytic = std::numeric_limits<double>::quiet_NaN();
  double ssp_sim = std::numeric_limits<double>::quiet_NaN();
  double ci_low = std::numeric_limits<double>::quiet_NaN();
  double ci_high = std::numeric_limits<double>::quiet_NaN();
  long long iterations = 0;
  double grad_norm = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
  std::string status = "ok";
};

inline ScenarioConfig scenario_at(const ScenarioConfig& base, SweepSpec::Variable var,
                                  double value) {
  ScenarioConfig cfg = base;
  switch (var) {
    case SweepSpec::Variable::target_delay_scale:
      cfg.scale_target_delays(value);
      break;
    case SweepSpec::Variable::f_bs:
      cfg.f_bs = value;
      break;
    case SweepSpec::Variable::cache_size:
      cfg.cache_size = static_cast<int>(std::llround(value));
      break;
  }
  cfg.validate();
  return cfg;
}

// Runs every (grid value, scheme, case) cell; per-cell failures become rows
// with an error status and the sweep continues. Cells execute concurrently
// with seeds derived per cell, so results are reproducible regardless of the
// thread count.
inline std::vector<SweepRow> run_experiment(const SweepSpec& spec, const ScenarioConfig& base) {
  spec.check();
  struct Cell {
    std::size_t v, s, c;
  };
  std::vector<Cell> cells;
  for (std::size_t v = 0; v < spec.grid.size(); ++v)
    for (std::size_t s = 0; s < spec.schemes.size(); ++s)
      for (std::size_t c = 0; c < spec.cases.size(); ++c) cells.push_back({v, s, c});
  std::vector<SweepRow> rows(cells.size());

  auto run_cell = [&](std::size_t i) {
    const auto& cell = cells[i];
    SweepRow row;
    row.sweep_var = SweepSpec::variable_name(spec.variable);
    row.value = spec.grid[cell.v];
    row.scheme = spec.schemes[cell.s];
    row.stc = spec.cases[cell.c];
    row.seed = split_seed(spec.seed, i);
    try {
      auto cfg = scenario_at(base, spec.variable, row.value);
      auto d = derive_constants(cfg);
      auto sol = compute_scheme(cfg, d, row.scheme, row.stc);
      row.iterations = sol.iterations;
      row.grad_norm = sol.grad_sq;
      const auto policy =
          sol.lenient ? StabilityPolicy::lenient_zero : StabilityPolicy::strict_error;
      auto rep = evaluate_ssp(cfg, d, sol.support, row.stc, policy);
      row.ssp_analytic = rep.total_ssp;
      if (rep.unstable_pairs > 0) row.status = "partial-unstable";
      if (sol.sampled) row.status += row.status == "ok" ? std::string("sampled-combinations")
                                                        : std::string("+sampled-combinations");
      if (spec.trials > 0) {
        SimConfig sim = spec.sim;
        sim.trials = spec.trials;
        auto est = estimate_ssp_sim(cfg, d, sol.support, row.stc, sim, row.seed, policy);
        row.ssp_sim = est.mean;
        row.ci_low = est.ci_low;
        row.ci_high = est.ci_high;
      }
    } catch (const error& e) {
      row.status = std::string("error: ") + e.what();
    }
    rows[i] = std::move(row);
  };

  if (spec.threads > 1) {
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> futs;
    for (int w = 0; w < spec.threads; ++w)
      futs.push_back(std::async(std::launch::async, [&]() {
        for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1))
          run_cell(i);
      }));
    for (auto& f : futs) f.get();
  } else {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  }
  return rows;
}

inline void emit_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "sweep_var,value,scheme,case,ssp_analytic,ssp_sim,ci_low,ci_high,iterations,"
         "grad_norm,seed,status\n";
  char buf[512];
  auto num = [](double v, char* dst, std::size_t cap) {
    if (std::isnan(v))
      dst[0] = '\0';
    else
      std::snprintf(dst, cap, "%.10g", v);
  };
  for (const auto& r : rows) {
    char a[40], s[40], cl[40], ch[40], g[40];
    num(r.ssp_analytic, a, sizeof(a));
    num(r.ssp_sim, s, sizeof(s));
    num(r.ci_low, cl, sizeof(cl));
    num(r.ci_high, ch, sizeof(ch));
    num(r.grad_norm, g, sizeof(g));
    std::snprintf(buf, sizeof(buf), "%s,%.10g,%s,%s,%s,%s,%s,%s,%lld,%s,%llu,%s\n",
                  r.sweep_var.c_str(), r.value, scheme_name(r.scheme), case_name(r.stc), a, s, cl,
                  ch, r.iterations, g, static_cast<unsigned long long>(r.seed), r.status.c_str());
    out << buf;
  }
}

inline void emit_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw error("cannot open output file: " + path);
  emit_csv(rows, out);
}

// Parses the sweep keys of a config file (the scenario keys are read by
// scenario_from_kv on the same file).
inline SweepSpec sweep_from_kv(KeyValueFile& kv) {
  SweepSpec spec;
  spec.variable = SweepSpec::parse_variable(kv.get_string("sweep_var", "F_bs"));
  spec.grid = kv.get_list_free("sweep_grid");
  spec.schemes.clear();
  {
    std::stringstream ss(kv.get_string("schemes", "alg1,alg3,ucps,gcps,tcps,pcos"));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item.erase(0, item.find_first_not_of(" \t"));
      item.erase(item.find_last_not_of(" \t") + 1);
      spec.schemes.push_back(parse_scheme(item));
    }
  }
  spec.cases.clear();
  {
    std::stringstream ss(kv.get_string("cases", "rt,dt"));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item.erase(0, item.find_first_not_of(" \t"));
      item.erase(item.find_last_not_of(" \t") + 1);
      if (item == "rt")
        spec.cases.push_back(ServiceTimeCase::random);
      else if (item == "dt")
        spec.cases.push_back(ServiceTimeCase::deterministic);
      else
        throw invalid_config_error("unknown case: " + item);
    }
  }
  spec.seed = static_cast<std::uint64_t>(kv.get_double("seed", 1));
  spec.trials = static_cast<long long>(kv.get_double("trials", 0));
  spec.sim.window_radius_m = kv.get_double("window_radius_m", 0.0);
  const std::string umode = kv.get_string("uplink_mode", "thinned_ppp");
  if (umode == "thinned_ppp")
    spec.sim.uplink_mode = UplinkMode::thinned_ppp;
  else if (umode == "dependent")
    spec.sim.uplink_mode = UplinkMode::dependent;
  else
    throw invalid_config_error("unknown uplink_mode: " + umode);
  const std::string cmode = kv.get_string("correlation_mode", "independent");
  if (cmode == "independent")
    spec.sim.correlation_mode = CorrelationMode::independent;
  else if (cmode == "joint")
    spec.sim.correlation_mode = CorrelationMode::joint;
  else
    throw invalid_config_error("unknown correlation_mode: " + cmode);
  return spec;
}

// --- analysis-versus-simulation validation ------------------------------------------

struct ValidationLine {
  std::string name;
  double analytic = 0.0;
  double simulated = 0.0;
  double tolerance = 0.0;
  bool pass = true;
  bool informational = false; // reported, never failed
};

struct ValidationSummary {
  std::vector<ValidationLine> lines;
  bool all_passed = true;
};

// Simulator-versus-analysis comparison of SUTP, SDTP, SCPP and the SSP at the
// scenario defaults. Link and queue legs are checked at the uniform-caching
// point (3 sigma of the binomial noise; the thinned uplink additionally at 2%
// relative), the dependent uplink gap and the joint-versus-independent SSP gap
// are reported for the near-optimal operating point.
inline ValidationSummary validate_command(const ScenarioConfig& cfg, long long trials,
                                          std::uint64_t seed, std::ostream* csv = nullptr) {
  if (trials < 1) throw invalid_config_error("validation needs at least one trial");
  ValidationSummary sum;
  auto d = derive_constants(cfg);
  const double t_uniform = static_cast<double>(cfg.cache_size) / cfg.n_services;
  SimConfig sim;
  sim.trials = trials;
  sim.window_radius_m = 2500.0;

  auto push = [&](ValidationLine line) {
    if (!line.informational) {
      line.pass = std::abs(line.simulated - line.analytic) <= line.tolerance;
      sum.all_passed = sum.all_passed && line.pass;
    }
    sum.lines.push_back(line);
  };
  auto sigma3 = [&](double p, long long n) {
    return 3.0 * std::sqrt(std::max(p * (1.0 - p), 1e-12) / static_cast<double>(n));
  };

  // Representative services: least and most popular.
  for (int n : {0, cfg.n_services - 1}) {
    const double ana_u = sutp(d, n, t_uniform);
    auto eu = estimate_sutp(cfg, d, n, t_uniform, sim, split_seed(seed, 10 + n));
    push({"sutp thinned service " + std::to_string(n + 1), ana_u, eu.mean,
          std::max(0.02 * ana_u, sigma3(ana_u, eu.trials))});
    if (csv) emit_estimator_csv(*csv, "sutp", n, eu, sim, seed);

    const double ana_d = sdtp(d, n, t_uniform);
    auto ed = estimate_sdtp(cfg, d, n, t_uniform, sim, split_seed(seed, 20 + n));
    push({"sdtp service " + std::to_string(n + 1), ana_d, ed.mean, sigma3(ana_d, ed.trials)});
    if (csv) emit_estimator_csv(*csv, "sdtp", n, ed, sim, seed);
  }

  // Dependent-mode uplink: the assumption gap is reported, not failed.
  {
    const int n = cfg.n_services - 1;
    auto support = ucps(cfg).support;
    Rng rng(split_seed(seed, 31));
    long long hits = 0;
    const long long scene_trials = std::min<long long>(trials, 4000);
    for (long long i = 0; i < scene_trials; ++i) {
      auto scene = sample_scene(cfg, support, 600.0, split_seed(seed, 1000 + i));
      hits += uplink_success(scene, n, cfg, d, UplinkMode::dependent, rng).value_or(false) ? 1 : 0;
    }
    ValidationLine line;
    line.name = "sutp dependent-mode gap service " + std::to_string(n + 1);
    line.analytic = sutp(d, n, t_uniform);
    line.simulated = static_cast<double>(hits) / static_cast<double>(scene_trials);
    line.informational = true;
    push(line);
  }

  // SCPP at a mid-load queue for the most popular service.
  {
    const int n = cfg.n_services - 1;
    const double lambda = arrival_rate(d, n, t_uniform);
    const double b_share = std::min(1.0, 2.0 * lambda / d.mu[static_cast<std::size_t>(n)]);
    for (auto stc : {ServiceTimeCase::random, ServiceTimeCase::deterministic}) {
      const double ana = stc == ServiceTimeCase::random
                             ? scpp_rt(d, cfg, n, lambda, b_share)
                             : scpp_dt_exact(d, cfg, n, lambda, b_share);
      auto e = estimate_scpp(cfg, d, n, lambda, b_share, stc, sim,
                             split_seed(seed, 40 + static_cast<int>(stc)));
      push({std::string("scpp ") + case_name(stc), ana, e.mean, sigma3(ana, e.trials)});
      if (csv) emit_estimator_csv(*csv, std::string("scpp_") + case_name(stc), n, e, sim, seed);
    }
  }

  // Full SSP at the near-optimal operating point, both correlation modes.
  {
    auto a3 = run_algorithm3(cfg, d, ServiceTimeCase::random);
    for (auto stc : {ServiceTimeCase::random, ServiceTimeCase::deterministic}) {
      const double ana = evaluate_ssp(cfg, d, a3.solution, stc).total_ssp;
      SimConfig s2 = sim;
      s2.window_radius_m = 0.0;
      s2.correlation_mode = CorrelationMode::independent;
      auto ind = estimate_ssp_sim(cfg, d, a3.solution, stc, s2, split_seed(seed, 50));
      push({std::string("ssp independent ") + case_name(stc), ana, ind.mean,
            sigma3(ana, ind.trials)});
      s2.correlation_mode = CorrelationMode::joint;
      auto jnt = estimate_ssp_sim(cfg, d, a3.solution, stc, s2, split_seed(seed, 51));
      ValidationLine gap;
      gap.name = std::string("ssp joint-vs-independent gap ") + case_name(stc);
      gap.analytic = ind.mean;
      gap.simulated = jnt.mean;
      gap.tolerance = 0.02;
      gap.pass = std::abs(jnt.mean - ind.mean) <= 0.02;
      sum.all_passed = sum.all_passed && gap.pass;
      sum.lines.push_back(gap);
      if (csv) {
        emit_estimator_csv(*csv, std::string("ssp_ind_") + case_name(stc), -1, ind, s2, seed);
        emit_estimator_csv(*csv, std::string("ssp_joint_") + case_name(stc), -1, jnt, s2, seed);
      }
    }
  }
  return sum;
}

}  // namespace sspcache
