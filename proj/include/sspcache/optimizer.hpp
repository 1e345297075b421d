#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sspcache/analysis.hpp"
#include "sspcache/gradients.hpp"
#include "sspcache/projection.hpp"

namespace sspcache {

// Diminishing step size a0 / (1+r)^gamma; gamma in (0.5, 1] keeps the series
// divergent while the squares stay summable.
struct StepSchedule {
  double a0 = 1.0;
  double exponent = 0.8;
  double at(int r) const { return a0 / std::pow(1.0 + r, exponent); }
};

struct TraceRow {
  int r = 0;
  double objective = 0.0;
  double grad_sq = 0.0;
  double step = 0.0;
};

inline void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw error("cannot open trace file: " + path);
  out << "r,objective,grad_norm_sq,step\n";
  char buf[160];
  for (const auto& row : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g\n", row.r, row.objective, row.grad_sq,
                  row.step);
    out << buf;
  }
}

struct IterateState {
  int r = 0;
  std::vector<double> a;
  std::vector<std::vector<double>> b;
  double step = 0.0;
  std::vector<double> grad_norm_history;
};

// --- feasible initialisation ---------------------------------------------------

// Uniform caching with stability-aware reweighting: mass moves toward
// combinations with positive stability slack until every combination can be
// stabilised by some allocation, then shares get the slack spread equally.
inline std::pair<std::vector<double>, std::vector<std::vector<double>>> find_feasible_start(
    const ScenarioConfig& cfg, const DerivedConstants& d, const CombinationIndex& idx) {
  const int n_combos = idx.size();
  std::vector<double> a(static_cast<std::size_t>(n_combos), 1.0 / n_combos);
  double best_slack = -1e300;

  for (int round = 0; round < 400; ++round) {
    std::vector<double> t(static_cast<std::size_t>(cfg.n_services), 0.0);
    for (int j = 0; j < n_combos; ++j)
      for (int n : idx.members(j)) t[static_cast<std::size_t>(n)] += a[static_cast<std::size_t>(j)];
    std::vector<double> lambda(static_cast<std::size_t>(cfg.n_services), 0.0);
    for (int n = 0; n < cfg.n_services; ++n)
      if (t[static_cast<std::size_t>(n)] > 1e-15)
        lambda[static_cast<std::size_t>(n)] = arrival_rate(d, n, t[static_cast<std::size_t>(n)]);

    std::vector<double> slack(static_cast<std::size_t>(n_combos));
    double worst = 1e300;
    for (int j = 0; j < n_combos; ++j) {
      double load = 0.0;
      for (int n : idx.members(j)) load += lambda[static_cast<std::size_t>(n)] / d.mu[static_cast<std::size_t>(n)];
      slack[static_cast<std::size_t>(j)] = 1.0 - load;
      worst = std::min(worst, slack[static_cast<std::size_t>(j)]);
    }
    best_slack = std::max(best_slack, worst);
    if (worst > 1e-9) {
      // Drop reweighting residue so that inactive services are exactly
      // inactive, then rebuild the stability picture once.
      double norm = 0.0;
      for (auto& v : a) norm += (v = v < 1e-12 ? 0.0 : v);
      for (auto& v : a) v /= norm;
      std::fill(t.begin(), t.end(), 0.0);
      for (int j = 0; j < n_combos; ++j)
        for (int n : idx.members(j)) t[static_cast<std::size_t>(n)] += a[static_cast<std::size_t>(j)];
      for (int n = 0; n < cfg.n_services; ++n)
        lambda[static_cast<std::size_t>(n)] =
            t[static_cast<std::size_t>(n)] > 1e-15 ? arrival_rate(d, n, t[static_cast<std::size_t>(n)]) : 0.0;
      bool still_ok = true;
      std::vector<std::vector<double>> b(static_cast<std::size_t>(n_combos));
      for (int j = 0; j < n_combos; ++j) {
        const auto& mem = idx.members(j);
        double load = 0.0;
        for (int n : mem) load += lambda[static_cast<std::size_t>(n)] / d.mu[static_cast<std::size_t>(n)];
        if (load >= 1.0 - 1e-9) {
          still_ok = false;
          break;
        }
        auto& bj = b[static_cast<std::size_t>(j)];
        bj.resize(mem.size());
        const double extra = (1.0 - load) / static_cast<double>(mem.size());
        for (std::size_t i = 0; i < mem.size(); ++i)
          bj[i] = lambda[static_cast<std::size_t>(mem[i])] / d.mu[static_cast<std::size_t>(mem[i])] + extra;
      }
      if (still_ok) return {a, b};
    }
    // Shift mass toward combinations with more slack; raising T_n of the
    // overloaded services lowers their arrival rates when c_n > A_n.
    double norm = 0.0;
    for (int j = 0; j < n_combos; ++j) {
      a[static_cast<std::size_t>(j)] *=
          std::exp(std::clamp(2.0 * slack[static_cast<std::size_t>(j)], -8.0, 8.0));
      norm += a[static_cast<std::size_t>(j)];
    }
    for (auto& v : a) v /= norm;
  }
  throw infeasibility_error(
      "no strictly queue-stable start exists for this scenario; best achievable slack " +
      std::to_string(best_slack));
}

// --- subproblem solvers ---------------------------------------------------------

// Candidate caching distribution: maximizer of -a'a + c'a over the simplex,
// i.e. the projection of c/2, with c = 2 a^(r) + grad_a(objective).
inline std::vector<double> solve_a_subproblem(const std::vector<double>& a,
                                              const std::vector<double>& grad_a) {
  std::vector<double> c(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) c[j] = a[j] + 0.5 * grad_a[j];
  return project_simplex(std::move(c), 1.0);
}

// The decreasing function whose level set defines the RT share update:
// first term is the SSP derivative with the printed denominator, second the
// log-barrier derivative (mu/omega)/(b mu - lambda).
inline double g_function(const ScenarioConfig& cfg, const DerivedConstants& d, int n, double a_j,
                         double t_n, double lambda_n, double b) {
  const auto i = static_cast<std::size_t>(n);
  const double den =
      cfg.lemma1_consistent_denominator ? d.denominator(n, t_n) : d.denominator_asq(n, t_n);
  const double first = d.j_n[i] * cfg.service(n).popularity * a_j * t_n *
                       std::exp(lambda_n * cfg.service(n).gamma_q_s - b * d.j_n[i]) / den;
  const double slack = b * d.mu[i] - lambda_n;
  return first + d.mu[i] / (cfg.barrier_omega * slack);
}

// RT share block: waterfilling by bisection on the multiplier eta with
// per-coordinate bisection for G^{-1} (G is strictly decreasing).
inline std::vector<double> solve_b_rt(const ScenarioConfig& cfg, const DerivedConstants& d,
                                      const CombinationIndex& idx, int j,
                                      const std::vector<double>& a, const std::vector<double>& t,
                                      const std::vector<double>& lambda) {
  const auto& mem = idx.members(j);
  const std::size_t k = mem.size();
  if (k == 1) return {1.0};
  const double a_j = a[static_cast<std::size_t>(j)];

  std::vector<double> lb(k);
  double lbsum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const int n = mem[i];
    lbsum += (lb[i] = lambda[static_cast<std::size_t>(n)] / d.mu[static_cast<std::size_t>(n)]);
  }
  if (lbsum >= 1.0)
    throw bracket_failure_error("stability lower bounds exceed the share budget in combination " +
                                combo_to_string(mem));

  struct GParts {
    double p, m, lam, mu, j_n; // G(b) = p e^{-b J} + m/(b mu - lam)
  };
  std::vector<GParts> gp(k);
  for (std::size_t i = 0; i < k; ++i) {
    const int n = mem[i];
    const auto ni = static_cast<std::size_t>(n);
    const double den = cfg.lemma1_consistent_denominator
                           ? d.denominator(n, t[ni])
                           : d.denominator_asq(n, t[ni]);
    gp[i] = {d.j_n[ni] * cfg.service(n).popularity * a_j * t[ni] *
                 std::exp(lambda[ni] * cfg.service(n).gamma_q_s) / den,
             d.mu[ni] / cfg.barrier_omega, lambda[ni], d.mu[ni], d.j_n[ni]};
  }
  auto g_at = [&](std::size_t i, double b) {
    return gp[i].p * std::exp(-b * gp[i].j_n) + gp[i].m / (b * gp[i].mu - gp[i].lam);
  };
  auto g_deriv = [&](std::size_t i, double b) {
    const double s = b * gp[i].mu - gp[i].lam;
    return -gp[i].p * gp[i].j_n * std::exp(-b * gp[i].j_n) - gp[i].m * gp[i].mu / (s * s);
  };
  // Safeguarded Newton for G^{-1}(eta) with a maintained bracket.
  auto g_inverse = [&](std::size_t i, double eta, double b_init) {
    double lo = lb[i] * (1.0 + 1e-14) + 1e-300;
    double hi = std::max({1.0, b_init * 2.0, lo * 2.0 + 1.0});
    for (int guard = 0; guard < 2000 && g_at(i, hi) >= eta; ++guard) hi *= 2.0;
    double b = std::min(std::max(b_init, lo + 1e-12), hi);
    for (int it = 0; it < 80; ++it) {
      const double f = g_at(i, b) - eta;
      (f > 0.0 ? lo : hi) = b;
      const double step = f / g_deriv(i, b);
      double next = b - step;
      if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - b) < 1e-15 * std::max(1.0, b)) return next;
      b = next;
    }
    return b;
  };

  // Outer root-find on h(eta) = sum_i G^{-1}(eta) - 1 (strictly decreasing).
  std::vector<double> b(k);
  for (std::size_t i = 0; i < k; ++i) b[i] = lb[i] + (1.0 - lbsum) / static_cast<double>(k);
  double eta = 0.0;
  for (std::size_t i = 0; i < k; ++i) eta = std::max(eta, g_at(i, b[i]));
  double eta_lo = eta, eta_hi = eta;
  auto sum_at = [&](double e) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += (b[i] = std::max(g_inverse(i, e, b[i]), 0.0));
    return s;
  };
  for (int guard = 0; guard < 4000 && sum_at(eta_lo) < 1.0; ++guard) eta_lo *= 0.5;
  for (int guard = 0; guard < 4000 && sum_at(eta_hi) > 1.0; ++guard) eta_hi *= 2.0;
  if (sum_at(eta_lo) < 1.0 || sum_at(eta_hi) > 1.0)
    throw bracket_failure_error("eta bracket failed in combination " + combo_to_string(mem));
  for (int it = 0; it < 90; ++it) {
    eta = std::sqrt(eta_lo * eta_hi); // eta spans many orders of magnitude
    const double s = sum_at(eta);
    if (std::abs(s - 1.0) < 1e-13) break;
    (s > 1.0 ? eta_lo : eta_hi) = eta;
  }
  double s = sum_at(std::sqrt(eta_lo * eta_hi));
  for (auto& v : b) v /= s; // remove the residual root-finding slack exactly
  return b;
}

// DT share block: maximizer of -b'b + c'b over the unit simplex.
inline std::vector<double> solve_b_dt(const std::vector<double>& b_j,
                                      const std::vector<double>& grad_b_j) {
  std::vector<double> c(b_j.size());
  for (std::size_t i = 0; i < b_j.size(); ++i) c[i] = b_j[i] + 0.5 * grad_b_j[i];
  return project_simplex(std::move(c), 1.0);
}

// --- the iteration --------------------------------------------------------------

// Strict queue stability of every (n, j) pair: the barrier domain test.
inline bool is_strictly_stable(const ScenarioConfig& cfg, const DerivedConstants& d,
                               const CombinationIndex& idx, const std::vector<double>& a,
                               const std::vector<std::vector<double>>& b) {
  std::vector<double> t(static_cast<std::size_t>(cfg.n_services), 0.0);
  for (int j = 0; j < idx.size(); ++j)
    for (int n : idx.members(j)) t[static_cast<std::size_t>(n)] += a[static_cast<std::size_t>(j)];
  for (int n = 0; n < cfg.n_services; ++n) {
    const auto ni = static_cast<std::size_t>(n);
    if (t[ni] <= 1e-15) continue;
    const double lambda = arrival_rate(d, n, t[ni]);
    for (int j : idx.containing(n)) {
      const auto& mem = idx.members(j);
      const std::size_t pos = static_cast<std::size_t>(
          std::lower_bound(mem.begin(), mem.end(), n) - mem.begin());
      if (b[static_cast<std::size_t>(j)][pos] * d.mu[ni] - lambda <= 0.0) return false;
    }
  }
  return true;
}

struct Algorithm1Options {
  std::optional<std::pair<std::vector<double>, std::vector<std::vector<double>>>> init;
  bool freeze_a = false; // optimize only the shares (used by the PCOS baseline)
  int max_iterations = 0; // 0: take the scenario default
  bool record_trace = true;
};

struct Algorithm1Result {
  std::vector<double> a;
  std::vector<std::vector<double>> b;
  double ssp = 0.0;
  double objective = 0.0;
  double grad_sq = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<TraceRow> trace;
};

// All block candidates are computed from one frozen snapshot (the parallel
// contract), then combined with the diminishing step. A step that leaves the
// barrier domain is halved until the objective is finite again.
inline void algorithm1_step(const ScenarioConfig& cfg, const DerivedConstants& d,
                            const CombinationIndex& idx, ServiceTimeCase stc,
                            const ObjectiveEval& eval, double alpha, bool freeze_a,
                            std::vector<double>& a, std::vector<std::vector<double>>& b) {
  const int n_combos = idx.size();
  std::vector<double> t(static_cast<std::size_t>(cfg.n_services), 0.0);
  for (int j = 0; j < n_combos; ++j)
    for (int n : idx.members(j)) t[static_cast<std::size_t>(n)] += a[static_cast<std::size_t>(j)];
  std::vector<double> lambda(static_cast<std::size_t>(cfg.n_services), 0.0);
  for (int n = 0; n < cfg.n_services; ++n)
    if (t[static_cast<std::size_t>(n)] > 1e-15)
      lambda[static_cast<std::size_t>(n)] = arrival_rate(d, n, t[static_cast<std::size_t>(n)]);

  std::vector<double> a_hat =
      freeze_a ? a : solve_a_subproblem(a, eval.grad_a);
  std::vector<std::vector<double>> b_hat(static_cast<std::size_t>(n_combos));
  for (int j = 0; j < n_combos; ++j) {
    if (stc == ServiceTimeCase::random)
      b_hat[static_cast<std::size_t>(j)] = solve_b_rt(cfg, d, idx, j, a, t, lambda);
    else
      b_hat[static_cast<std::size_t>(j)] =
          solve_b_dt(b[static_cast<std::size_t>(j)], eval.grad_b[static_cast<std::size_t>(j)]);
  }

  const auto a_old = a;
  const auto b_old = b;
  double factor = alpha;
  for (int attempt = 0; attempt < 60; ++attempt) {
    for (std::size_t j = 0; j < a.size(); ++j)
      a[j] = a_old[j] + factor * (a_hat[j] - a_old[j]);
    for (std::size_t j = 0; j < b.size(); ++j)
      for (std::size_t i = 0; i < b[j].size(); ++i)
        b[j][i] = b_old[j][i] + factor * (b_hat[j][i] - b_old[j][i]);
    if (is_strictly_stable(cfg, d, idx, a, b)) return;
    factor *= 0.5; // keep the iterate strictly queue-stable
  }
  a = a_old;
  b = b_old;
}

inline Algorithm1Result run_algorithm1(const ScenarioConfig& cfg, const DerivedConstants& d,
                                       const CombinationIndex& idx, ServiceTimeCase stc,
                                       const Algorithm1Options& opts = {}) {
  Algorithm1Result res;
  if (opts.init) {
    res.a = opts.init->first;
    res.b = opts.init->second;
    if (!is_strictly_stable(cfg, d, idx, res.a, res.b))
      throw infeasibility_error("supplied initial point is not strictly queue-stable");
  } else {
    auto [a0, b0] = find_feasible_start(cfg, d, idx);
    res.a = std::move(a0);
    res.b = std::move(b0);
  }

  const StepSchedule schedule{cfg.step_a0, cfg.step_exponent};
  const int max_iter = opts.max_iterations > 0 ? opts.max_iterations : cfg.max_iterations;
  const double tau = cfg.grad_tol_tau;

  for (int r = 1; r <= max_iter; ++r) {
    auto eval = eval_objective(cfg, d, idx, res.a, res.b, stc, true);
    if (!eval.finite) throw numeric_error("iterate left the barrier domain");

    double grad_sq = opts.freeze_a ? 0.0 : projected_gradient_sq(res.a, eval.grad_a, 1.0);
    for (std::size_t j = 0; j < res.b.size(); ++j)
      grad_sq += projected_gradient_sq(res.b[j], eval.grad_b[j], 1.0);
    const double alpha = schedule.at(r);
    if (opts.record_trace) res.trace.push_back({r, eval.objective, grad_sq, alpha});
    res.objective = eval.objective;
    res.grad_sq = grad_sq;
    res.iterations = r;
    if (grad_sq < tau) {
      res.converged = true;
      break;
    }
    algorithm1_step(cfg, d, idx, stc, eval, alpha, opts.freeze_a, res.a, res.b);
  }
  res.ssp = evaluate_ssp(cfg, d, idx, CachingDistribution{res.a}, ComputingAllocation{res.b}, stc)
                .total_ssp;
  return res;
}

// Runs Algorithm 1 from several feasible starts and keeps the stationary
// point with the best SSP (the initializer line of the algorithm only asks
// for *a* feasible point; warm starts from the near-optimal solution make the
// ordering SSP(optimal) >= SSP(near-optimal) robust).
inline Algorithm1Result run_algorithm1_multistart(
    const ScenarioConfig& cfg, const DerivedConstants& d, const CombinationIndex& idx,
    ServiceTimeCase stc,
    const std::vector<std::pair<std::vector<double>, std::vector<std::vector<double>>>>& warm,
    const Algorithm1Options& base_opts = {}) {
  Algorithm1Result best;
  bool have = false;
  auto consider = [&](const Algorithm1Result& r) {
    if (!have || r.ssp > best.ssp) {
      best = r;
      have = true;
    }
  };
  consider(run_algorithm1(cfg, d, idx, stc, base_opts));
  for (const auto& w : warm) {
    auto opts = base_opts;
    opts.init = w;
    try {
      consider(run_algorithm1(cfg, d, idx, stc, opts));
    } catch (const error&) {
      // infeasible warm start: skip
    }
  }
  return best;
}

}  // namespace sspcache
