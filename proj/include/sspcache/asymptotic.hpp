#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "sspcache/analysis.hpp"
#include "sspcache/lp.hpp"
#include "sspcache/optimizer.hpp"
#include "sspcache/projection.hpp"

namespace sspcache {

// lambda*_n as printed below the subproblem: (T* + C_n)/(T* + A_n); the
// prop1 flag substitutes the Proposition-1 arrival rate (T* + c_n)/(T* + A_n).
inline double lambda_star(const ScenarioConfig& cfg, const DerivedConstants& d, int n,
                          double t_star) {
  const auto i = static_cast<std::size_t>(n);
  const double num = cfg.lambda_star_prop1 ? d.users_coeff[i] : d.c_d[i];
  return (t_star + num) / (t_star + d.a_u[i]);
}

// --- CCCP over the capped simplex ----------------------------------------------

// Gradient of the asymptotic SSP at T (the linearization coefficients).
inline std::vector<double> cccp_linearize(const ScenarioConfig& cfg, const DerivedConstants& d,
                                          const std::vector<double>& t) {
  std::vector<double> g(t.size());
  for (int n = 0; n < cfg.n_services; ++n)
    g[static_cast<std::size_t>(n)] = asymptotic_ssp_derivative(cfg, d, n, t[static_cast<std::size_t>(n)]);
  return g;
}

// argmax of g'T over {0 <= T <= 1, sum T = K}: ones on the K largest
// coefficients, lowest index winning ties.
inline std::vector<double> cccp_step(const std::vector<double>& g, int cache_size) {
  const int n = static_cast<int>(g.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return g[static_cast<std::size_t>(x)] > g[static_cast<std::size_t>(y)];
  });
  std::vector<double> t(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < cache_size; ++i) t[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1.0;
  return t;
}

struct CccpResult {
  std::vector<double> t;
  double p_infinity = 0.0;
  int iterations = 0;
};

inline CccpResult run_cccp(const ScenarioConfig& cfg, const DerivedConstants& d,
                           std::optional<std::vector<double>> init = std::nullopt) {
  CccpResult res;
  res.t = init ? std::move(*init)
               : std::vector<double>(static_cast<std::size_t>(cfg.n_services),
                                     static_cast<double>(cfg.cache_size) / cfg.n_services);
  for (int r = 1; r <= 1000; ++r) {
    res.iterations = r;
    auto g = cccp_linearize(cfg, d, res.t);
    double gsq = 0.0;
    for (double v : g) gsq += v * v;
    auto next = cccp_step(g, cfg.cache_size);
    const bool fixed = std::equal(next.begin(), next.end(), res.t.begin(),
                                  [](double x, double y) { return std::abs(x - y) < 1e-12; });
    res.t = std::move(next);
    if (fixed || gsq < cfg.grad_tol_tau) break;
  }
  res.p_infinity = asymptotic_ssp(cfg, d, res.t);
  return res;
}

// --- combination pruning --------------------------------------------------------

// Dense form of the excluded set: a combination is pruned if it contains a
// never-cached service or misses an always-cached one. For binary T* exactly
// one combination survives.
struct PrunedIndex {
  std::vector<char> excluded; // per dense combination index
  std::vector<int> active;    // surviving dense indices
};

inline bool t_star_is_binary(const std::vector<double>& t) {
  for (double v : t)
    if (std::abs(v) > 1e-9 && std::abs(v - 1.0) > 1e-9) return false;
  return true;
}

inline PrunedIndex prune(const std::vector<double>& t_star, const CombinationIndex& idx) {
  PrunedIndex out;
  out.excluded.assign(static_cast<std::size_t>(idx.size()), 0);
  const bool binary = t_star_is_binary(t_star);
  for (int j = 0; j < idx.size(); ++j) {
    bool drop = false;
    for (int n : idx.members(j))
      if (t_star[static_cast<std::size_t>(n)] <= 1e-9) drop = true;
    if (binary && !drop) {
      // must contain every always-cached service
      for (int n = 0; n < idx.n_services && !drop; ++n)
        if (t_star[static_cast<std::size_t>(n)] >= 1.0 - 1e-9) {
          const auto& mem = idx.members(j);
          if (!std::binary_search(mem.begin(), mem.end(), n)) drop = true;
        }
    }
    out.excluded[static_cast<std::size_t>(j)] = drop ? 1 : 0;
    if (!drop) out.active.push_back(j);
  }
  return out;
}

// Support-form pruning for binary T*: the single surviving combination.
inline std::vector<int> active_combo_for_binary(const std::vector<double>& t_star) {
  std::vector<int> combo;
  for (int n = 0; n < static_cast<int>(t_star.size()); ++n)
    if (t_star[static_cast<std::size_t>(n)] >= 1.0 - 1e-9) combo.push_back(n);
  return combo;
}

// --- RT branch: closed-form shares and the master LP ----------------------------

// Multiplier and closed-form shares of the per-combination subproblem. The
// multiplier is derived for the squared-numerator form so the shares sum to
// one exactly; each share strictly exceeds lambda*_n/mu_n.
inline std::vector<double> rt_closed_form_b(const ScenarioConfig& cfg, const DerivedConstants& d,
                                            const std::vector<double>& t_star,
                                            const std::vector<int>& combo,
                                            double* zeta_out = nullptr) {
  const std::size_t k = combo.size();
  std::vector<double> s_n(k), ls(k), inv_j(k);
  double sum_inv = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const int n = combo[i];
    const auto ni = static_cast<std::size_t>(n);
    const double ts = t_star[ni];
    if (ts <= 0.0) throw infeasibility_error("closed-form shares need T*_n > 0 on the combination");
    const double den = cfg.lemma1_consistent_denominator ? d.denominator(n, ts)
                                                         : d.denominator_asq(n, ts);
    s_n[i] = std::log(d.j_n[ni] * cfg.service(n).popularity * ts * ts / den);
    ls[i] = lambda_star(cfg, d, n, ts);
    inv_j[i] = 1.0 / d.j_n[ni];
    sum_inv += inv_j[i];
    acc += inv_j[i] * (s_n[i] + ls[i] * cfg.service(n).gamma_q_s);
  }
  const double log_zeta = (acc - 1.0) / sum_inv;
  if (zeta_out) *zeta_out = std::exp(log_zeta);
  std::vector<double> b(k);
  for (std::size_t i = 0; i < k; ++i) {
    const int n = combo[i];
    b[i] = inv_j[i] * (s_n[i] - log_zeta + ls[i] * cfg.service(n).gamma_q_s);
    if (b[i] * d.mu[static_cast<std::size_t>(n)] <= ls[i])
      throw numeric_error("closed-form share fell below its stability bound");
  }
  return b;
}

// Master LP over the active combinations: maximize sum_j coeff_j a_j subject
// to sum_{j in J_n} a_j = T*_n and a >= 0. Returns the distribution and the
// dual vector w with the strong-duality residual |primal - w'T*|.
struct MasterLpResult {
  std::vector<double> a; // over the active list
  std::vector<double> duals;
  double objective = 0.0;
  double duality_residual = 0.0;
};

inline MasterLpResult master_lp(const std::vector<double>& t_star,
                                const std::vector<std::vector<int>>& active_combos,
                                const std::vector<double>& coeff) {
  const int cols = static_cast<int>(active_combos.size());
  std::vector<int> rows_services;
  for (int n = 0; n < static_cast<int>(t_star.size()); ++n)
    if (t_star[static_cast<std::size_t>(n)] > 1e-12) rows_services.push_back(n);
  const int rows = static_cast<int>(rows_services.size());
  std::vector<std::vector<double>> a_mat(static_cast<std::size_t>(rows),
                                         std::vector<double>(static_cast<std::size_t>(cols), 0.0));
  std::vector<double> rhs(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r) rhs[static_cast<std::size_t>(r)] = t_star[static_cast<std::size_t>(rows_services[static_cast<std::size_t>(r)])];
  for (int c = 0; c < cols; ++c)
    for (int n : active_combos[static_cast<std::size_t>(c)]) {
      const auto it = std::lower_bound(rows_services.begin(), rows_services.end(), n);
      if (it != rows_services.end() && *it == n)
        a_mat[static_cast<std::size_t>(it - rows_services.begin())][static_cast<std::size_t>(c)] = 1.0;
    }
  auto sol = solve_lp_equality(a_mat, rhs, coeff);
  MasterLpResult out;
  out.a = sol.x;
  out.objective = sol.objective;
  out.duals.assign(t_star.size(), 0.0);
  double dual_obj = 0.0;
  for (int r = 0; r < rows; ++r) {
    out.duals[static_cast<std::size_t>(rows_services[static_cast<std::size_t>(r)])] =
        sol.duals[static_cast<std::size_t>(r)];
    dual_obj += sol.duals[static_cast<std::size_t>(r)] * rhs[static_cast<std::size_t>(r)];
  }
  out.duality_residual = std::abs(sol.objective - dual_obj);
  return out;
}

inline MasterLpResult rt_master_lp(const ScenarioConfig& cfg, const DerivedConstants& d,
                                   const std::vector<double>& t_star,
                                   const std::vector<std::vector<int>>& active_combos,
                                   const std::vector<double>& zeta) {
  std::vector<double> coeff(active_combos.size());
  for (std::size_t c = 0; c < active_combos.size(); ++c) {
    double s = 0.0;
    for (int n : active_combos[c]) s += zeta[c] / d.j_n[static_cast<std::size_t>(n)];
    coeff[c] = -s;
  }
  return master_lp(t_star, active_combos, coeff);
}

// --- DT branch: LP in a, projected QP in b ---------------------------------------

// Per-combination coefficient of the affine objective in a (the G_j of the
// dual constraint set), with T and lambda frozen at the asymptotic solution.
inline double dt_a_coefficient(const ScenarioConfig& cfg, const DerivedConstants& d,
                               const std::vector<double>& t_star, const std::vector<int>& combo,
                               const std::vector<double>& b_j) {
  double g = 0.0;
  for (std::size_t i = 0; i < combo.size(); ++i) {
    const int n = combo[i];
    const auto ni = static_cast<std::size_t>(n);
    const double ts = t_star[ni];
    if (ts <= 0.0) continue;
    const double ls = lambda_star(cfg, d, n, ts);
    const double v = md1_sojourn_cdf(ls, b_j[i] * d.mu[ni], cfg.service(n).gamma_q_s,
                                     dt_outer_cap(d, cfg, n), true, cfg.sigmoid_delta, b_j[i],
                                     d.mu[ni])
                         .value;
    g += cfg.service(n).popularity * ts * v / d.denominator(n, ts);
  }
  return g;
}

struct DtFrozenEval {
  double value = 0.0;
  std::vector<double> grad_a;                // over active combos
  std::vector<std::vector<double>> grad_b;   // per active combo
};

// P_d(a, b, T*) with T and lambda frozen at the asymptotic solution: affine in
// a, smooth in b.
inline DtFrozenEval dt_frozen_eval(const ScenarioConfig& cfg, const DerivedConstants& d,
                                   const std::vector<double>& t_star,
                                   const std::vector<std::vector<int>>& active_combos,
                                   const std::vector<double>& a,
                                   const std::vector<std::vector<double>>& b) {
  DtFrozenEval out;
  out.grad_a.assign(active_combos.size(), 0.0);
  out.grad_b.resize(active_combos.size());
  for (std::size_t c = 0; c < active_combos.size(); ++c) {
    const auto& combo = active_combos[c];
    out.grad_b[c].assign(combo.size(), 0.0);
    double coeff = 0.0;
    for (std::size_t i = 0; i < combo.size(); ++i) {
      const int n = combo[i];
      const auto ni = static_cast<std::size_t>(n);
      const double ts = t_star[ni];
      if (ts <= 0.0) continue;
      const double ls = lambda_star(cfg, d, n, ts);
      const auto r = md1_sojourn_cdf(ls, b[c][i] * d.mu[ni], cfg.service(n).gamma_q_s,
                                     dt_outer_cap(d, cfg, n), true, cfg.sigmoid_delta, b[c][i],
                                     d.mu[ni]);
      const double q = cfg.service(n).popularity * ts / d.denominator(n, ts);
      coeff += q * r.value;
      out.grad_b[c][i] = a[c] * q * r.d_b;
    }
    out.grad_a[c] = coeff;
    out.value += a[c] * coeff;
  }
  return out;
}

// One LP step of the a-block (coefficients from the frozen evaluation),
// returning the candidate and the dual residual of the step's LP.
inline MasterLpResult dt_a_lp_step(const ScenarioConfig& cfg, const DerivedConstants& d,
                                   const std::vector<double>& t_star,
                                   const std::vector<std::vector<int>>& active_combos,
                                   const std::vector<std::vector<double>>& b) {
  std::vector<double> coeff(active_combos.size());
  for (std::size_t c = 0; c < active_combos.size(); ++c)
    coeff[c] = dt_a_coefficient(cfg, d, t_star, active_combos[c], b[c]);
  return master_lp(t_star, active_combos, coeff);
}

// One projected-QP step of a b-block over {b >= lambda*/mu, sum b = 1}.
inline std::vector<double> dt_b_qp_step(const ScenarioConfig& cfg, const DerivedConstants& d,
                                        const std::vector<double>& t_star,
                                        const std::vector<int>& combo,
                                        const std::vector<double>& b_j,
                                        const std::vector<double>& grad_b_j) {
  std::vector<double> lb(combo.size());
  double need = 0.0;
  for (std::size_t i = 0; i < combo.size(); ++i) {
    const int n = combo[i];
    need += (lb[i] = lambda_star(cfg, d, n, t_star[static_cast<std::size_t>(n)]) /
                     d.mu[static_cast<std::size_t>(n)]);
  }
  if (need > 1.0)
    throw infeasibility_error("stability lower bounds exceed the share budget: sum lambda*/mu = " +
                              std::to_string(need));
  std::vector<double> c(b_j.size());
  for (std::size_t i = 0; i < b_j.size(); ++i) c[i] = b_j[i] + 0.5 * grad_b_j[i];
  return project_simplex_lower(std::move(c), lb, 1.0);
}

// --- Algorithm 3 ------------------------------------------------------------------

struct Algorithm3Result {
  std::vector<double> t_star;
  std::vector<SupportEntry> solution; // active combinations with weights and shares
  double ssp = 0.0;
  double p_infinity = 0.0;
  int cccp_iterations = 0;
  int sca_iterations = 0;
  double duality_residual = 0.0;
  std::vector<TraceRow> trace;
};

inline Algorithm3Result run_algorithm3(const ScenarioConfig& cfg, const DerivedConstants& d,
                                       ServiceTimeCase stc) {
  Algorithm3Result res;
  auto cccp = run_cccp(cfg, d);
  res.t_star = cccp.t;
  res.p_infinity = cccp.p_infinity;
  res.cccp_iterations = cccp.iterations;

  // Pruning: with a binary T* exactly one combination survives; otherwise the
  // block-filling support of T* provides the active columns.
  std::vector<std::vector<int>> active;
  std::vector<double> a;
  if (t_star_is_binary(res.t_star)) {
    active.push_back(active_combo_for_binary(res.t_star));
    a.assign(1, 1.0);
  } else {
    for (auto& e : a_support_from_t(res.t_star, cfg.cache_size)) {
      active.push_back(e.combo);
      a.push_back(e.weight);
    }
  }

  std::vector<std::vector<double>> b(active.size());

  if (stc == ServiceTimeCase::random) {
    std::vector<double> zeta(active.size());
    for (std::size_t c = 0; c < active.size(); ++c)
      b[c] = rt_closed_form_b(cfg, d, res.t_star, active[c], &zeta[c]);
    auto lp = rt_master_lp(cfg, d, res.t_star, active, zeta);
    a = lp.a;
    res.duality_residual = lp.duality_residual;
  } else {
    // Parallel SCA with LP a-steps and projected QP b-steps.
    for (std::size_t c = 0; c < active.size(); ++c) {
      const auto& combo = active[c];
      std::vector<double> lb(combo.size());
      double need = 0.0;
      for (std::size_t i = 0; i < combo.size(); ++i)
        need += (lb[i] = lambda_star(cfg, d, combo[i],
                                     res.t_star[static_cast<std::size_t>(combo[i])]) /
                         d.mu[static_cast<std::size_t>(combo[i])]);
      if (need > 1.0)
        throw infeasibility_error("DT branch infeasible: sum lambda*/mu = " +
                                  std::to_string(need));
      b[c].assign(combo.size(), 0.0);
      for (std::size_t i = 0; i < combo.size(); ++i)
        b[c][i] = lb[i] + (1.0 - need) / static_cast<double>(combo.size());
    }
    const StepSchedule schedule{cfg.step_a0, cfg.step_exponent};
    for (int r = 1; r <= cfg.max_iterations; ++r) {
      res.sca_iterations = r;
      auto eval = dt_frozen_eval(cfg, d, res.t_star, active, a, b);
      // Projected stationarity over the product polytope.
      double grad_sq = 0.0;
      {
        // a-polytope: push the candidate LP step; the mapping residual uses
        // the same equality structure via the Euclidean projection of a + g.
        std::vector<double> y(a.size());
        for (std::size_t c = 0; c < a.size(); ++c) y[c] = a[c] + eval.grad_a[c];
        // project y onto {a >= 0, sum_{j in J_n} a_j = T*_n}: for the single-
        // combination fast path this is the fixed point itself.
        if (a.size() == 1) {
          grad_sq += 0.0;
        } else {
          // alternating projection is overkill here; measure stationarity by
          // the LP gap instead: max_a' g'(a'-a) over the polytope.
          auto lp = master_lp(res.t_star, active, eval.grad_a);
          double cur = 0.0;
          for (std::size_t c = 0; c < a.size(); ++c) cur += eval.grad_a[c] * a[c];
          grad_sq += std::max(0.0, lp.objective - cur);
        }
      }
      for (std::size_t c = 0; c < active.size(); ++c) {
        std::vector<double> lb(active[c].size());
        for (std::size_t i = 0; i < active[c].size(); ++i)
          lb[i] = lambda_star(cfg, d, active[c][i],
                              res.t_star[static_cast<std::size_t>(active[c][i])]) /
                  d.mu[static_cast<std::size_t>(active[c][i])];
        std::vector<double> y(b[c].size());
        for (std::size_t i = 0; i < b[c].size(); ++i) y[i] = b[c][i] + eval.grad_b[c][i];
        auto p = project_simplex_lower(std::move(y), lb, 1.0);
        for (std::size_t i = 0; i < b[c].size(); ++i) {
          const double dd = b[c][i] - p[i];
          grad_sq += dd * dd;
        }
      }
      const double alpha = schedule.at(r);
      res.trace.push_back({r, eval.value, grad_sq, alpha});
      if (grad_sq < cfg.grad_tol_tau) break;

      auto lp = dt_a_lp_step(cfg, d, res.t_star, active, b);
      res.duality_residual = std::max(res.duality_residual, lp.duality_residual);
      for (std::size_t c = 0; c < a.size(); ++c) a[c] += alpha * (lp.a[c] - a[c]);
      for (std::size_t c = 0; c < active.size(); ++c) {
        auto cand = dt_b_qp_step(cfg, d, res.t_star, active[c], b[c], eval.grad_b[c]);
        for (std::size_t i = 0; i < b[c].size(); ++i) b[c][i] += alpha * (cand[i] - b[c][i]);
      }
    }
  }

  res.solution.clear();
  for (std::size_t c = 0; c < active.size(); ++c)
    if (a[c] > 1e-15) res.solution.push_back({active[c], a[c], b[c]});
  res.ssp = evaluate_ssp(cfg, d, res.solution, stc, StabilityPolicy::strict_error).total_ssp;
  return res;
}

}  // namespace sspcache
