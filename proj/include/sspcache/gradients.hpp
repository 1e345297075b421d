#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "sspcache/analysis.hpp"

namespace sspcache {

// Value and analytic gradient of the smooth objective
//   P_k(a, b) [+ (1/omega) sum_{n} sum_{j in J_n} log(b_{n,j} mu_n - lambda_n(a))]
// over the dense combination index. P_k uses the differentiable SCPP forms
// (exponential law / sigmoid-approximated series). Services with T_n = 0 are
// inactive: their SSP and barrier terms are skipped (removable singularity).
struct ObjectiveEval {
  double ssp = 0.0;
  double barrier = 0.0;
  double objective = 0.0;
  std::vector<double> grad_a;
  std::vector<std::vector<double>> grad_b;
  bool finite = true; // false when strict queue stability fails somewhere
};

inline ObjectiveEval eval_objective(const ScenarioConfig& cfg, const DerivedConstants& d,
                                    const CombinationIndex& idx, const std::vector<double>& a,
                                    const std::vector<std::vector<double>>& b, ServiceTimeCase stc,
                                    bool with_barrier) {
  const int n_services = cfg.n_services;
  const int n_combos = idx.size();
  ObjectiveEval out;
  out.grad_a.assign(static_cast<std::size_t>(n_combos), 0.0);
  out.grad_b.resize(static_cast<std::size_t>(n_combos));
  for (int j = 0; j < n_combos; ++j)
    out.grad_b[static_cast<std::size_t>(j)].assign(idx.members(j).size(), 0.0);

  std::vector<double> t(static_cast<std::size_t>(n_services), 0.0);
  for (int j = 0; j < n_combos; ++j)
    for (int n : idx.members(j)) t[static_cast<std::size_t>(n)] += a[static_cast<std::size_t>(j)];

  const double inv_omega = with_barrier ? 1.0 / cfg.barrier_omega : 0.0;

  // Per-service pass: S_{n,j}, its partials, and the running sums over J_n.
  struct Pair {
    double s, ds_dlambda, ds_db;
  };
  std::vector<double> q(static_cast<std::size_t>(n_services), 0.0);
  std::vector<double> qp(static_cast<std::size_t>(n_services), 0.0);
  std::vector<double> lam(static_cast<std::size_t>(n_services), 0.0);
  std::vector<double> dlam(static_cast<std::size_t>(n_services), 0.0);
  std::vector<double> w_sum(static_cast<std::size_t>(n_services), 0.0);
  std::vector<double> w_dlam(static_cast<std::size_t>(n_services), 0.0);
  std::vector<double> barrier_inv(static_cast<std::size_t>(n_services), 0.0);
  std::vector<std::vector<Pair>> pairs(static_cast<std::size_t>(n_services));
  std::vector<char> active(static_cast<std::size_t>(n_services), 0);

  for (int n = 0; n < n_services; ++n) {
    const auto ni = static_cast<std::size_t>(n);
    if (t[ni] <= 1e-15) continue;
    active[ni] = 1;
    const double tn = t[ni];
    const double mu_n = d.mu[ni];
    const double gamma = cfg.service(n).gamma_q_s;
    lam[ni] = arrival_rate(d, n, tn);
    dlam[ni] = arrival_rate_derivative(d, n, tn);
    const double den = d.denominator(n, tn);
    const double dden = 2.0 * d.d_n[ni] * tn + d.e_n[ni];
    const double p_n = cfg.service(n).popularity;
    q[ni] = p_n * tn / den;
    qp[ni] = p_n * (den - tn * dden) / (den * den);

    const auto& js = idx.containing(n);
    pairs[ni].resize(js.size());
    for (std::size_t k = 0; k < js.size(); ++k) {
      const int j = js[k];
      const auto& mem = idx.members(j);
      const std::size_t pos = static_cast<std::size_t>(
          std::lower_bound(mem.begin(), mem.end(), n) - mem.begin());
      const double share = b[static_cast<std::size_t>(j)][pos];
      const double rate = share * mu_n;
      const double slack = rate - lam[ni];
      if (slack <= 0.0) {
        out.finite = false;
        out.objective = -std::numeric_limits<double>::infinity();
        return out;
      }
      Pair pr{};
      if (stc == ServiceTimeCase::random) {
        const double e = std::exp(-slack * gamma);
        pr.s = 1.0 - e;
        pr.ds_dlambda = -gamma * e;
        pr.ds_db = gamma * mu_n * e;
      } else {
        const auto r = md1_sojourn_cdf(lam[ni], rate, gamma, dt_outer_cap(d, cfg, n), true,
                                       cfg.sigmoid_delta, share, mu_n);
        pr.s = r.value;
        pr.ds_dlambda = r.d_lambda;
        pr.ds_db = r.d_b;
      }
      pairs[ni][k] = pr;
      const double aj = a[static_cast<std::size_t>(j)];
      w_sum[ni] += aj * pr.s;
      w_dlam[ni] += aj * pr.ds_dlambda;
      if (with_barrier) {
        out.barrier += inv_omega * std::log(slack);
        barrier_inv[ni] += 1.0 / slack;
        out.grad_b[static_cast<std::size_t>(j)][pos] += inv_omega * mu_n / slack;
      }
    }
    out.ssp += q[ni] * w_sum[ni];
  }
  out.objective = out.ssp + out.barrier;

  // grad wrt b: SSP part.
  for (int n = 0; n < n_services; ++n) {
    const auto ni = static_cast<std::size_t>(n);
    if (!active[ni]) continue;
    const auto& js = idx.containing(n);
    for (std::size_t k = 0; k < js.size(); ++k) {
      const int j = js[k];
      const auto& mem = idx.members(j);
      const std::size_t pos = static_cast<std::size_t>(
          std::lower_bound(mem.begin(), mem.end(), n) - mem.begin());
      out.grad_b[static_cast<std::size_t>(j)][pos] +=
          q[ni] * a[static_cast<std::size_t>(j)] * pairs[ni][k].ds_db;
    }
  }

  // grad wrt a_i = sum_{n in N_i} [ Q'_n W_n + Q_n W'_n lambda'_n
  //                                 - (1/omega) lambda'_n sum_j 1/slack ]  +  Q_n S_{n,i}.
  for (int i = 0; i < n_combos; ++i) {
    double g = 0.0;
    for (int n : idx.members(i)) {
      const auto ni = static_cast<std::size_t>(n);
      if (!active[ni]) continue;
      g += qp[ni] * w_sum[ni] + q[ni] * w_dlam[ni] * dlam[ni] -
           inv_omega * dlam[ni] * barrier_inv[ni];
      const auto& js = idx.containing(n);
      const std::size_t k = static_cast<std::size_t>(
          std::lower_bound(js.begin(), js.end(), i) - js.begin());
      g += q[ni] * pairs[ni][k].s;
    }
    out.grad_a[static_cast<std::size_t>(i)] = g;
  }
  return out;
}

// Central finite-difference verification of the analytic gradient along
// random directions (the per-coordinate quotient is meaningless for saturated
// coordinates whose partials vanish). Returns the largest relative mismatch
// between <grad, v> and the central difference of the objective along v.
inline double verify_gradient_fd(const ScenarioConfig& cfg, const DerivedConstants& d,
                                 const CombinationIndex& idx, const std::vector<double>& a,
                                 const std::vector<std::vector<double>>& b, ServiceTimeCase stc,
                                 bool with_barrier, double h = 1e-5, int directions = 8,
                                 std::uint64_t seed = 1234) {
  auto base = eval_objective(cfg, d, idx, a, b, stc, with_barrier);
  double gnorm = 0.0;
  for (double g : base.grad_a) gnorm += g * g;
  for (const auto& gj : base.grad_b)
    for (double g : gj) gnorm += g * g;
  gnorm = std::sqrt(gnorm);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  double worst = 0.0;
  for (int it = 0; it < directions; ++it) {
    std::vector<double> va(a.size());
    std::vector<std::vector<double>> vb(b.size());
    double vnorm = 0.0;
    for (auto& v : va) vnorm += (v = nd(rng)) * v;
    for (std::size_t j = 0; j < b.size(); ++j) {
      vb[j].resize(b[j].size());
      for (auto& v : vb[j]) vnorm += (v = nd(rng)) * v;
    }
    vnorm = std::sqrt(vnorm);
    auto move = [&](double eps) {
      auto ap = a;
      auto bp = b;
      for (std::size_t j = 0; j < a.size(); ++j) ap[j] += eps * va[j] / vnorm;
      for (std::size_t j = 0; j < b.size(); ++j)
        for (std::size_t k = 0; k < b[j].size(); ++k) bp[j][k] += eps * vb[j][k] / vnorm;
      return eval_objective(cfg, d, idx, ap, bp, stc, with_barrier).objective;
    };
    // Richardson-extrapolated central difference: cancels the h^2 truncation
    // term that bites near the steep sigmoid region without shrinking h into
    // roundoff territory.
    const double fd_full = (move(h) - move(-h)) / (2.0 * h);
    const double fd_half = (move(0.5 * h) - move(-0.5 * h)) / h;
    const double fd = (4.0 * fd_half - fd_full) / 3.0;
    double dot = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) dot += base.grad_a[j] * va[j] / vnorm;
    for (std::size_t j = 0; j < b.size(); ++j)
      for (std::size_t k = 0; k < b[j].size(); ++k) dot += base.grad_b[j][k] * vb[j][k] / vnorm;
    const double scale = std::max({std::abs(dot), std::abs(fd), 1e-6 * gnorm, 1e-10});
    worst = std::max(worst, std::abs(dot - fd) / scale);
  }
  return worst;
}

}  // namespace sspcache
