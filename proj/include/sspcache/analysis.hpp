#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sspcache/combinations.hpp"
#include "sspcache/errors.hpp"
#include "sspcache/quadrature.hpp"
#include "sspcache/queueing.hpp"
#include "sspcache/scenario.hpp"

namespace sspcache {

enum class ServiceTimeCase { random, deterministic };

inline const char* case_name(ServiceTimeCase c) {
  return c == ServiceTimeCase::random ? "rt" : "dt";
}

// Per-service constants of the closed-form coverage expressions.
struct DerivedConstants {
  std::vector<double> theta_u, theta_d; // SIR thresholds
  std::vector<double> a_u;              // A_n = (p_s/kappa) Z(theta_u, alpha, 0)
  std::vector<double> b_d;              // B_n = (p_s/kappa) Z(theta_d, alpha, 1)
  std::vector<double> c_d;              // C_n = (p_s/kappa) Z(theta_d, alpha, 0)
  std::vector<double> d_n;              // D_n = 1 + B_n - C_n
  std::vector<double> e_n;              // E_n = C_n + A_n D_n
  std::vector<double> mu;               // service rate F_bs / f_n
  std::vector<double> j_n;              // J_n = mu_n * gamma_q_n
  std::vector<double> users_coeff;      // 1.28 p_n p_s lambda_u / lambda_bs

  int size() const { return static_cast<int>(a_u.size()); }

  // Denominator of the closed-form SSP: D T^2 + E T + A C.
  double denominator(int n, double t) const {
    const auto i = static_cast<std::size_t>(n);
    return d_n[i] * t * t + e_n[i] * t + a_u[i] * c_d[i];
  }
  // The Lemma-1 variant replaces the A C product by A^2 as printed.
  double denominator_asq(int n, double t) const {
    const auto i = static_cast<std::size_t>(n);
    return d_n[i] * t * t + e_n[i] * t + a_u[i] * a_u[i];
  }
};

inline DerivedConstants derive_constants(const ScenarioConfig& cfg) {
  DerivedConstants d;
  const int n_services = cfg.n_services;
  const double ps_over_kappa = cfg.p_s / cfg.reuse_kappa;
  auto resize = [&](std::vector<double>& v) { v.resize(static_cast<std::size_t>(n_services)); };
  resize(d.theta_u);
  resize(d.theta_d);
  resize(d.a_u);
  resize(d.b_d);
  resize(d.c_d);
  resize(d.d_n);
  resize(d.e_n);
  resize(d.mu);
  resize(d.j_n);
  resize(d.users_coeff);
  for (int n = 0; n < n_services; ++n) {
    const auto i = static_cast<std::size_t>(n);
    const ServiceSpec& s = cfg.service(n);
    d.theta_u[i] = std::exp2(cfg.reuse_kappa * s.input_bits / (cfg.bandwidth_hz * s.gamma_u_s)) - 1.0;
    d.theta_d[i] = std::exp2(cfg.reuse_kappa * s.output_bits / (cfg.bandwidth_hz * s.gamma_d_s)) - 1.0;
    d.a_u[i] = ps_over_kappa * z_integral(d.theta_u[i], cfg.alpha, 0);
    d.b_d[i] = ps_over_kappa * z_integral(d.theta_d[i], cfg.alpha, 1);
    d.c_d[i] = ps_over_kappa * z_integral(d.theta_d[i], cfg.alpha, 0);
    d.d_n[i] = 1.0 + d.b_d[i] - d.c_d[i];
    d.e_n[i] = d.c_d[i] + d.a_u[i] * d.d_n[i];
    d.mu[i] = cfg.mu(n);
    d.j_n[i] = d.mu[i] * s.gamma_q_s;
    d.users_coeff[i] = 1.28 * s.popularity * cfg.p_s * cfg.density_u / cfg.density_bs;
  }
  return d;
}

// Successful uplink transmission probability (service-centric association,
// interference-limited SIR).
inline double sutp(const DerivedConstants& d, int n, double t_n) {
  if (t_n <= 0.0) return 0.0;
  return t_n / (t_n + d.a_u[static_cast<std::size_t>(n)]);
}

// Successful downlink transmission probability.
inline double sdtp(const DerivedConstants& d, int n, double t_n) {
  if (t_n <= 0.0) return 0.0;
  const auto i = static_cast<std::size_t>(n);
  return t_n / (t_n * (1.0 + d.b_d[i]) + (1.0 - t_n) * d.c_d[i]);
}

// Mean number of users posting requests for service n to its serving BS.
inline double mean_users(const DerivedConstants& d, int n, double t_n) {
  if (t_n <= 0.0)
    throw infeasibility_error("mean_users: service " + std::to_string(n + 1) + " is never cached");
  return 1.0 + d.users_coeff[static_cast<std::size_t>(n)] / t_n;
}

// Task arrival rate at a virtual server: E[N_n] * SUTP. Depends on the caching
// design only through T_n; simplifies to (T_n + c_n) / (T_n + A_n).
inline double arrival_rate(const DerivedConstants& d, int n, double t_n) {
  if (t_n <= 0.0)
    throw infeasibility_error("arrival_rate: service " + std::to_string(n + 1) + " is never cached");
  return mean_users(d, n, t_n) * sutp(d, n, t_n);
}

// d(lambda_n)/d(T_n) = (A_n - c_n) / (T_n + A_n)^2.
inline double arrival_rate_derivative(const DerivedConstants& d, int n, double t_n) {
  const auto i = static_cast<std::size_t>(n);
  const double den = t_n + d.a_u[i];
  return (d.a_u[i] - d.users_coeff[i]) / (den * den);
}

// --- per-(service, combination) computation success probabilities ------------

inline double scpp_rt(const DerivedConstants& d, const ScenarioConfig& cfg, int n, double lambda,
                      double b_share) {
  const double rate = b_share * d.mu[static_cast<std::size_t>(n)];
  return scpp_rt_core(lambda, rate, cfg.service(n).gamma_q_s);
}

inline long long dt_outer_cap(const DerivedConstants& d, const ScenarioConfig& cfg, int n) {
  const double cap = cfg.service(n).gamma_q_s * d.mu[static_cast<std::size_t>(n)];
  return static_cast<long long>(std::floor(cap));
}

inline double scpp_dt_exact(const DerivedConstants& d, const ScenarioConfig& cfg, int n,
                            double lambda, double b_share) {
  const auto i = static_cast<std::size_t>(n);
  const double rate = b_share * d.mu[i];
  auto r = md1_sojourn_cdf(lambda, rate, cfg.service(n).gamma_q_s, dt_outer_cap(d, cfg, n), false,
                           cfg.sigmoid_delta, b_share, d.mu[i]);
  return std::clamp(r.value, 0.0, 1.0);
}

inline double scpp_dt_approx(const DerivedConstants& d, const ScenarioConfig& cfg, int n,
                             double lambda, double b_share) {
  const auto i = static_cast<std::size_t>(n);
  const double rate = b_share * d.mu[i];
  auto r = md1_sojourn_cdf(lambda, rate, cfg.service(n).gamma_q_s, dt_outer_cap(d, cfg, n), true,
                           cfg.sigmoid_delta, b_share, d.mu[i]);
  return std::clamp(r.value, 0.0, 1.0);
}

// SCPP dispatch used by the SSP evaluators: the differentiable forms, i.e.
// the exponential law for RT and the sigmoid-approximated series for DT.
inline double scpp(const DerivedConstants& d, const ScenarioConfig& cfg, ServiceTimeCase stc,
                   int n, double lambda, double b_share) {
  return stc == ServiceTimeCase::random ? scpp_rt(d, cfg, n, lambda, b_share)
                                        : scpp_dt_approx(d, cfg, n, lambda, b_share);
}

// --- successful service probability ------------------------------------------

enum class StabilityPolicy {
  strict_error, // unstable active pair -> queue_unstable_error (the spec contract)
  lenient_zero  // unstable pair contributes SCPP = 0 (its exact steady-state limit)
};

struct SspReport {
  ServiceTimeCase service_time_case = ServiceTimeCase::random;
  struct PerService {
    double t = 0.0;
    double sutp = 0.0;
    double sdtp = 0.0;
    double scpp_weighted = 0.0; // sum_j (a_j/T_n) SCPP_{n,j}
    double contribution = 0.0;  // p_n * product
    bool active = false;
  };
  std::vector<PerService> services;
  double total_ssp = 0.0;      // closed-form route
  double total_factored = 0.0; // factored product route (internal cross-check)
  int unstable_pairs = 0;      // pairs zeroed under the lenient policy
};

inline std::vector<double> t_from_support(const std::vector<SupportEntry>& support,
                                          int n_services) {
  std::vector<double> t(static_cast<std::size_t>(n_services), 0.0);
  for (const auto& e : support)
    for (int n : e.combo) t[static_cast<std::size_t>(n)] += e.weight;
  return t;
}

// Evaluates the SSP of a sparse caching/allocation design. Both the closed
// form (single rational expression per service) and the factored composition
// SUTP*SDTP*sum (a_j/T_n) SCPP are computed; they must agree to ~1e-12.
inline SspReport evaluate_ssp(const ScenarioConfig& cfg, const DerivedConstants& d,
                              const std::vector<SupportEntry>& support, ServiceTimeCase stc,
                              StabilityPolicy policy = StabilityPolicy::strict_error) {
  SspReport rep;
  rep.service_time_case = stc;
  rep.services.resize(static_cast<std::size_t>(cfg.n_services));
  const auto t = t_from_support(support, cfg.n_services);

  for (int n = 0; n < cfg.n_services; ++n) {
    auto& row = rep.services[static_cast<std::size_t>(n)];
    row.t = t[static_cast<std::size_t>(n)];
    if (row.t <= 1e-15) continue; // inactive service: removable 0/0, contributes zero
    row.active = true;
    const double lambda = arrival_rate(d, n, row.t);
    const double mu_n = d.mu[static_cast<std::size_t>(n)];
    double weighted = 0.0; // sum_j a_j * SCPP_{n,j}
    for (const auto& e : support) {
      if (e.weight <= 0.0) continue;
      auto it = std::lower_bound(e.combo.begin(), e.combo.end(), n);
      if (it == e.combo.end() || *it != n) continue;
      const double b_share = e.shares[static_cast<std::size_t>(it - e.combo.begin())];
      if (b_share * mu_n < lambda) {
        if (policy == StabilityPolicy::strict_error)
          throw queue_unstable_error(n, combo_to_string(e.combo), b_share * mu_n, lambda);
        ++rep.unstable_pairs;
        continue;
      }
      weighted += e.weight * scpp(d, cfg, stc, n, lambda, b_share);
    }
    const double p_n = cfg.service(n).popularity;
    row.sutp = sutp(d, n, row.t);
    row.sdtp = sdtp(d, n, row.t);
    row.scpp_weighted = weighted / row.t;
    row.contribution = p_n * row.t * weighted / d.denominator(n, row.t);
    rep.total_ssp += row.contribution;
    rep.total_factored += p_n * row.sutp * row.sdtp * row.scpp_weighted;
  }
  return rep;
}

// Dense-index convenience wrapper.
inline std::vector<SupportEntry> make_support(const CombinationIndex& idx,
                                              const CachingDistribution& a,
                                              const ComputingAllocation& b) {
  std::vector<SupportEntry> support;
  for (int j = 0; j < idx.size(); ++j) {
    const double w = a.a[static_cast<std::size_t>(j)];
    if (w <= 0.0) continue;
    support.push_back({idx.members(j), w, b.b[static_cast<std::size_t>(j)]});
  }
  return support;
}

inline SspReport evaluate_ssp(const ScenarioConfig& cfg, const DerivedConstants& d,
                              const CombinationIndex& idx, const CachingDistribution& a,
                              const ComputingAllocation& b, ServiceTimeCase stc,
                              StabilityPolicy policy = StabilityPolicy::strict_error) {
  return evaluate_ssp(cfg, d, make_support(idx, a, b), stc, policy);
}

// Infinite-capability limit of the SSP; depends on the design only through T.
inline double asymptotic_ssp(const ScenarioConfig& cfg, const DerivedConstants& d,
                             const std::vector<double>& t) {
  double total = 0.0;
  for (int n = 0; n < cfg.n_services; ++n) {
    const double tn = t[static_cast<std::size_t>(n)];
    if (tn <= 0.0) continue;
    total += cfg.service(n).popularity * tn * tn / d.denominator(n, tn);
  }
  return total;
}

inline double asymptotic_ssp_from_support(const ScenarioConfig& cfg, const DerivedConstants& d,
                                          const std::vector<SupportEntry>& support) {
  return asymptotic_ssp(cfg, d, t_from_support(support, cfg.n_services));
}

// d/dT_n of the asymptotic SSP summand: p T (E T + 2 A C) / (D T^2 + E T + A C)^2.
inline double asymptotic_ssp_derivative(const ScenarioConfig& cfg, const DerivedConstants& d,
                                        int n, double t_n) {
  if (t_n <= 0.0) return 0.0;
  const auto i = static_cast<std::size_t>(n);
  const double den = d.denominator(n, t_n);
  return cfg.service(n).popularity * t_n * (d.e_n[i] * t_n + 2.0 * d.a_u[i] * d.c_d[i]) /
         (den * den);
}

// --- feasibility reporting ----------------------------------------------------

struct ValidationIssue {
  std::string constraint;
  double residual = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
};

// Report-style feasibility check of any subset of decision variables.
inline ValidationReport validate_point(const ScenarioConfig& cfg, const DerivedConstants& d,
                                       const std::vector<SupportEntry>* design,
                                       const std::vector<double>* t_opt) {
  ValidationReport rep;
  auto flag = [&rep](const std::string& c, double r, const std::string& det) {
    rep.issues.push_back({c, r, det});
  };
  if (design) {
    double sum = 0.0;
    for (const auto& e : *design) {
      if (e.weight < -1e-12)
        flag("a_j >= 0", -e.weight, "combination " + combo_to_string(e.combo));
      sum += e.weight;
      if (!e.shares.empty()) {
        double bs = 0.0;
        for (double v : e.shares) {
          if (v < -1e-12) flag("b_{n,j} >= 0", -v, "combination " + combo_to_string(e.combo));
          bs += v;
        }
        if (std::abs(bs - 1.0) > 1e-9)
          flag("sum_n b_{n,j} = 1", std::abs(bs - 1.0), "combination " + combo_to_string(e.combo));
      }
    }
    if (std::abs(sum - 1.0) > 1e-9) flag("sum_j a_j = 1", std::abs(sum - 1.0), "");
    // Queue stability where mass is placed.
    const auto t = t_from_support(*design, cfg.n_services);
    for (const auto& e : *design) {
      if (e.weight <= 1e-15 || e.shares.empty()) continue;
      for (std::size_t i = 0; i < e.combo.size(); ++i) {
        const int n = e.combo[i];
        const double tn = t[static_cast<std::size_t>(n)];
        if (tn <= 1e-15) continue;
        const double lambda = arrival_rate(d, n, tn);
        const double rate = e.shares[i] * d.mu[static_cast<std::size_t>(n)];
        if (rate < lambda - 1e-12)
          flag("b mu >= lambda", lambda - rate,
               "service " + std::to_string(n + 1) + " in " + combo_to_string(e.combo));
      }
    }
  }
  if (t_opt) {
    double sum = 0.0;
    for (std::size_t n = 0; n < t_opt->size(); ++n) {
      const double v = (*t_opt)[n];
      if (v < -1e-12) flag("T_n >= 0", -v, "service " + std::to_string(n + 1));
      if (v > 1.0 + 1e-12) flag("T_n <= 1", v - 1.0, "service " + std::to_string(n + 1));
      sum += v;
    }
    if (std::abs(sum - cfg.cache_size) > 1e-9)
      flag("sum_n T_n = K", std::abs(sum - cfg.cache_size), "");
  }
  return rep;
}

}  // namespace sspcache
