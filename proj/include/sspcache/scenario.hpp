#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sspcache/errors.hpp"

namespace sspcache {

// Per-service task description: request popularity, task sizes, workload and
// the three target delays (uplink, computation, downlink).
struct ServiceSpec {
  double popularity = 0.0;
  double input_bits = 420e3;
  double output_bits = 42e3;
  double workload_cycles = 3e5;
  double gamma_u_s = 0.84;
  double gamma_q_s = 1.0;
  double gamma_d_s = 0.084;
};

// Zipf popularity exactly as printed in the source model: p_n ∝ n^epsilon,
// so positive exponents make higher indices more popular. `negate` flips the
// sign for the conventional n^-epsilon law.
inline std::vector<double> zipf_popularity(int n_services, double epsilon, bool negate = false) {
  if (n_services < 1) throw invalid_config_error("zipf_popularity: need at least one service");
  const double e = negate ? -epsilon : epsilon;
  std::vector<double> p(static_cast<std::size_t>(n_services));
  double sum = 0.0;
  for (int n = 0; n < n_services; ++n) {
    p[n] = std::pow(static_cast<double>(n + 1), e);
    sum += p[n];
  }
  for (double& v : p) v /= sum;
  return p;
}

// All physical-layer, service and solver parameters of one scenario.
struct ScenarioConfig {
  double alpha = 4.0;        // path-loss exponent, > 2
  double bandwidth_hz = 1e7; // W
  int reuse_kappa = 30;      // frequency reuse factor
  double p_s = 1.0;          // per-slot request probability
  double density_bs = 5e-4;  // BS density [nodes/m^2]
  double density_u = 3e-3;   // user density [nodes/m^2]
  double f_bs = 7.5e6;       // EC server capability [cycles/s]

  int n_services = 10; // N
  int cache_size = 3;  // K
  std::vector<ServiceSpec> services;

  double sigmoid_delta = 100.0;  // Hausdorff cut radius
  double barrier_omega = 1000.0; // log-barrier weight
  double grad_tol_tau = 1e-4;    // stationarity tolerance
  double zipf_exponent = 1.1;
  bool zipf_negate = false;

  // Transmit powers are part of the scenario description but cancel out of
  // every interference-limited expression; carried for completeness.
  double power_bs_w = 1.0;
  double power_u_w = 0.1;

  // Solver knobs.
  double step_a0 = 1.0;
  double step_exponent = 0.8; // must lie in (0.5, 1]
  int max_iterations = 5000;
  bool lemma1_consistent_denominator = false; // false: A_n^2 as printed
  bool lambda_star_prop1 = false;             // false: (T+C)/(T+A) as printed

  int service_count() const { return n_services; }

  const ServiceSpec& service(int n) const { return services[static_cast<std::size_t>(n)]; }

  double mu(int n) const { return f_bs / service(n).workload_cycles; }

  // Fills `services` with uniform task parameters and Zipf popularity.
  void populate_default_services() {
    services.assign(static_cast<std::size_t>(n_services), ServiceSpec{});
    auto p = zipf_popularity(n_services, zipf_exponent, zipf_negate);
    for (int n = 0; n < n_services; ++n) services[static_cast<std::size_t>(n)].popularity = p[n];
  }

  // Scales all three target delays jointly: gamma = R * gamma_o.
  void scale_target_delays(double r) {
    if (r <= 0) throw invalid_config_error("target-delay scale must be positive");
    for (auto& s : services) {
      s.gamma_u_s *= r;
      s.gamma_q_s *= r;
      s.gamma_d_s *= r;
    }
  }

  void validate() const {
    if (alpha <= 2.0) throw invalid_config_error("path-loss exponent must exceed 2");
    if (bandwidth_hz <= 0) throw invalid_config_error("bandwidth must be positive");
    if (reuse_kappa < 1) throw invalid_config_error("reuse factor must be a positive integer");
    if (p_s < 0.0 || p_s > 1.0) throw invalid_config_error("p_s must lie in [0,1]");
    if (density_bs <= 0 || density_u < 0) throw invalid_config_error("densities must be positive");
    if (f_bs <= 0) throw invalid_config_error("computing capability must be positive");
    if (cache_size < 1 || cache_size > n_services)
      throw invalid_config_error("cache size must satisfy 1 <= K <= N");
    if (static_cast<int>(services.size()) != n_services)
      throw invalid_config_error("service table size does not match n_services");
    if (sigmoid_delta <= 0) throw invalid_config_error("sigmoid cut radius must be positive");
    if (barrier_omega <= 0) throw invalid_config_error("barrier weight must be positive");
    if (step_exponent <= 0.5 || step_exponent > 1.0)
      throw invalid_config_error("step exponent must lie in (0.5, 1]");
    double psum = 0.0;
    for (const auto& s : services) {
      if (s.popularity < -1e-12) throw invalid_config_error("popularities must be nonnegative");
      if (s.input_bits <= 0 || s.output_bits <= 0 || s.workload_cycles <= 0)
        throw invalid_config_error("task sizes and workloads must be strictly positive");
      if (s.gamma_u_s <= 0 || s.gamma_q_s <= 0 || s.gamma_d_s <= 0)
        throw invalid_config_error("target delays must be strictly positive");
      psum += s.popularity;
    }
    if (std::abs(psum - 1.0) > 1e-12)
      throw invalid_config_error("popularities must sum to 1, got " + std::to_string(psum));
  }
};

// The reference scenario: every parameter of the default evaluation setup.
inline ScenarioConfig default_scenario() {
  ScenarioConfig cfg;
  cfg.populate_default_services();
  cfg.validate();
  return cfg;
}

}  // namespace sspcache
