// Test-only oracles, deliberately independent of the library implementation
// paths they are used to check.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

// Adaptive Simpson quadrature (the library uses Gauss-Kronrod).
inline double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                          double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 60);
}

// Z(theta, alpha, c) by truncated integration plus the exact series tail:
// for u > U with U^h > 1, int_U^inf du/(1+u^h) = sum_{k>=1} (-1)^{k+1} U^{1-kh}/(kh-1).
inline double z_integral(double theta, double alpha, int c) {
  if (theta <= 0.0) return 0.0;
  const double lower = c == 0 ? 0.0 : std::pow(1.0 / theta, 2.0 / alpha);
  const double half = alpha / 2.0;
  const double upper = std::max({lower * 2.0, 50.0, std::pow(50.0, 2.0 / half)});
  const double body =
      integrate([half](double u) { return 1.0 / (1.0 + std::pow(u, half)); }, lower, upper);
  double tail = 0.0;
  for (int k = 1; k < 200; ++k) {
    const double term = (k % 2 ? 1.0 : -1.0) * std::pow(upper, 1.0 - k * half) / (k * half - 1.0);
    tail += term;
    if (std::abs(term) < 1e-17) break;
  }
  return std::pow(theta, 2.0 / alpha) * (body + tail);
}

// FIFO single-server queue by Lindley recursion; returns P[sojourn <= deadline].
// deterministic=false draws exponential service times (same mean).
struct QueueSim {
  double lambda, service_mean;
  bool deterministic;

  double p_sojourn_within(double deadline, std::int64_t tasks, std::uint64_t seed,
                          std::int64_t warmup = 100000) const {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> interarrival(lambda);
    std::exponential_distribution<double> service(1.0 / service_mean);
    double wait = 0.0;
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < warmup + tasks; ++i) {
      const double s = deterministic ? service_mean : service(rng);
      const double sojourn = wait + s;
      if (i >= warmup && sojourn <= deadline) ++hits;
      wait = std::max(0.0, sojourn - interarrival(rng));
    }
    return static_cast<double>(hits) / static_cast<double>(tasks);
  }
};

// Euclidean projection onto {x >= lb, sum x = total} (bisection on the shift).
inline std::vector<double> project_box_simplex(std::vector<double> x,
                                               const std::vector<double>& lb, double total) {
  double lo = -1e12, hi = 1e12;
  for (int it = 0; it < 200; ++it) {
    const double tau = 0.5 * (lo + hi);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::max(lb[i], x[i] - tau);
    (s > total ? lo : hi) = tau;
  }
  const double tau = 0.5 * (lo + hi);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::max(lb[i], x[i] - tau);
  return x;
}

// Projected-gradient maximizer over {x >= lb, sum x = total}.
inline std::vector<double> projected_gradient_max(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
    const std::vector<double>& lb, double total, int iters = 20000, double step = 0.05) {
  const double h = 1e-7;
  for (int it = 0; it < iters; ++it) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      g[i] = (f(xp) - f(xm)) / (2.0 * h);
    }
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += step * g[i];
    x = project_box_simplex(std::move(x), lb, total);
  }
  return x;
}

}  // namespace oracle
