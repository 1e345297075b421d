#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "sspcache/errors.hpp"

namespace sspcache {

// Euclidean projection onto {x >= 0, sum x = total} (sort-and-threshold).
inline std::vector<double> project_simplex(std::vector<double> y, double total = 1.0) {
  const std::size_t n = y.size();
  std::vector<double> u = y;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  std::size_t rho = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += u[i];
    const double cand = (cum - total) / static_cast<double>(i + 1);
    if (u[i] - cand > 0.0) {
      rho = i + 1;
      tau = cand;
    }
  }
  (void)rho;
  for (auto& v : y) v = std::max(v - tau, 0.0);
  return y;
}

// Euclidean projection onto {x >= lb, sum x = total} via the shift x - lb.
inline std::vector<double> project_simplex_lower(std::vector<double> y,
                                                 const std::vector<double>& lb, double total) {
  double budget = total;
  for (std::size_t i = 0; i < y.size(); ++i) {
    budget -= lb[i];
    y[i] -= lb[i];
  }
  if (budget < 0.0)
    throw infeasibility_error("lower bounds exceed the available budget by " +
                              std::to_string(-budget));
  auto z = project_simplex(std::move(y), budget);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += lb[i];
  return z;
}

// Squared norm of the projected-gradient mapping x - P(x + g): the
// constrained stationarity residual used as the stopping rule.
inline double projected_gradient_sq(const std::vector<double>& x, const std::vector<double>& g,
                                    double total = 1.0) {
  std::vector<double> step(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) step[i] = x[i] + g[i];
  auto p = project_simplex(std::move(step), total);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - p[i];
    s += d * d;
  }
  return s;
}

}  // namespace sspcache
