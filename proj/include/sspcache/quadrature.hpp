#pragma once

#include <cmath>
#include <functional>

#include "sspcache/errors.hpp"

namespace sspcache {
namespace detail {

// 15-point Gauss-Kronrod rule with embedded 7-point Gauss estimate.
inline void gk15(const std::function<double(double)>& f, double a, double b, double& result,
                 double& err) {
  static const double xk[8] = {0.0,
                               0.2077849550078985,
                               0.4058451513773972,
                               0.5860872354676911,
                               0.7415311855993945,
                               0.8648644233597691,
                               0.9491079123427585,
                               0.9914553711208126};
  static const double wk[8] = {0.2094821410847278, 0.2044329400752989, 0.1903505780647854,
                               0.1690047266392679, 0.1406532597155259, 0.1047900103222502,
                               0.0630920926299786, 0.0229353220105292};
  static const double wg[4] = {0.4179591836734694, 0.3818300505051189, 0.2797053914892767,
                               0.1294849661688697};

  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double rk = wk[0] * f(c);
  double rg = wg[0] * f(c);
  for (int i = 1; i < 8; ++i) {
    const double fv = f(c - h * xk[i]) + f(c + h * xk[i]);
    rk += wk[i] * fv;
    if (i % 2 == 0) rg += wg[i / 2] * fv;
  }
  result = rk * h;
  err = std::abs((rk - rg) * h);
}

inline double adaptive_gk(const std::function<double(double)>& f, double a, double b, double tol,
                          int depth = 0) {
  double r, e;
  gk15(f, a, b, r, e);
  if (e <= tol || depth > 48) {
    if (depth > 48 && e > 1e3 * tol) throw numeric_error("adaptive quadrature failed to converge");
    return r;
  }
  const double m = 0.5 * (a + b);
  return adaptive_gk(f, a, m, 0.5 * tol, depth + 1) + adaptive_gk(f, m, b, 0.5 * tol, depth + 1);
}

}  // namespace detail

// Z(theta, alpha, c) = theta^{2/alpha} * int_{(c/theta)^{2/alpha}}^inf du / (1 + u^{alpha/2}),
// the interference integral behind every coverage expression. alpha = 4 has an
// arctangent closed form; other exponents go through adaptive Gauss-Kronrod
// with the tail substituted by u -> 1/v.
inline double z_integral(double theta, double alpha, int c) {
  if (theta < 0) throw invalid_config_error("z_integral: theta must be nonnegative");
  if (alpha <= 2) throw invalid_config_error("z_integral: alpha must exceed 2");
  if (c != 0 && c != 1) throw invalid_config_error("z_integral: c must be 0 or 1");
  if (theta == 0.0) return 0.0;

  if (alpha == 4.0) {
    const double st = std::sqrt(theta);
    // int_0^inf = pi/2; with lower limit 1/sqrt(theta): atan(sqrt(theta)).
    return c == 0 ? st * (M_PI / 2.0) : st * std::atan(st);
  }

  const double lower = c == 0 ? 0.0 : std::pow(1.0 / theta, 2.0 / alpha);
  const double half = alpha / 2.0;
  const double tol = 1e-12;
  const double split = std::max(lower, 1.0);
  double integral = 0.0;
  if (split > lower)
    integral += detail::adaptive_gk([half](double u) { return 1.0 / (1.0 + std::pow(u, half)); },
                                    lower, split, tol);
  // Tail: int_split^inf du/(1+u^{alpha/2}) = int_0^{1/split} v^{alpha/2-2}/(1+v^{alpha/2}) dv,
  // then v = w^{1/s} with s = alpha/2 - 1 to remove the endpoint singularity:
  //      = (1/s) int_0^{(1/split)^s} dw / (1 + w^{alpha/(alpha-2)}).
  const double s = half - 1.0;
  const double expo = half / s;
  integral += detail::adaptive_gk(
                  [expo](double w) { return w <= 0.0 ? 1.0 : 1.0 / (1.0 + std::pow(w, expo)); },
                  0.0, std::pow(1.0 / split, s), tol) /
              s;
  return std::pow(theta, 2.0 / alpha) * integral;
}

}  // namespace sspcache
