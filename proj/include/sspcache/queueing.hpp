#pragma once

#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "sspcache/errors.hpp"

namespace sspcache {

// P[sojourn <= gamma] in an M/M/1 queue with service rate `rate` and Poisson
// arrivals `lambda`; the sojourn time is exponential with rate (rate-lambda).
inline double scpp_rt_core(double lambda, double rate, double gamma) {
  if (rate < lambda) throw queue_unstable_error("M/M/1 service rate below arrival rate");
  return -std::expm1(-(rate - lambda) * gamma);
}

// Logistic sigmoid replacement for the step indicator, evaluated in the
// overflow-safe branch: sigma(x) = e^{-delta x} / (1 + e^{-delta x}).
inline double sigmoid_indicator(double xi_minus_target, double delta) {
  const double z = delta * xi_minus_target;
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

struct Md1Result {
  double value = 0.0;
  double d_lambda = 0.0; // partial w.r.t. the arrival rate
  double d_b = 0.0;      // partial w.r.t. the share b (approximate mode only)
  double max_term = 0.0; // conditioning diagnostic
};

namespace detail {

class Mp {
 public:
  Mp() { mpfr_init2(v_, 256); mpfr_set_zero(v_, 1); }
  ~Mp() { mpfr_clear(v_); }
  Mp(const Mp&) = delete;
  Mp& operator=(const Mp&) = delete;
  mpfr_ptr get() { return v_; }
  double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }

 private:
  mutable mpfr_t v_;
};

struct Md1Sums {
  double s0 = 0.0; // sum w*s
  double s1 = 0.0; // sum (u-w)*arg*s
  double s2 = 0.0; // sum (u-w)*s
  double s3 = 0.0; // sum w*ds/db
  double max_term = 0.0;
};

// Terms of the waiting-time series at budget t = gamma - 1/rate:
//   w_xi = y^xi e^{-y}/xi!,  u_xi = y^{xi-1} e^{-y}/(xi-1)!,  y = lambda*arg,
//   arg  = (xi+1)/rate - gamma.
// `use_sigmoid` weighs terms by the logistic indicator centred at t*rate.
template <bool UseMpfr>
inline Md1Sums md1_sums(double lambda, double rate, double gamma, long long upper,
                        bool use_sigmoid, double delta, double dsig_scale) {
  Md1Sums acc;
  const double d_service = 1.0 / rate;
  const double t = gamma - d_service;
  const double cut = t * rate;
  const double tail_scale = 2.0 * std::max(0.0, lambda * t) + 64.0;

  Mp m0, m1, m2, m3, yv, wv, uv, tmp;
  double c0 = 0.0, c1 = 0.0, c2 = 0.0; // Kahan compensations
  for (long long xi = 0; xi <= upper; ++xi) {
    const double arg = (xi + 1) * d_service - gamma;
    const double y = lambda * arg;
    double w, u;
    if (xi == 0) {
      w = std::exp(-y);
      u = 0.0;
    } else if (y == 0.0) {
      w = 0.0;
      u = xi == 1 ? 1.0 : 0.0;
    } else {
      const double lw = xi * std::log(std::abs(y)) - y - std::lgamma(xi + 1.0);
      const double sign = (y < 0 && (xi & 1)) ? -1.0 : 1.0;
      w = sign * std::exp(lw);
      u = w * xi / y;
    }
    double s = 1.0, ds_db = 0.0;
    if (use_sigmoid) {
      s = sigmoid_indicator(static_cast<double>(xi) - cut, delta);
      ds_db = s * (1.0 - s) * delta * dsig_scale;
    }
    acc.max_term = std::max(acc.max_term, std::abs(w));

    if constexpr (UseMpfr) {
      mpfr_set_d(yv.get(), lambda, MPFR_RNDN);
      mpfr_mul_d(yv.get(), yv.get(), arg, MPFR_RNDN);
      if (xi == 0)
        mpfr_set_d(wv.get(), 1.0, MPFR_RNDN);
      else
        mpfr_pow_ui(wv.get(), yv.get(), static_cast<unsigned long>(xi), MPFR_RNDN);
      mpfr_neg(tmp.get(), yv.get(), MPFR_RNDN);
      mpfr_exp(tmp.get(), tmp.get(), MPFR_RNDN);
      mpfr_mul(wv.get(), wv.get(), tmp.get(), MPFR_RNDN);
      if (xi > 0) {
        mpfr_fac_ui(tmp.get(), static_cast<unsigned long>(xi), MPFR_RNDN);
        mpfr_div(wv.get(), wv.get(), tmp.get(), MPFR_RNDN);
      }
      if (xi >= 1 && !mpfr_zero_p(yv.get())) {
        mpfr_mul_ui(uv.get(), wv.get(), static_cast<unsigned long>(xi), MPFR_RNDN);
        mpfr_div(uv.get(), uv.get(), yv.get(), MPFR_RNDN);
      } else {
        mpfr_set_d(uv.get(), xi == 1 ? 1.0 : 0.0, MPFR_RNDN);
      }
      mpfr_mul_d(tmp.get(), wv.get(), s, MPFR_RNDN);
      mpfr_add(m0.get(), m0.get(), tmp.get(), MPFR_RNDN);
      mpfr_sub(tmp.get(), uv.get(), wv.get(), MPFR_RNDN);
      mpfr_mul_d(tmp.get(), tmp.get(), s, MPFR_RNDN);
      mpfr_add(m2.get(), m2.get(), tmp.get(), MPFR_RNDN);
      mpfr_mul_d(tmp.get(), tmp.get(), arg, MPFR_RNDN);
      mpfr_add(m1.get(), m1.get(), tmp.get(), MPFR_RNDN);
      mpfr_mul_d(tmp.get(), wv.get(), ds_db, MPFR_RNDN);
      mpfr_add(m3.get(), m3.get(), tmp.get(), MPFR_RNDN);
    } else {
      auto kahan = [](double& sum, double& comp, double term) {
        const double yk = term - comp;
        const double tk = sum + yk;
        comp = (tk - sum) - yk;
        sum = tk;
      };
      kahan(acc.s0, c0, w * s);
      kahan(acc.s1, c1, (u - w) * arg * s);
      kahan(acc.s2, c2, (u - w) * s);
      acc.s3 += w * ds_db;
    }
    // |w_xi| is eventually monotone decreasing (|y_xi| shrinks toward the cut,
    // then xi! dominates), so a relative-tiny term ends the sum safely.
    if (static_cast<double>(xi) > tail_scale &&
        std::abs(w) < 1e-24 * std::max(1.0, acc.max_term))
      break;
  }
  if constexpr (UseMpfr) {
    acc.s0 = m0.to_double();
    acc.s1 = m1.to_double();
    acc.s2 = m2.to_double();
    acc.s3 = m3.to_double();
  }
  return acc;
}

}  // namespace detail

// Sojourn-time CDF of an M/D/1 queue (service time 1/rate) at deadline gamma,
// equal to the classical waiting-time series at the budget t = gamma - 1/rate:
//   P = (1-rho) * sum_{xi <= t*rate} y^xi e^{-y}/xi!,  y = lambda*(xi/rate - t).
// `approximate` replaces the hard truncation with the logistic sigmoid whose
// midpoint sits at xi = t*rate; `outer_cap` is the printed summation bound
// floor(gamma*mu_n). Alternating terms reach e^{2 lambda t}, so the loop tracks
// the largest term and reruns in 256-bit arithmetic when double precision
// would lose more than ~1e-12. Partial derivatives (needed by the smooth
// optimizers) come from the same pass; `b_share` is the share such that
// rate = b_share * mu.
inline Md1Result md1_sojourn_cdf(double lambda, double rate, double gamma, long long outer_cap,
                                 bool approximate, double delta, double b_share, double mu) {
  if (rate < lambda) throw queue_unstable_error("M/D/1 service rate below arrival rate");
  if (lambda < 0) throw invalid_config_error("negative arrival rate");
  Md1Result out;
  const double d_service = 1.0 / rate;
  const double t = gamma - d_service;
  if (t < 0 && !approximate) return out; // deterministic service alone exceeds the deadline
  const double cut = t * rate;
  long long upper = outer_cap;
  if (!approximate) upper = std::min(upper, static_cast<long long>(std::floor(cut + 1e-12)));
  if (upper < 0) return out;

  const double dsig_scale = gamma * mu; // d(cut)/db
  auto acc = detail::md1_sums<false>(lambda, rate, gamma, upper, approximate, delta, dsig_scale);
  if (acc.max_term > 1e4)
    acc = detail::md1_sums<true>(lambda, rate, gamma, upper, approximate, delta, dsig_scale);

  const double rho = lambda / rate;
  const double omr = 1.0 - rho;
  out.max_term = acc.max_term;
  out.value = omr * acc.s0;
  out.d_lambda = -d_service * acc.s0 + omr * acc.s1;
  if (approximate) {
    // d(rho)/db = -lambda/(b*mu*b) = -lambda*d_service/b ; dy/db = -(lambda/b)(arg+gamma).
    out.d_b = (lambda * d_service / b_share) * acc.s0 +
              omr * (-(lambda / b_share) * (acc.s1 + gamma * acc.s2) + acc.s3);
  } else {
    out.d_b = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace sspcache
