#pragma once

// Scalar special functions: log-scale modified Bessel K of real order and the
// standard normal pdf / cdf / survival / quantile.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "nmvm/error.hpp"

namespace nmvm::special {

inline constexpr double kMaxBesselOrder = 60.0;
inline constexpr double kMaxBesselArgument = 700.0;
inline constexpr double kSmallBesselArgument = 1e-8;

namespace detail {

// K_v(z) = 1/2 * integral over the real line of exp(-z cosh t + v t) dt.
// The exponent is strictly concave with its peak at sinh t* = v / z, so the
// trapezoid rule on an even, doubly-exponentially decaying integrand
// converges geometrically in 1/h. Summation runs outward from the peak until
// the terms fall e^-46 below it.
inline double log_bessel_k_trapezoid(double v, double z) {
  const double peak = std::asinh(v / z);
  const auto exponent = [&](double t) { return -z * std::cosh(t) + v * t; };
  const double top = exponent(peak);
  const double curvature = std::hypot(z, v);  // -phi''(peak)
  const double width = 1.0 / std::sqrt(curvature);
  const double h = std::min(0.1, 0.25 * width);
  constexpr double kCutoff = -46.0;

  double sum = 1.0;  // the peak term
  for (int side : {-1, 1}) {
    for (long j = 1;; ++j) {
      const double d = exponent(peak + side * j * h) - top;
      if (!(d > kCutoff)) break;
      sum += std::exp(d);
    }
  }
  return top + std::log(0.5 * h * sum);
}

}  // namespace detail

/// Natural log of K_order(argument), modified Bessel function of the second kind.
///
/// Supported domain: |order| <= 60, 0 < argument <= 700. Below argument 1e-8
/// the leading small-argument term is used where it is accurate to double
/// precision (v = 0, v >= 1, or (z/2)^{2v} < 1e-14):
///   K_v(z) ~ Gamma(|v|)/2 (2/z)^|v|   (v != 0),   K_0(z) ~ -ln(z/2) - gamma_E.
/// K_{-v} = K_v holds exactly because only |order| is ever used.
inline double bessel_k_log(double order, double argument) {
  if (!std::isfinite(order) || !std::isfinite(argument) || argument <= 0.0 ||
      argument > kMaxBesselArgument || std::fabs(order) > kMaxBesselOrder) {
    fail(ErrorKind::Domain, "bessel_k_log(order=" + std::to_string(order) +
                                ", argument=" + std::to_string(argument) +
                                ") outside |order|<=60, 0<argument<=700");
  }
  const double v = std::fabs(order);
  // The leading term's relative error is O((z/2)^{2v}) for 0 < v < 1.
  const bool leading_term_exact =
      v == 0.0 || v >= 1.0 || 2.0 * v * std::log(0.5 * argument) < std::log(1e-14);
  if (argument < kSmallBesselArgument && leading_term_exact) {
    if (v == 0.0) return std::log(-std::log(0.5 * argument) - std::numbers::egamma);
    return std::lgamma(v) - std::numbers::ln2 + v * std::log(2.0 / argument);
  }
  return detail::log_bessel_k_trapezoid(v, argument);
}

/// ln K_{order+shift}(z) - ln K_order(z); the quantity every GIG moment needs.
inline double bessel_k_log_ratio(double order, double shift, double argument) {
  return bessel_k_log(order + shift, argument) - bessel_k_log(order, argument);
}

inline double normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Upper tail 1 - cdf(x), accurate in relative terms for large positive x.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// Inverse of normal_cdf. Acklam's rational approximation followed by one
/// Halley step, giving |cdf(quantile(p)) - p| near machine precision.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    fail(ErrorKind::Domain, "normal_quantile(p=" + std::to_string(p) + ") requires 0<p<1");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement; the residual is taken on the side with relative accuracy.
  const double e = x < 0.0 ? normal_cdf(x) - p : (1.0 - p) - normal_sf(x);
  const double u = e / normal_pdf(x);
  return x - u / (1.0 + 0.5 * x * u);
}

enum class NormalKind { Pdf, Cdf, Quantile };

inline double std_normal(NormalKind kind, double x) {
  switch (kind) {
    case NormalKind::Pdf: return normal_pdf(x);
    case NormalKind::Cdf: return normal_cdf(x);
    case NormalKind::Quantile: return normal_quantile(x);
  }
  return std::nan("");
}

}  // namespace nmvm::special
