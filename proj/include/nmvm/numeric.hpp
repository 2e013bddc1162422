#pragma once

// Small numerical building blocks shared by the distribution and tail-moment
// code: compensated summation, bracketing root search, adaptive quadrature.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nmvm/error.hpp"

namespace nmvm::numeric {

/// Neumaier compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
    magnitude_ += std::fabs(x);
  }
  double value() const { return sum_ + carry_; }
  /// Sum of |terms|; magnitude() / |value()| is the condition number of the sum.
  double magnitude() const { return magnitude_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
  double magnitude_ = 0.0;
};

/// Brent's method on a bracket [a, b] with f(a), f(b) of opposite sign
/// (bisection, secant and inverse quadratic steps, safeguarded by the bracket).
template <class F>
double find_root(F&& f, double a, double b, double fa, double fb, double x_tol,
                 int max_iter = 200) {
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0)) {
    fail(ErrorKind::Convergence, "find_root: interval does not bracket a root");
  }
  double c = a, fc = fa, d = b - a, e = d;
  for (int iter = 0; iter < max_iter; ++iter) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::fabs(b) + 0.5 * x_tol;
    const double m = 0.5 * (c - b);
    if (std::fabs(m) <= tol || fb == 0.0) return b;
    if (std::fabs(e) >= tol && std::fabs(fa) > std::fabs(fb)) {
      double p, q, r;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q; else p = -p;
      if (2.0 * p < std::min(3.0 * m * q - std::fabs(tol * q), std::fabs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = m;
        e = m;
      }
    } else {
      d = m;
      e = m;
    }
    a = b;
    fa = fb;
    b += std::fabs(d) > tol ? d : (m > 0.0 ? tol : -tol);
    fb = f(b);
  }
  fail(ErrorKind::Convergence, "find_root: no convergence after " + std::to_string(max_iter) +
                                   " iterations");
}

/// Adaptive Gauss–Kronrod (G10/K21) integral of f over [a, b].
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-13, unsigned max_depth = 18) {
  if (!(b > a)) return 0.0;
  double error = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, a, b, max_depth,
                                                                         rel_tol, &error);
}

}  // namespace nmvm::numeric
