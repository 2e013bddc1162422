#pragma once

// The mixing random variable Θ of a normal mean-variance mixture:
// generalised inverse Gaussian (with its Gamma / inverse-Gamma boundary
// branches), a point mass, or a tabulated density on (0, inf).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "nmvm/error.hpp"
#include "nmvm/numeric.hpp"
#include "nmvm/special.hpp"

namespace nmvm {

using Rng = std::mt19937_64;

struct GigParams {
  double lambda = 0.0;
  double chi = 0.0;
  double psi = 0.0;

  bool operator==(const GigParams&) const = default;
};

class MixingModel {
 public:
  enum class Kind { Gig, Degenerate, Numeric };

  /// GIG(lambda, chi, psi) with density proportional to
  /// θ^(λ-1) exp(-(χ/θ + ψθ)/2). Accepted parameter branches:
  /// (λ<0, χ>0, ψ>=0), (λ=0, χ>0, ψ>0), (λ>0, χ>=0, ψ>0).
  static MixingModel gig(double lambda, double chi, double psi) {
    const bool finite = std::isfinite(lambda) && std::isfinite(chi) && std::isfinite(psi);
    const bool ok = finite && chi >= 0.0 && psi >= 0.0 &&
                    ((lambda < 0.0 && chi > 0.0) || (lambda == 0.0 && chi > 0.0 && psi > 0.0) ||
                     (lambda > 0.0 && psi > 0.0));
    if (!ok) {
      fail(ErrorKind::Validation, "GIG(lambda=" + std::to_string(lambda) + ", chi=" +
                                      std::to_string(chi) + ", psi=" + std::to_string(psi) +
                                      ") violates the parameter constraints");
    }
    if (chi > 0.0 && psi > 0.0 &&
        (std::sqrt(chi * psi) > special::kMaxBesselArgument ||
         std::fabs(lambda) > special::kMaxBesselOrder)) {
      fail(ErrorKind::Domain, "GIG(lambda=" + std::to_string(lambda) +
                                  ") needs |lambda|<=60 and sqrt(chi*psi)<=700");
    }
    MixingModel m;
    m.data_ = Gig{{lambda, chi, psi}, 0.0};
    auto& g = std::get<Gig>(m.data_);
    if (chi > 0.0 && psi > 0.0) {
      g.log_norm = 0.5 * lambda * std::log(psi / chi) - std::numbers::ln2 -
                   special::bessel_k_log(lambda, std::sqrt(chi * psi));
    } else if (chi == 0.0) {
      g.log_norm = lambda * std::log(0.5 * psi) - std::lgamma(lambda);
    } else {
      g.log_norm = -lambda * std::log(0.5 * chi) - std::lgamma(-lambda);
    }
    return m;
  }

  static MixingModel degenerate(double theta0) {
    if (!(theta0 > 0.0) || !std::isfinite(theta0)) {
      fail(ErrorKind::Validation, "degenerate mixing needs theta0 > 0, got " +
                                      std::to_string(theta0));
    }
    MixingModel m;
    m.data_ = Degenerate{theta0};
    return m;
  }

  /// Tabulates `density` on `nodes` points equally spaced in u = ln θ over
  /// [theta_min, theta_max]. The tabulated law must integrate to 1 within 1e-10.
  static MixingModel tabulated(const std::function<double(double)>& density, double theta_min,
                               double theta_max, std::size_t nodes = 4001) {
    if (!(theta_min > 0.0) || !(theta_max > theta_min) || nodes < 3) {
      fail(ErrorKind::Validation, "tabulated mixing needs 0 < theta_min < theta_max, nodes >= 3");
    }
    Numeric t;
    t.u0 = std::log(theta_min);
    t.du = (std::log(theta_max) - t.u0) / static_cast<double>(nodes - 1);
    t.log_density.resize(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
      const double f = density(std::exp(t.u0 + static_cast<double>(i) * t.du));
      if (!(f >= 0.0) || !std::isfinite(f)) {
        fail(ErrorKind::Validation, "tabulated mixing density must be finite and non-negative");
      }
      t.log_density[i] = f > 0.0 ? std::log(f) : -std::numeric_limits<double>::infinity();
    }
    t.build_cdf();
    MixingModel m;
    m.data_ = std::move(t);
    const double mass = m.expect([](double) { return 1.0; });
    if (std::fabs(mass - 1.0) > 1e-10) {
      fail(ErrorKind::Validation,
           "tabulated mixing density integrates to " + std::to_string(mass) + ", not 1");
    }
    return m;
  }

  Kind kind() const {
    if (std::holds_alternative<Gig>(data_)) return Kind::Gig;
    if (std::holds_alternative<Degenerate>(data_)) return Kind::Degenerate;
    return Kind::Numeric;
  }

  const GigParams& gig_params() const {
    if (kind() != Kind::Gig) fail(ErrorKind::Domain, "mixing law is not GIG");
    return std::get<Gig>(data_).params;
  }

  double theta0() const {
    if (kind() != Kind::Degenerate) fail(ErrorKind::Domain, "mixing law is not degenerate");
    return std::get<Degenerate>(data_).theta0;
  }

  /// Largest l with E[Θ^l] finite; nullopt when every moment is finite.
  std::optional<int> max_finite_moment() const {
    if (const auto* g = std::get_if<Gig>(&data_)) {
      if (g->params.psi == 0.0) return static_cast<int>(std::ceil(-g->params.lambda)) - 1;
    }
    return std::nullopt;
  }

  bool has_moment(int l) const {
    const auto m = max_finite_moment();
    return l >= 0 && (!m || l <= *m);
  }

  void require_moment(int l) const {
    if (l < 0) fail(ErrorKind::Domain, "negative moment order " + std::to_string(l));
    if (!has_moment(l)) {
      fail(ErrorKind::MomentNotFinite, "E[Theta^" + std::to_string(l) +
                                           "] is infinite for this mixing law (finite up to " +
                                           std::to_string(*max_finite_moment()) + ")");
    }
  }

  /// c^{*(l)} = E[Θ^l].
  double moment(int l) const {
    require_moment(l);
    if (l == 0) return 1.0;
    return std::visit(
        [&](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Degenerate>) {
            return std::pow(d.theta0, l);
          } else if constexpr (std::is_same_v<T, Gig>) {
            const auto& [lam, chi, psi] = d.params;
            if (chi > 0.0 && psi > 0.0) {
              return std::exp(0.5 * l * std::log(chi / psi) +
                              special::bessel_k_log_ratio(lam, l, std::sqrt(chi * psi)));
            }
            if (chi == 0.0) {
              return std::exp(std::lgamma(lam + l) - std::lgamma(lam) + l * std::log(2.0 / psi));
            }
            const double shape = -lam;
            return std::exp(l * std::log(0.5 * chi) + std::lgamma(shape - l) -
                            std::lgamma(shape));
          } else {
            return expect([l](double theta) { return std::pow(theta, l); });
          }
        },
        data_);
  }

  /// The law with density θ^l π(θ) / E[Θ^l].
  MixingModel tilt(int l) const {
    require_moment(l);
    if (l == 0) return *this;
    if (const auto* g = std::get_if<Gig>(&data_)) {
      return gig(g->params.lambda + l, g->params.chi, g->params.psi);
    }
    if (std::holds_alternative<Degenerate>(data_)) return *this;
    Numeric t = std::get<Numeric>(data_);
    const double log_c = std::log(moment(l));
    for (std::size_t i = 0; i < t.log_density.size(); ++i) {
      t.log_density[i] += l * t.node_u(i) - log_c;
    }
    t.build_cdf();
    MixingModel m;
    m.data_ = std::move(t);
    return m;
  }

  /// ln π(θ). Point masses have no density and report an error.
  double log_density(double theta) const {
    if (!(theta > 0.0)) return -std::numeric_limits<double>::infinity();
    if (const auto* g = std::get_if<Gig>(&data_)) {
      const auto& [lam, chi, psi] = g->params;
      return g->log_norm + (lam - 1.0) * std::log(theta) - 0.5 * (chi / theta + psi * theta);
    }
    if (const auto* t = std::get_if<Numeric>(&data_)) return t->interpolate(std::log(theta));
    fail(ErrorKind::Domain, "a point-mass mixing law has no density");
  }

  double density(double theta) const { return std::exp(log_density(theta)); }

  /// E[g(Θ)], by quadrature on u = ln θ (GIG), exact evaluation (point mass)
  /// or the tabulation's trapezoid rule (numeric).
  template <class G>
  double expect(G&& g, double rel_tol = 1e-13) const {
    if (const auto* d = std::get_if<Degenerate>(&data_)) return g(d->theta0);
    if (const auto* t = std::get_if<Numeric>(&data_)) {
      numeric::CompensatedSum sum;
      for (std::size_t i = 0; i < t->log_density.size(); ++i) {
        const double mass = t->node_mass(i);
        if (mass > 0.0) sum.add(mass * g(std::exp(t->node_u(i))));
      }
      return sum.value();
    }
    const auto& gig = std::get<Gig>(data_);
    const auto [lo, mode, hi] = gig.support();
    const auto integrand = [&](double u) {
      const double theta = std::exp(u);
      const double weight = std::exp(log_density(theta) + u);
      return weight > 0.0 ? weight * g(theta) : 0.0;
    };
    return numeric::integrate(integrand, lo, mode, rel_tol) +
           numeric::integrate(integrand, mode, hi, rel_tol);
  }

  /// Mode of the density of ln Θ, and the u-range outside which that density
  /// is below e^-60 of its peak. Point masses report [ln θ0, ln θ0, ln θ0].
  struct Support {
    double lo, mode, hi;
  };
  Support log_support() const {
    if (const auto* d = std::get_if<Degenerate>(&data_)) {
      const double u = std::log(d->theta0);
      return {u, u, u};
    }
    if (const auto* t = std::get_if<Numeric>(&data_)) {
      const std::size_t n = t->log_density.size();
      const auto peak = std::max_element(t->log_density.begin(), t->log_density.end());
      return {t->u0, t->node_u(static_cast<std::size_t>(peak - t->log_density.begin())),
              t->node_u(n - 1)};
    }
    return std::get<Gig>(data_).support();
  }

  /// Draws `count` i.i.d. values of Θ.
  std::vector<double> sample(std::size_t count, Rng& rng) const {
    std::vector<double> out(count);
    for (auto& x : out) x = draw(rng);
    return out;
  }

  double draw(Rng& rng) const;

 private:
  struct Gig {
    GigParams params;
    double log_norm;

    // ln-density of U = ln Θ up to a constant; strictly concave.
    double log_u_density(double u) const {
      return params.lambda * u - 0.5 * (params.chi * std::exp(-u) + params.psi * std::exp(u));
    }
    Support support() const {
      const auto& [lam, chi, psi] = params;
      // Stationary point of λu - (χ e^-u + ψ e^u)/2: ψ t² - 2λ t - χ = 0, t = e^u.
      double t;
      if (chi == 0.0) {
        t = 2.0 * lam / psi;
      } else if (psi == 0.0) {
        t = chi / (-2.0 * lam);
      } else if (lam <= 0.0) {
        t = chi / (std::sqrt(lam * lam + chi * psi) - lam);
      } else {
        t = (lam + std::sqrt(lam * lam + chi * psi)) / psi;
      }
      const double mode = std::log(t);
      const double top = log_u_density(mode);
      constexpr double kDrop = 60.0;
      constexpr double kLimit = 600.0;
      const auto edge = [&](double direction) {
        double step = 1.0;
        double inside = mode;
        double outside = mode + direction * step;
        while (log_u_density(outside) > top - kDrop) {
          if (std::fabs(outside) >= kLimit) return direction * kLimit;
          inside = outside;
          step *= 2.0;
          outside = std::clamp(mode + direction * step, -kLimit, kLimit);
        }
        for (int i = 0; i < 50; ++i) {
          const double mid = 0.5 * (inside + outside);
          (log_u_density(mid) > top - kDrop ? inside : outside) = mid;
        }
        return outside;
      };
      return {edge(-1.0), mode, edge(1.0)};
    }
  };
  struct Degenerate {
    double theta0;
  };
  struct Numeric {
    double u0 = 0.0;
    double du = 0.0;
    std::vector<double> log_density;
    std::vector<double> cdf;  // cumulative trapezoid mass through node i

    double node_u(std::size_t i) const { return u0 + static_cast<double>(i) * du; }
    double node_mass(std::size_t i) const {
      const double w = (i == 0 || i + 1 == log_density.size()) ? 0.5 : 1.0;
      return w * du * std::exp(log_density[i] + node_u(i));
    }
    void build_cdf() {
      cdf.resize(log_density.size());
      double acc = 0.0;
      for (std::size_t i = 0; i < cdf.size(); ++i) cdf[i] = (acc += node_mass(i));
    }
    double interpolate(double u) const {
      const double x = (u - u0) / du;
      const double last = static_cast<double>(log_density.size() - 1);
      if (!(x >= 0.0) || x > last) return -std::numeric_limits<double>::infinity();
      const auto i = std::min(static_cast<std::size_t>(x), log_density.size() - 2);
      const double f = x - static_cast<double>(i);
      const double a = log_density[i], b = log_density[i + 1];
      if (f == 0.0) return a;
      if (f == 1.0) return b;
      return (1.0 - f) * a + f * b;
    }
  };

  std::variant<Gig, Degenerate, Numeric> data_ = Degenerate{1.0};
};

/// c^{*(l)} of the mixing law.
inline double mixing_moment(const MixingModel& model, int l) { return model.moment(l); }

/// π^{*(l)}, the l-fold θ-tilted mixing law.
inline MixingModel tilt(const MixingModel& model, int l) { return model.tilt(l); }

inline std::vector<double> sample_mixing(const MixingModel& model, std::size_t count, Rng& rng) {
  return model.sample(count, rng);
}

namespace detail {

// Uniform on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
  for (;;) {
    const double u = std::generate_canonical<double, 64>(rng);
    if (u > 0.0 && u < 1.0) return u;
  }
}

// GIG samplers of Hörmann & Leydold (2014, Statistics and Computing 24) for the
// standardised law with density proportional to x^(λ-1) exp(-ω(x + 1/x)/2),
// λ >= 0. The caller maps a draw X to sqrt(χ/ψ)·X (or its reciprocal when the
// original λ was negative).

inline double gig_mode(double lambda, double omega) {
  if (lambda >= 1.0) return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
  return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

// Ratio-of-uniforms without mode shift.
inline double rgig_rou_noshift(Rng& rng, double lambda, double omega) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
  const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
  for (;;) {
    const double u = um * uniform_open(rng);
    const double v = uniform_open(rng);
    const double x = u / v;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Constant hat on the log-concave part, for 0 <= λ < 1 and small ω.
inline double rgig_newapproach(Rng& rng, double lambda, double omega) {
  const double xm = gig_mode(lambda, omega);
  const double x0 = omega / (1.0 - lambda);
  const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));
  double area[3];
  area[0] = k0 * x0;
  double k1, k2;
  if (x0 >= 2.0 / omega) {
    k1 = 0.0;
    area[1] = 0.0;
    k2 = std::pow(x0, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
  } else {
    k1 = std::exp(-omega);
    area[1] = lambda == 0.0 ? k1 * std::log(2.0 / (omega * omega))
                            : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
    k2 = std::pow(2.0 / omega, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-1.0) / omega;
  }
  const double total = area[0] + area[1] + area[2];
  for (;;) {
    double v = total * uniform_open(rng);
    double x, hx;
    if (v <= area[0]) {
      x = x0 * v / area[0];
      hx = k0;
    } else if ((v -= area[0]) <= area[1]) {
      if (lambda == 0.0) {
        x = omega * std::exp(std::exp(omega) * v);
        hx = k1 / x;
      } else {
        x = std::pow(std::pow(x0, lambda) + lambda / k1 * v, 1.0 / lambda);
        hx = k1 * std::pow(x, lambda - 1.0);
      }
    } else {
      v -= area[1];
      const double a = std::max(x0, 2.0 / omega);
      x = -2.0 / omega * std::log(std::exp(-omega / 2.0 * a) - omega / (2.0 * k2) * v);
      hx = k2 * std::exp(-omega / 2.0 * x);
    }
    const double u = uniform_open(rng) * hx;
    if (std::log(u) <= (lambda - 1.0) * std::log(x) - omega / 2.0 * (x + 1.0 / x)) return x;
  }
}

// Ratio-of-uniforms with shift by the mode (Dagpunar 1989, Lehner 1989).
inline double rgig_rou_shift(Rng& rng, double lambda, double omega) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double a = -(2.0 * (lambda + 1.0) / omega + xm);
  const double b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
  const double c = xm;
  const double p = b - a * a / 3.0;
  const double q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
  const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
  const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0;
  const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
  const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);
  for (;;) {
    const double u = uminus + uniform_open(rng) * (uplus - uminus);
    const double v = uniform_open(rng);
    const double x = u / v + xm;
    if (x > 0.0 && std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

}  // namespace detail

inline double MixingModel::draw(Rng& rng) const {
  if (const auto* d = std::get_if<Degenerate>(&data_)) return d->theta0;
  if (const auto* t = std::get_if<Numeric>(&data_)) {
    // Piecewise-constant density in u over the cells centred on the nodes.
    const std::size_t n = t->cdf.size();
    const double target = detail::uniform_open(rng) * t->cdf.back();
    const auto i = std::min<std::size_t>(
        static_cast<std::size_t>(std::lower_bound(t->cdf.begin(), t->cdf.end(), target) -
                                 t->cdf.begin()),
        n - 1);
    const double half = (i == 0 || i + 1 == n) ? 0.0 : 0.5;
    const double jitter = (detail::uniform_open(rng) - 0.5) * 2.0 * half * t->du;
    return std::exp(t->node_u(i) + jitter);
  }
  const auto& [lam, chi, psi] = std::get<Gig>(data_).params;
  if (chi == 0.0) {
    std::gamma_distribution<double> gamma(lam, 2.0 / psi);
    return gamma(rng);
  }
  if (psi == 0.0) {
    std::gamma_distribution<double> gamma(-lam, 2.0 / chi);
    return 1.0 / gamma(rng);
  }
  const double lambda = std::fabs(lam);
  const double omega = std::sqrt(chi * psi);
  const double scale = std::sqrt(chi / psi);
  double x;
  if (lambda > 2.0 || omega > 3.0) {
    x = detail::rgig_rou_shift(rng, lambda, omega);
  } else if (lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2) {
    x = detail::rgig_rou_noshift(rng, lambda, omega);
  } else {
    x = detail::rgig_newapproach(rng, lambda, omega);
  }
  return lam < 0.0 ? scale / x : scale * x;
}

}  // namespace nmvm
