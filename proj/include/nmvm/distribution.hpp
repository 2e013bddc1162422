#pragma once

// Normal mean-variance mixtures with linear mean function m(Θ) = μ + Θγ.
// Given Θ = θ the scalar law is Normal(μ + θγ, θσ²); given Θ = θ the vector
// law is MVN(μ + θγ, θΣ).

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nmvm/error.hpp"
#include "nmvm/mixing.hpp"
#include "nmvm/numeric.hpp"
#include "nmvm/special.hpp"

namespace nmvm {

struct UnivariateNMVM {
  double mu = 0.0;
  double gamma = 0.0;
  double sigma2 = 1.0;
  MixingModel mixing = MixingModel::degenerate(1.0);

  void validate() const {
    if (!std::isfinite(mu) || !std::isfinite(gamma)) {
      fail(ErrorKind::Validation, "mu and gamma must be finite");
    }
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
      fail(ErrorKind::Validation, "sigma2 must be positive, got " + std::to_string(sigma2));
    }
  }

  /// Same (μ, γ, σ²) with the l-fold tilted mixing law: the law of S^{*(l)}.
  UnivariateNMVM tilted(int l) const { return {mu, gamma, sigma2, mixing.tilt(l)}; }
};

/// f_S(s).
inline double density(const UnivariateNMVM& model, double s) {
  return model.mixing.expect([&](double theta) {
    const double sd = std::sqrt(theta * model.sigma2);
    return special::normal_pdf((s - model.mu - theta * model.gamma) / sd) / sd;
  });
}

/// F̄_S(s) = P(S > s).
inline double survival(const UnivariateNMVM& model, double s) {
  return model.mixing.expect([&](double theta) {
    return special::normal_sf((s - model.mu - theta * model.gamma) / std::sqrt(theta * model.sigma2));
  });
}

/// F_S(s) = P(S <= s), computed directly rather than as 1 - survival.
inline double cdf(const UnivariateNMVM& model, double s) {
  return model.mixing.expect([&](double theta) {
    return special::normal_cdf((s - model.mu - theta * model.gamma) / std::sqrt(theta * model.sigma2));
  });
}

/// h_S(s) = f_S(s) / F̄_S(s).
inline double hazard(const UnivariateNMVM& model, double s) {
  const double tail = survival(model, s);
  if (!(tail > 1e-300)) {
    fail(ErrorKind::TailUnderflow, "survival at s=" + std::to_string(s) + " underflows");
  }
  return density(model, s) / tail;
}

/// s_α = inf{s : P(S <= s) >= α}.
///
/// The initial bracket is centred on the mixture mean μ + c*γ with radius ten
/// times sqrt(c*σ² + (c** - c*²)γ²) when those mixing moments exist, otherwise
/// on μ with radius 10σ; either side is doubled up to 60 times until it
/// brackets the root, which Brent's method then refines.
inline double quantile(const UnivariateNMVM& model, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    fail(ErrorKind::Domain, "quantile level must lie in (0,1), got " + std::to_string(alpha));
  }
  const auto& mix = model.mixing;
  double centre = model.mu;
  double radius = 10.0 * std::sqrt(model.sigma2);
  if (mix.has_moment(1)) {
    const double c1 = mix.moment(1);
    double spread = c1 * model.sigma2;
    if (mix.has_moment(2)) spread += std::max(0.0, mix.moment(2) - c1 * c1) * model.gamma * model.gamma;
    centre = model.mu + c1 * model.gamma;
    radius = 10.0 * std::sqrt(spread);
  }
  if (!(radius > 0.0) || !std::isfinite(radius)) radius = 1.0;

  // Root of an increasing function, evaluated on whichever side keeps relative accuracy.
  const auto excess = [&](double s) {
    return alpha > 0.5 ? (1.0 - alpha) - survival(model, s) : cdf(model, s) - alpha;
  };
  double lo = centre - radius, hi = centre + radius;
  double f_lo = excess(lo), f_hi = excess(hi);
  double step = radius;
  for (int i = 0; i < 60 && f_lo > 0.0; ++i) {
    hi = lo;
    f_hi = f_lo;
    step *= 2.0;
    lo = centre - step;
    f_lo = excess(lo);
  }
  step = radius;
  for (int i = 0; i < 60 && f_hi < 0.0; ++i) {
    lo = hi;
    f_lo = f_hi;
    step *= 2.0;
    hi = centre + step;
    f_hi = excess(hi);
  }
  if (f_lo > 0.0 || f_hi < 0.0) {
    fail(ErrorKind::Convergence, "quantile bracket search failed for alpha=" + std::to_string(alpha));
  }
  return numeric::find_root(excess, lo, hi, f_lo, f_hi, 1e-12);
}

class MultivariateNMVM {
 public:
  MultivariateNMVM(Eigen::VectorXd mu, Eigen::VectorXd gamma, Eigen::MatrixXd sigma,
                   MixingModel mixing)
      : mu_(std::move(mu)), gamma_(std::move(gamma)), sigma_(std::move(sigma)),
        mixing_(std::move(mixing)) {
    validate();
  }

  Eigen::Index dimension() const { return mu_.size(); }
  const Eigen::VectorXd& mu() const { return mu_; }
  const Eigen::VectorXd& gamma() const { return gamma_; }
  const Eigen::MatrixXd& sigma() const { return sigma_; }
  const MixingModel& mixing() const { return mixing_; }

  /// σ_iS = Σ_j σ_ij.
  Eigen::VectorXd row_sums() const { return sigma_.rowwise().sum(); }
  /// σ_S² = Σ_i Σ_j σ_ij.
  double total_variance() const { return sigma_.sum(); }

 private:
  void validate() const {
    const Eigen::Index n = mu_.size();
    if (n < 1) fail(ErrorKind::Validation, "dimension must be positive");
    if (gamma_.size() != n) {
      fail(ErrorKind::Validation, "gamma has length " + std::to_string(gamma_.size()) +
                                      ", expected " + std::to_string(n));
    }
    if (sigma_.rows() != n || sigma_.cols() != n) {
      fail(ErrorKind::Validation, "sigma must be " + std::to_string(n) + "x" + std::to_string(n));
    }
    if (!mu_.allFinite() || !gamma_.allFinite() || !sigma_.allFinite()) {
      fail(ErrorKind::Validation, "model parameters must be finite");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (std::fabs(sigma_(i, j) - sigma_(j, i)) > 1e-12) {
          fail(ErrorKind::Validation, "sigma is not symmetric: sigma[" + std::to_string(i) + "][" +
                                          std::to_string(j) + "] != sigma[" + std::to_string(j) +
                                          "][" + std::to_string(i) + "]");
        }
      }
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma_, Eigen::EigenvaluesOnly);
    const double norm = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (eig.eigenvalues().minCoeff() < -1e-10 * norm) {
      fail(ErrorKind::Validation, "sigma is not positive semi-definite (smallest eigenvalue " +
                                      std::to_string(eig.eigenvalues().minCoeff()) + ")");
    }
  }

  Eigen::VectorXd mu_;
  Eigen::VectorXd gamma_;
  Eigen::MatrixXd sigma_;
  MixingModel mixing_;
};

/// Law of w'X: NMVM(w'μ, w'γ, w'Σw) with the same mixing variable.
inline UnivariateNMVM aggregate(const MultivariateNMVM& model, const Eigen::VectorXd& weights) {
  if (weights.size() != model.dimension()) {
    fail(ErrorKind::Validation, "weights have length " + std::to_string(weights.size()) +
                                    ", expected " + std::to_string(model.dimension()));
  }
  if (!weights.allFinite()) fail(ErrorKind::Validation, "weights must be finite");
  const double variance = weights.dot(model.sigma() * weights);
  if (!(variance > 0.0)) {
    fail(ErrorKind::DegenerateAggregate,
         "w'Sigma w = " + std::to_string(variance) + " is not positive");
  }
  return {weights.dot(model.mu()), weights.dot(model.gamma()), variance, model.mixing()};
}

/// Law of S = Σ_i X_i.
inline UnivariateNMVM aggregate(const MultivariateNMVM& model) {
  return aggregate(model, Eigen::VectorXd::Ones(model.dimension()));
}

/// Law of (w_1 X_1, ..., w_n X_n).
inline MultivariateNMVM reweight(const MultivariateNMVM& model, const Eigen::VectorXd& weights) {
  if (weights.size() != model.dimension()) {
    fail(ErrorKind::Validation, "weights have length " + std::to_string(weights.size()) +
                                    ", expected " + std::to_string(model.dimension()));
  }
  if (!weights.allFinite()) fail(ErrorKind::Validation, "weights must be finite");
  return MultivariateNMVM(model.mu().cwiseProduct(weights), model.gamma().cwiseProduct(weights),
                          weights.asDiagonal() * model.sigma() * weights.asDiagonal(),
                          model.mixing());
}

}  // namespace nmvm
