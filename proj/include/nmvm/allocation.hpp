#pragma once

// Capital allocation for S = Σ X_i under a multivariate NMVM law. Every
// method is driven by one TailMoments object for the aggregate, so a single
// ladder serves all methods at a given α.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nmvm/distribution.hpp"
#include "nmvm/error.hpp"
#include "nmvm/tail_moments.hpp"

namespace nmvm {

struct AllocationCoefficients {
  Eigen::VectorXd a0;  // μ_i - a1_i Σ_j μ_j
  Eigen::VectorXd a1;  // σ_iS / σ_S²
  Eigen::VectorXd a2;  // γ_i - a1_i Σ_j γ_j
};

inline AllocationCoefficients coefficients(const MultivariateNMVM& model) {
  const double total_variance = model.total_variance();
  if (!(total_variance > 0.0)) {
    fail(ErrorKind::DegenerateAggregate,
         "sigma_S^2 = " + std::to_string(total_variance) + " is not positive");
  }
  AllocationCoefficients c;
  c.a1 = model.row_sums() / total_variance;
  c.a0 = model.mu() - c.a1 * model.mu().sum();
  c.a2 = model.gamma() - c.a1 * model.gamma().sum();
  return c;
}

enum class Method { Cte, Tv, Tcm, Combined, EulerRooted };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Cte: return "cte";
    case Method::Tv: return "tv";
    case Method::Tcm: return "tcm";
    case Method::Combined: return "combined";
    case Method::EulerRooted: return "euler_rooted";
  }
  return "?";
}

inline std::optional<Method> parse_method(const std::string& name) {
  for (Method m : {Method::Cte, Method::Tv, Method::Tcm, Method::Combined, Method::EulerRooted}) {
    if (name == to_string(m)) return m;
  }
  return std::nullopt;
}

struct CombinedWeights {
  double m1 = 1.0;
  double m2 = 0.0;
  double m3 = 0.0;
};

struct AllocationReport {
  Method method = Method::Cte;
  double alpha = 0.0;
  int order = 1;
  double total = 0.0;
  Eigen::VectorXd capitals;
  std::vector<std::optional<double>> proportions;  // empty entries when total == 0
  std::optional<CombinedWeights> weights;
};

namespace detail {

inline AllocationReport make_report(Method method, double alpha, int order, double total,
                                    Eigen::VectorXd capitals) {
  AllocationReport r;
  r.method = method;
  r.alpha = alpha;
  r.order = order;
  r.total = total;
  r.capitals = std::move(capitals);
  r.proportions.resize(static_cast<std::size_t>(r.capitals.size()));
  if (total != 0.0) {
    for (Eigen::Index i = 0; i < r.capitals.size(); ++i) {
      r.proportions[static_cast<std::size_t>(i)] = r.capitals(i) / total;
    }
  }
  return r;
}

}  // namespace detail

/// Order of tail-moment table that `method` at `order` needs.
inline int required_order(Method method, int order) {
  switch (method) {
    case Method::Cte: return 1;
    case Method::Tv: return 2;
    case Method::Combined: return 3;
    case Method::Tcm:
    case Method::EulerRooted: return std::max(order, 2);
  }
  return order;
}

class AllocationEngine {
 public:
  AllocationEngine(const MultivariateNMVM& model, double alpha, int max_order = 3,
                   TailMomentOptions options = {})
      : model_(model),
        coef_(nmvm::coefficients(model)),
        tails_(aggregate(model), alpha, std::max(max_order, 1), std::move(options)) {}

  const MultivariateNMVM& model() const { return model_; }
  const AllocationCoefficients& coefficients() const { return coef_; }
  const TailMoments& tails() const { return tails_; }
  double alpha() const { return tails_.alpha(); }

  /// c*(1-α*)/(1-α) = E[Θ | S > s_α].
  double theta_weight() const { return tails_.ladder().tail_weight(1); }

  AllocationReport cte() const {
    const double total = tails_.cte();
    const Eigen::VectorXd k =
        coef_.a0 + coef_.a1 * total + coef_.a2 * theta_weight();
    return detail::make_report(Method::Cte, alpha(), 1, total, k);
  }

  /// TCov_α(X_i, S^{k-1}) = E[X_i S^{k-1} | S > s_α] - E[X_i | S > s_α] E[S^{k-1} | S > s_α].
  double tail_cov_power(Eigen::Index i, int k) const {
    check_index(i);
    require_order(k, "tail_cov_power");
    const auto& t = tails_.table();
    return coef_.a1(i) * (t.at(0, k) - t.at(0, 1) * t.at(0, k - 1)) +
           coef_.a2(i) * theta_weight() * (t.at(1, k - 1) - t.at(0, k - 1));
  }

  AllocationReport tv() const {
    require_order(2, "tv");
    const auto& t = tails_.table();
    const double total = tails_.tcm(2);
    const Eigen::VectorXd k =
        coef_.a1 * total + theta_weight() * coef_.a2 * (t.at(1, 1) - tails_.cte());
    return detail::make_report(Method::Tv, alpha(), 2, total, k);
  }

  AllocationReport tcm(int k) const {
    require_order(k, "tcm");
    const double total = tails_.tcm(k);
    const double tilt_gap =
        tails_.shifted_tail_power(1, tails_.cte(), k - 1) - tails_.tcm(k - 1);
    const Eigen::VectorXd capitals = coef_.a1 * total + coef_.a2 * (theta_weight() * tilt_gap);
    return detail::make_report(Method::Tcm, alpha(), k, total, capitals);
  }

  AllocationReport euler_rooted(int k) const {
    const AllocationReport base = tcm(k);
    if (!(base.total > 0.0)) {
      fail(ErrorKind::NonPositiveTCM, "TCM of order " + std::to_string(k) + " at alpha=" +
                                          std::to_string(alpha()) + " is " +
                                          std::to_string(base.total) + ", cannot take its root");
    }
    const double scale = std::pow(base.total, 1.0 - 1.0 / k);
    return detail::make_report(Method::EulerRooted, alpha(), k, std::pow(base.total, 1.0 / k),
                               base.capitals / scale);
  }

  AllocationReport combined(const CombinedWeights& m) const {
    if (!(m.m1 >= 0.0 && m.m2 >= 0.0 && m.m3 >= 0.0)) {
      fail(ErrorKind::Validation, "combined weights m1, m2, m3 must be non-negative");
    }
    const AllocationReport a = cte(), b = tv(), c = tcm(3);
    AllocationReport r = detail::make_report(
        Method::Combined, alpha(), 3, m.m1 * a.total + m.m2 * b.total + m.m3 * c.total,
        m.m1 * a.capitals + m.m2 * b.capitals + m.m3 * c.capitals);
    r.weights = m;
    return r;
  }

  AllocationReport run(Method method, int k, const CombinedWeights& m = {}) const {
    switch (method) {
      case Method::Cte: return cte();
      case Method::Tv: return tv();
      case Method::Tcm: return tcm(k);
      case Method::EulerRooted: return euler_rooted(k);
      case Method::Combined: return combined(m);
    }
    fail(ErrorKind::Domain, "unknown allocation method");
  }

  /// E[X_i X_j | S > s_α].
  double conditional_cross_moment(Eigen::Index i, Eigen::Index j) const {
    check_index(i);
    check_index(j);
    require_order(2, "conditional_cross_moment");
    const auto& t = tails_.table();
    const auto& a0 = coef_.a0;
    const auto& a1 = coef_.a1;
    const auto& a2 = coef_.a2;
    const double w1 = theta_weight();
    const double w2 = tails_.ladder().tail_weight(2);
    const double residual_cov =
        model_.sigma()(i, j) - a1(i) * a1(j) * model_.total_variance();
    return a1(i) * a1(j) * t.at(0, 2) + (a1(i) * a0(j) + a0(i) * a1(j)) * t.at(0, 1) +
           (a1(i) * a2(j) + a2(i) * a1(j)) * w1 * t.at(1, 1) + a0(i) * a0(j) +
           (a2(i) * a0(j) + a0(i) * a2(j) + residual_cov) * w1 + a2(i) * a2(j) * w2;
  }

 private:
  void check_index(Eigen::Index i) const {
    if (i < 0 || i >= model_.dimension()) {
      fail(ErrorKind::Domain, "component index " + std::to_string(i) + " out of range");
    }
  }
  void require_order(int k, const char* what) const {
    if (k < 2 || k > tails_.max_order()) {
      fail(ErrorKind::Domain, std::string(what) + ": order " + std::to_string(k) +
                                  " needs 2 <= k <= " + std::to_string(tails_.max_order()));
    }
  }

  MultivariateNMVM model_;
  AllocationCoefficients coef_;
  TailMoments tails_;
};

inline AllocationReport cte_allocation(const MultivariateNMVM& model, double alpha) {
  return AllocationEngine(model, alpha, 1).cte();
}

inline AllocationReport tv_allocation(const MultivariateNMVM& model, double alpha) {
  return AllocationEngine(model, alpha, 2).tv();
}

inline AllocationReport tcm_allocation(const MultivariateNMVM& model, double alpha, int k) {
  return AllocationEngine(model, alpha, std::max(k, 2)).tcm(k);
}

inline AllocationReport euler_rooted_allocation(const MultivariateNMVM& model, double alpha,
                                                int k) {
  return AllocationEngine(model, alpha, std::max(k, 2)).euler_rooted(k);
}

inline AllocationReport combined_allocation(const MultivariateNMVM& model, double alpha,
                                            double m1, double m2, double m3) {
  return AllocationEngine(model, alpha, 3).combined({m1, m2, m3});
}

inline double tail_cov_power(const MultivariateNMVM& model, Eigen::Index i, double alpha, int k) {
  return AllocationEngine(model, alpha, std::max(k, 2)).tail_cov_power(i, k);
}

inline double conditional_cross_moment(const MultivariateNMVM& model, Eigen::Index i,
                                       Eigen::Index j, double alpha) {
  return AllocationEngine(model, alpha, 2).conditional_cross_moment(i, j);
}

}  // namespace nmvm
