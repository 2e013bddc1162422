#pragma once

// Tail moments E[S^k | S > s_α] and tail central moments of a univariate
// NMVM law, computed through the tilted laws S^{*(l)}: same (μ, γ, σ²),
// mixing density θ^l π(θ) / c^{*(l)}. Every level conditions on the base
// quantile s_α, never on a tilted law's own quantile.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "nmvm/distribution.hpp"
#include "nmvm/error.hpp"
#include "nmvm/numeric.hpp"

namespace nmvm {

struct TiltLevel {
  double moment = 1.0;     // c^{*(l)} = E[Θ^l]
  double tail_mass = 1.0;  // 1 - α^{*(l)} = F̄_{S^{*(l)}}(s_α)
  double hazard = 0.0;     // h_{S^{*(l)}}(s_α)
};

struct TiltLadder {
  double alpha = 0.0;
  double threshold = 0.0;  // s_α of the base law
  std::vector<TiltLevel> levels;

  int max_level() const { return static_cast<int>(levels.size()) - 1; }

  /// c^{*(l)} (1 - α^{*(l)}) / (1 - α): the weight that turns conditional
  /// expectations under S^{*(l)} into θ^l-weighted ones under S.
  double tail_weight(int level) const {
    const auto& l = levels.at(static_cast<std::size_t>(level));
    return l.moment * l.tail_mass / levels.front().tail_mass;
  }

  /// r_l = c_{l+1} tail_{l+1} / (c_l tail_l), the step factor of the recursion.
  double step_ratio(int level) const {
    const auto& a = levels.at(static_cast<std::size_t>(level));
    const auto& b = levels.at(static_cast<std::size_t>(level + 1));
    return (b.moment * b.tail_mass) / (a.moment * a.tail_mass);
  }
};

inline TiltLadder build_ladder(const UnivariateNMVM& model, double alpha, int max_level) {
  model.validate();
  if (max_level < 0) fail(ErrorKind::Domain, "max_level must be non-negative");
  model.mixing.require_moment(max_level);
  TiltLadder ladder;
  ladder.alpha = alpha;
  ladder.threshold = quantile(model, alpha);
  ladder.levels.reserve(static_cast<std::size_t>(max_level) + 1);
  for (int l = 0; l <= max_level; ++l) {
    const UnivariateNMVM level_model = model.tilted(l);
    TiltLevel level;
    level.moment = model.mixing.moment(l);
    level.tail_mass = survival(level_model, ladder.threshold);
    if (!(level.tail_mass > 1e-300)) {
      fail(ErrorKind::TailUnderflow, "tail mass of tilt level " + std::to_string(l) +
                                         " underflows at s_alpha=" +
                                         std::to_string(ladder.threshold));
    }
    level.hazard = density(level_model, ladder.threshold) / level.tail_mass;
    ladder.levels.push_back(level);
  }
  return ladder;
}

/// Triangular table T[l][k] = E[(S^{*(l)})^k | S^{*(l)} > s_α], l = 0..K, k = 0..K-l.
class TMTable {
 public:
  TMTable() = default;
  explicit TMTable(int max_order) : rows_(static_cast<std::size_t>(max_order) + 1) {
    for (int l = 0; l <= max_order; ++l) {
      rows_[static_cast<std::size_t>(l)].assign(static_cast<std::size_t>(max_order - l) + 1, 1.0);
    }
  }

  int max_order() const { return static_cast<int>(rows_.size()) - 1; }
  double at(int level, int order) const {
    return rows_.at(static_cast<std::size_t>(level)).at(static_cast<std::size_t>(order));
  }
  double& at(int level, int order) {
    return rows_.at(static_cast<std::size_t>(level)).at(static_cast<std::size_t>(order));
  }

 private:
  std::vector<std::vector<double>> rows_;
};

/// Fills the table from a ladder reaching level `max_order`:
///   T[l][k] = μ T[l][k-1] + r_l σ² s_α^{k-1} h_{l+1}
///             + r_l (γ T[l+1][k-1] + (k-1) σ² T[l+1][k-2]),
/// level-descending, order-ascending, seeded by T[l][0] = 1.
inline TMTable tail_moment_table(const UnivariateNMVM& model, const TiltLadder& ladder,
                                 int max_order) {
  if (max_order < 1) fail(ErrorKind::Domain, "max_order must be at least 1");
  if (ladder.max_level() < max_order) {
    fail(ErrorKind::Domain, "ladder reaches level " + std::to_string(ladder.max_level()) +
                                ", order " + std::to_string(max_order) + " needs that many levels");
  }
  TMTable table(max_order);
  const double s = ladder.threshold;
  for (int l = max_order - 1; l >= 0; --l) {
    const double r = ladder.step_ratio(l);
    const double next_hazard = ladder.levels[static_cast<std::size_t>(l + 1)].hazard;
    double s_power = 1.0;  // s_α^{k-1}
    for (int k = 1; k <= max_order - l; ++k) {
      double inner = model.gamma * table.at(l + 1, k - 1);
      if (k >= 2) inner += (k - 1) * model.sigma2 * table.at(l + 1, k - 2);
      table.at(l, k) = model.mu * table.at(l, k - 1) +
                       r * (model.sigma2 * s_power * next_hazard + inner);
      s_power *= s;
    }
  }
  return table;
}

struct Expansion {
  double value = 0.0;
  double condition = 1.0;  // Σ|terms| / |value|
};

/// E[(S^{*(level)} - shift)^k | S^{*(level)} > s_α] by binomial expansion of
/// the table row, summed with compensation.
inline Expansion binomial_expand(const TMTable& table, int level, double shift, int k) {
  if (k < 0 || level < 0 || level + k > table.max_order()) {
    fail(ErrorKind::Domain, "binomial_expand: (level=" + std::to_string(level) + ", k=" +
                                std::to_string(k) + ") outside the table");
  }
  numeric::CompensatedSum sum;
  double binom = 1.0;
  double power = 1.0;  // (-shift)^j
  for (int j = 0; j <= k; ++j) {
    sum.add(binom * table.at(level, k - j) * power);
    binom = binom * (k - j) / (j + 1);
    power *= -shift;
  }
  Expansion out;
  out.value = sum.value();
  out.condition = out.value != 0.0 ? sum.magnitude() / std::fabs(out.value)
                                   : std::numeric_limits<double>::infinity();
  return out;
}

struct TailMomentOptions {
  int max_order = 8;
  double condition_warning = 1e12;
  std::function<void(const std::string&)> warn = [](const std::string& message) {
    std::cerr << "warning: " << message << '\n';
  };
};

/// One ladder and one table for a (model, α) pair, reused by every query.
class TailMoments {
 public:
  TailMoments(UnivariateNMVM model, double alpha, int max_order, TailMomentOptions options = {})
      : model_(std::move(model)), options_(std::move(options)) {
    if (max_order < 1 || max_order > options_.max_order) {
      fail(ErrorKind::Domain, "tail moment order " + std::to_string(max_order) +
                                  " outside the supported range 1.." +
                                  std::to_string(options_.max_order));
    }
    ladder_ = build_ladder(model_, alpha, max_order);
    table_ = tail_moment_table(model_, ladder_, max_order);
  }

  const UnivariateNMVM& model() const { return model_; }
  const TiltLadder& ladder() const { return ladder_; }
  const TMTable& table() const { return table_; }
  double alpha() const { return ladder_.alpha; }
  double threshold() const { return ladder_.threshold; }
  int max_order() const { return table_.max_order(); }

  /// TM_{α,k}(S).
  double tm(int k) const { return table_.at(0, k); }
  double cte() const { return table_.at(0, 1); }

  /// TCM_{α,k}(S).
  double tcm(int k) const { return shifted_tail_power(0, cte(), k); }

  /// E[(S^{*(level)} - shift)^k | S^{*(level)} > s_α].
  double shifted_tail_power(int level, double shift, int k) const {
    const Expansion e = binomial_expand(table_, level, shift, k);
    if (k >= 2 && e.condition > options_.condition_warning && options_.warn) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "binomial expansion (level %d, order %d) lost digits: condition %.3g", level,
                    k, e.condition);
      options_.warn(buf);
    }
    return e.value;
  }

 private:
  UnivariateNMVM model_;
  TailMomentOptions options_;
  TiltLadder ladder_;
  TMTable table_;
};

inline TMTable tail_moment_table(const UnivariateNMVM& model, double alpha, int max_order) {
  return tail_moment_table(model, build_ladder(model, alpha, max_order), max_order);
}

inline double tail_central_moment(const UnivariateNMVM& model, double alpha, int k) {
  if (k < 1) fail(ErrorKind::Domain, "TCM order must be positive");
  return TailMoments(model, alpha, k).tcm(k);
}

inline double shifted_tail_power(const UnivariateNMVM& model, double alpha, int level,
                                 double shift, int k) {
  return TailMoments(model, alpha, std::max(1, level + k)).shifted_tail_power(level, shift, k);
}

/// CTE_α(S) = μ + c* (1-α*)/(1-α) (γ + σ² h_{S*}(s_α)).
inline double cte_closed_form(const UnivariateNMVM& model, const TiltLadder& ladder) {
  const double w1 = ladder.tail_weight(1);
  return model.mu + w1 * (model.gamma + model.sigma2 * ladder.levels.at(1).hazard);
}

inline double cte_closed_form(const UnivariateNMVM& model, double alpha) {
  return cte_closed_form(model, build_ladder(model, alpha, 1));
}

/// (TM_{α,2}(S), TV_α(S)) from the closed forms in c*, c**, α*, α**, h_{S*}, h_{S**}.
inline std::pair<double, double> tm2_tv_closed_form(const UnivariateNMVM& model,
                                                    const TiltLadder& ladder) {
  const double mu = model.mu, g = model.gamma, s2 = model.sigma2, s = ladder.threshold;
  const double w1 = ladder.tail_weight(1), w2 = ladder.tail_weight(2);
  const double h1 = ladder.levels.at(1).hazard, h2 = ladder.levels.at(2).hazard;
  const double tm2 = mu * mu + w1 * (s2 + 2.0 * mu * g + s2 * (s + mu) * h1) +
                     w2 * (g * g + g * s2 * h2);
  const double shift = w1 * (g + s2 * h1);
  const double tv = w1 * s2 * (1.0 + (s - mu) * h1) + w2 * g * (g + s2 * h2) - shift * shift;
  return {tm2, tv};
}

inline std::pair<double, double> tm2_tv_closed_form(const UnivariateNMVM& model, double alpha) {
  return tm2_tv_closed_form(model, build_ladder(model, alpha, 2));
}

}  // namespace nmvm
