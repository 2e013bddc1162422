#pragma once

// Brute-force Monte Carlo oracle. Draws X = μ + Θγ + √Θ L Z row by row and
// estimates tail functionals by conditional sample averages above the
// empirical aggregate quantile. Nothing here touches the tilt ladder.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "nmvm/allocation.hpp"
#include "nmvm/distribution.hpp"
#include "nmvm/error.hpp"
#include "nmvm/mixing.hpp"

namespace nmvm {

struct SampleBatch {
  Eigen::MatrixXd draws;      // count x n
  Eigen::VectorXd thetas;     // paired mixing draws
  Eigen::VectorXd aggregate;  // row sums of draws
  std::uint64_t seed = 0;
  std::size_t count = 0;
};

struct SampleOptions {
  std::size_t chunk_size = std::size_t{1} << 16;
  unsigned threads = 0;  // 0: hardware concurrency
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t chunk_seed(std::uint64_t seed, std::uint64_t chunk) {
  return splitmix64(splitmix64(seed) ^ splitmix64(chunk + 0x632be59bd9b4e019ULL));
}

// Lower-triangular L with LL' = Σ for positive semi-definite Σ. A pivot that
// vanishes within tolerance zeroes its column; a clearly negative one fails.
inline Eigen::MatrixXd psd_cholesky(const Eigen::MatrixXd& sigma) {
  const Eigen::Index n = sigma.rows();
  const double scale = std::max(sigma.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  const double tol = 1e-10 * scale;
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = sigma(j, j) - L.row(j).head(j).squaredNorm();
    if (d < -tol) {
      fail(ErrorKind::FactorisationFailure,
           "sigma has no real square root (pivot " + std::to_string(j) + " = " +
               std::to_string(d) + ")");
    }
    if (d <= tol) continue;
    L(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      L(i, j) = (sigma(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
    }
  }
  if ((L * L.transpose() - sigma).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    fail(ErrorKind::FactorisationFailure, "sigma is not positive semi-definite within tolerance");
  }
  return L;
}

}  // namespace detail

/// Draws `count` rows. Chunk c uses its own generator seeded from (seed, c),
/// so the batch depends only on (seed, count, chunk_size), never on threads.
inline SampleBatch sample_nmvm(const MultivariateNMVM& model, std::size_t count,
                               std::uint64_t seed, const SampleOptions& options = {}) {
  if (count == 0) fail(ErrorKind::Domain, "sample count must be positive");
  if (options.chunk_size == 0) fail(ErrorKind::Domain, "chunk size must be positive");
  const Eigen::Index n = model.dimension();
  const Eigen::MatrixXd L = detail::psd_cholesky(model.sigma());

  SampleBatch batch;
  batch.seed = seed;
  batch.count = count;
  batch.draws.resize(static_cast<Eigen::Index>(count), n);
  batch.thetas.resize(static_cast<Eigen::Index>(count));

  const std::size_t chunks = (count + options.chunk_size - 1) / options.chunk_size;
  const auto fill = [&](std::size_t chunk) {
    Rng rng(detail::chunk_seed(seed, chunk));
    std::normal_distribution<double> normal;
    Eigen::VectorXd z(n);
    const std::size_t begin = chunk * options.chunk_size;
    const std::size_t end = std::min(count, begin + options.chunk_size);
    for (std::size_t r = begin; r < end; ++r) {
      const double theta = model.mixing().draw(rng);
      for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
      const auto row = static_cast<Eigen::Index>(r);
      batch.thetas(row) = theta;
      batch.draws.row(row) =
          (model.mu() + theta * model.gamma() + std::sqrt(theta) * (L * z)).transpose();
    }
  };

  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(chunks)));
  if (threads == 1) {
    for (std::size_t c = 0; c < chunks; ++c) fill(c);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t c = t; c < chunks; c += threads) fill(c);
      });
    }
    for (auto& th : pool) th.join();
  }
  batch.aggregate = batch.draws.rowwise().sum();
  return batch;
}

inline void write_batch_csv(const SampleBatch& batch, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Validation, "cannot open " + path + " for writing");
  for (Eigen::Index i = 0; i < batch.draws.cols(); ++i) out << 'x' << (i + 1) << ',';
  out << "theta\n";
  char buf[32];
  for (Eigen::Index r = 0; r < batch.draws.rows(); ++r) {
    for (Eigen::Index i = 0; i < batch.draws.cols(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,", batch.draws(r, i));
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g\n", batch.thetas(r));
    out << buf;
  }
}

enum class Functional { TM, TCM, CteAlloc, TvAlloc, TcmAlloc, CrossMoment };

struct TailFunctional {
  Functional kind = Functional::TM;
  int k = 1;
  Eigen::Index i = 0;
  Eigen::Index j = 0;

  std::string label() const {
    switch (kind) {
      case Functional::TM: return "tm_" + std::to_string(k);
      case Functional::TCM: return "tcm_" + std::to_string(k);
      case Functional::CteAlloc: return "cte_alloc_" + std::to_string(i + 1);
      case Functional::TvAlloc: return "tv_alloc_" + std::to_string(i + 1);
      case Functional::TcmAlloc:
        return "tcm_alloc_" + std::to_string(i + 1) + "_k" + std::to_string(k);
      case Functional::CrossMoment:
        return "cross_" + std::to_string(i + 1) + "_" + std::to_string(j + 1);
    }
    return "?";
  }
};

struct EmpiricalTailEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t tail_count = 0;
  std::string warning;
};

/// Row indices above the empirical α-quantile, for the whole batch and for
/// each of `batches` equal consecutive sub-batches (each with its own quantile).
struct TailSelection {
  double alpha = 0.0;
  double threshold = 0.0;
  std::vector<std::size_t> rows;
  std::vector<std::vector<std::size_t>> batch_rows;
};

namespace detail {

// Rows in [begin, end) whose aggregate exceeds the order statistic at rank ceil(α m).
inline std::vector<std::size_t> tail_rows(const Eigen::VectorXd& s, std::size_t begin,
                                          std::size_t end, double alpha, double* threshold) {
  const std::size_t m = end - begin;
  std::vector<double> sorted(s.data() + begin, s.data() + end);
  const auto rank = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(m)));
  const std::size_t pos = std::min(m - 1, rank == 0 ? 0 : rank - 1);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(pos), sorted.end());
  const double cut = sorted[pos];
  if (threshold) *threshold = cut;
  std::vector<std::size_t> rows;
  for (std::size_t r = begin; r < end; ++r) {
    if (s(static_cast<Eigen::Index>(r)) > cut) rows.push_back(r);
  }
  return rows;
}

inline double estimate_on(const SampleBatch& batch, const std::vector<std::size_t>& rows,
                          const TailFunctional& f) {
  const auto& X = batch.draws;
  const auto& S = batch.aggregate;
  const double m = static_cast<double>(rows.size());
  const auto mean = [&](auto&& g) {
    double acc = 0.0;
    for (std::size_t r : rows) acc += g(static_cast<Eigen::Index>(r));
    return acc / m;
  };
  const auto cte = [&] { return mean([&](Eigen::Index r) { return S(r); }); };
  const auto xi_mean = [&] { return mean([&](Eigen::Index r) { return X(r, f.i); }); };
  switch (f.kind) {
    case Functional::TM:
      return mean([&](Eigen::Index r) { return std::pow(S(r), f.k); });
    case Functional::TCM: {
      const double c = cte();
      return mean([&](Eigen::Index r) { return std::pow(S(r) - c, f.k); });
    }
    case Functional::CteAlloc:
      return xi_mean();
    case Functional::TvAlloc:
    case Functional::TcmAlloc: {
      const int k = f.kind == Functional::TvAlloc ? 2 : f.k;
      const double c = cte(), xm = xi_mean();
      return mean([&](Eigen::Index r) { return (X(r, f.i) - xm) * std::pow(S(r) - c, k - 1); });
    }
    case Functional::CrossMoment:
      return mean([&](Eigen::Index r) { return X(r, f.i) * X(r, f.j); });
  }
  return std::nan("");
}

}  // namespace detail

inline TailSelection select_tail(const SampleBatch& batch, double alpha, int batches = 50) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    fail(ErrorKind::Domain, "alpha must lie in (0,1), got " + std::to_string(alpha));
  }
  if (batches < 2 || batch.count < static_cast<std::size_t>(batches)) {
    fail(ErrorKind::Domain, "need at least 2 sub-batches and one draw per sub-batch");
  }
  TailSelection sel;
  sel.alpha = alpha;
  sel.rows = detail::tail_rows(batch.aggregate, 0, batch.count, alpha, &sel.threshold);
  const std::size_t per = batch.count / static_cast<std::size_t>(batches);
  for (int b = 0; b < batches; ++b) {
    const std::size_t begin = static_cast<std::size_t>(b) * per;
    sel.batch_rows.push_back(detail::tail_rows(batch.aggregate, begin, begin + per, alpha, nullptr));
  }
  return sel;
}

/// Plug-in estimate on the whole batch; standard error from the spread of the
/// same estimator over the sub-batches.
inline EmpiricalTailEstimate empirical_tail_functional(const SampleBatch& batch,
                                                       const TailSelection& sel,
                                                       const TailFunctional& f) {
  const Eigen::Index n = batch.draws.cols();
  if (f.i < 0 || f.i >= n || f.j < 0 || f.j >= n) {
    fail(ErrorKind::Domain, "component index out of range in " + f.label());
  }
  if ((f.kind == Functional::TM || f.kind == Functional::TCM || f.kind == Functional::TcmAlloc) &&
      f.k < 1) {
    fail(ErrorKind::Domain, "order must be positive in " + f.label());
  }
  if (sel.rows.empty()) {
    fail(ErrorKind::EmptyTail, "no draw exceeds the empirical " + std::to_string(sel.alpha) +
                                   "-quantile");
  }
  EmpiricalTailEstimate est;
  est.tail_count = sel.rows.size();
  est.value = detail::estimate_on(batch, sel.rows, f);
  if (est.tail_count < 100) {
    est.warning = "only " + std::to_string(est.tail_count) + " tail draws for " + f.label();
  }
  std::vector<double> sub;
  for (const auto& rows : sel.batch_rows) {
    if (!rows.empty()) sub.push_back(detail::estimate_on(batch, rows, f));
  }
  if (sub.size() >= 2) {
    double mean = 0.0;
    for (double v : sub) mean += v;
    mean /= static_cast<double>(sub.size());
    double ss = 0.0;
    for (double v : sub) ss += (v - mean) * (v - mean);
    est.std_error = std::sqrt(ss / static_cast<double>(sub.size() - 1) /
                              static_cast<double>(sub.size()));
  }
  return est;
}

inline EmpiricalTailEstimate empirical_tail_functional(const SampleBatch& batch, double alpha,
                                                       const TailFunctional& f) {
  return empirical_tail_functional(batch, select_tail(batch, alpha), f);
}

/// Analytic counterpart of a tail functional from a prepared engine.
inline double analytic_tail_functional(const AllocationEngine& engine, const TailFunctional& f) {
  switch (f.kind) {
    case Functional::TM: return engine.tails().tm(f.k);
    case Functional::TCM: return engine.tails().tcm(f.k);
    case Functional::CteAlloc: return engine.cte().capitals(f.i);
    case Functional::TvAlloc: return engine.tv().capitals(f.i);
    case Functional::TcmAlloc: return engine.tcm(f.k).capitals(f.i);
    case Functional::CrossMoment: return engine.conditional_cross_moment(f.i, f.j);
  }
  return std::nan("");
}

struct ValidationRow {
  std::string quantity;  // "<functional>@<alpha>"
  double alpha = 0.0;
  double analytic = 0.0;
  double empirical = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  bool flagged = false;
};

struct ValidationOptions {
  double z_limit = 4.0;
  int batches = 50;
  int tcm_alloc_order = 3;
  SampleOptions sampling;
  std::function<void(ValidationRow&)> tamper;  // test hook applied to each row before scoring
  std::function<void(const std::string&)> warn;
};

struct ValidationReport {
  std::vector<ValidationRow> rows;
  std::size_t flagged = 0;
  bool passed() const { return flagged == 0; }
};

/// The functionals compared for one α: TM and TCM up to k_max, CTE/TV/TCM
/// capitals for every component, and every cross moment with i <= j.
inline std::vector<TailFunctional> validation_functionals(Eigen::Index n, int k_max,
                                                          int tcm_alloc_order) {
  std::vector<TailFunctional> out;
  for (int k = 1; k <= k_max; ++k) out.push_back({Functional::TM, k});
  for (int k = 1; k <= k_max; ++k) out.push_back({Functional::TCM, k});
  for (Eigen::Index i = 0; i < n; ++i) out.push_back({Functional::CteAlloc, 1, i});
  for (Eigen::Index i = 0; i < n; ++i) out.push_back({Functional::TvAlloc, 2, i});
  for (Eigen::Index i = 0; i < n; ++i) out.push_back({Functional::TcmAlloc, tcm_alloc_order, i});
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) out.push_back({Functional::CrossMoment, 2, i, j});
  }
  return out;
}

inline ValidationReport validation_report(const MultivariateNMVM& model,
                                          const std::vector<double>& alphas, int k_max,
                                          std::size_t count, std::uint64_t seed,
                                          const ValidationOptions& options = {}) {
  if (k_max < 1) fail(ErrorKind::Domain, "k_max must be positive");
  const SampleBatch batch = sample_nmvm(model, count, seed, options.sampling);
  const auto functionals =
      validation_functionals(model.dimension(), k_max, options.tcm_alloc_order);
  ValidationReport report;
  for (double alpha : alphas) {
    TailMomentOptions tm_options;
    if (options.warn) tm_options.warn = options.warn;
    const AllocationEngine engine(model, alpha, std::max({k_max, options.tcm_alloc_order, 3}),
                                  tm_options);
    const TailSelection sel = select_tail(batch, alpha, options.batches);
    char tag[32];
    std::snprintf(tag, sizeof tag, "@%g", alpha);
    for (const auto& f : functionals) {
      const EmpiricalTailEstimate est = empirical_tail_functional(batch, sel, f);
      if (!est.warning.empty() && options.warn) options.warn(est.warning);
      ValidationRow row;
      row.quantity = f.label() + tag;
      row.alpha = alpha;
      row.analytic = analytic_tail_functional(engine, f);
      row.empirical = est.value;
      row.std_error = est.std_error;
      if (options.tamper) options.tamper(row);
      // Quantities that are exact in every sample (e.g. TCM_1) have SE at roundoff level.
      const double se = std::max(row.std_error, 1e-10 * std::max(1.0, std::fabs(row.analytic)));
      row.z = (row.analytic - row.empirical) / se;
      row.flagged = !(std::fabs(row.z) <= options.z_limit);
      report.flagged += row.flagged ? 1 : 0;
      report.rows.push_back(row);
    }
  }
  return report;
}

}  // namespace nmvm
