#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "nmvm/nmvm.hpp"

namespace nmvm::cli {

enum ExitCode { kOk = 0, kUsage = 1, kValidation = 2, kNumeric = 3 };

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse:
      return kUsage;
    case ErrorKind::Validation:
    case ErrorKind::DegenerateAggregate:
    case ErrorKind::FactorisationFailure:
    case ErrorKind::NonPositivePrice:
    case ErrorKind::InsufficientData:
    case ErrorKind::EmptyTail:
      return kValidation;
    case ErrorKind::Domain:
    case ErrorKind::MomentNotFinite:
    case ErrorKind::TailUnderflow:
    case ErrorKind::NonPositiveTCM:
    case ErrorKind::Convergence:
      return kNumeric;
  }
  return kNumeric;
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(s);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) throw UsageError(what + ": '" + s + "' is not a number");
  return v;
}

inline double parse_alpha(const std::string& s) {
  const double a = parse_double(s, "--alpha");
  if (!(a > 0.0 && a < 1.0)) throw UsageError("--alpha: " + s + " is not in (0,1)");
  return a;
}

/// "start:stop:points" or a comma list; strictly increasing, all in (0,1).
inline std::vector<double> parse_alpha_grid(const std::string& spec) {
  std::vector<double> grid;
  const auto range = split(spec, ':');
  if (range.size() == 3) {
    const double lo = parse_alpha(range[0]), hi = parse_alpha(range[1]);
    const double pts = parse_double(range[2], "--alpha-grid points");
    if (!(pts >= 1.0) || pts != std::floor(pts)) {
      throw UsageError("--alpha-grid: points must be a positive integer");
    }
    const int n = static_cast<int>(pts);
    if (n == 1) {
      grid.push_back(lo);
    } else {
      for (int i = 0; i < n; ++i) grid.push_back(lo + (hi - lo) * i / (n - 1));
    }
  } else if (range.size() == 1) {
    for (const auto& a : split(spec, ',')) grid.push_back(parse_alpha(a));
  } else {
    throw UsageError("--alpha-grid: expected start:stop:points or a comma list");
  }
  if (grid.empty()) throw UsageError("--alpha-grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw UsageError("--alpha-grid must be strictly increasing");
  }
  return grid;
}

inline Eigen::VectorXd parse_weights(const std::string& spec, Eigen::Index n) {
  const auto cells = split(spec, ',');
  if (static_cast<Eigen::Index>(cells.size()) != n) {
    throw UsageError("--weights: " + std::to_string(cells.size()) + " values for a " +
                     std::to_string(n) + "-dimensional model");
  }
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i) = parse_double(cells[static_cast<std::size_t>(i)], "--weights");
  }
  return w;
}

struct MethodSpec {
  Method method = Method::Cte;
  std::string label;
  CombinedWeights weights;
};

inline std::string pq_label(double p, double q) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "combined[p=%g;q=%g]", p, q);
  return buf;
}

/// p ∈ {0, 0.5, ..., 3}, q ∈ {0, 0.001, ..., 0.005}, m1 = 1.
inline std::vector<MethodSpec> pq_grid_preset() {
  std::vector<MethodSpec> out;
  for (int ip = 0; ip <= 6; ++ip) {
    for (int iq = 0; iq <= 5; ++iq) {
      const double p = 0.5 * ip, q = 0.001 * iq;
      out.push_back({Method::Combined, pq_label(p, q), {1.0, p, q}});
    }
  }
  return out;
}

struct Options {
  std::string model_path;
  std::string weights;
  std::string alpha;
  std::string alpha_grid;
  std::string method = "cte";
  int order = 3;
  double m1 = 1.0, m2 = 0.0, m3 = 0.0;
  bool pq_grid = false;
  std::size_t samples = 1000000;
  std::uint64_t seed = 20240601;
  std::string out;
  bool full_precision = false;
  std::string prices;
  std::string losses;
  std::string corrupt;
  unsigned threads = 0;
};

class App {
 public:
  App(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(int argc, const char* const* argv) {
    CLI::App app{"Tail moments and capital allocation for normal mean-variance mixtures",
                 "nmvm"};
    app.require_subcommand(1);
    auto add_model = [&](CLI::App* sub) {
      sub->add_option("--model", opt_.model_path, "model JSON file")->required();
      sub->add_option("--weights", opt_.weights, "comma-separated nominal weights");
    };
    auto add_alpha = [&](CLI::App* sub) {
      sub->add_option("--alpha", opt_.alpha, "confidence level in (0,1)");
      sub->add_option("--alpha-grid", opt_.alpha_grid, "start:stop:points or a comma list");
    };
    auto add_output = [&](CLI::App* sub) {
      sub->add_option("--out", opt_.out, "output CSV (stdout when omitted)");
      sub->add_flag("--full-precision", opt_.full_precision, "print 17 significant digits");
    };

    auto* tm = app.add_subcommand("tm", "tail moments TM_k of the aggregate for k = 1..order");
    auto* tcm = app.add_subcommand("tcm", "tail central moments TCM_k for k = 1..order");
    for (auto* sub : {tm, tcm}) {
      add_model(sub);
      add_alpha(sub);
      add_output(sub);
      sub->add_option("--order", opt_.order, "highest order k")->check(CLI::Range(1, 8));
    }

    auto* allocate = app.add_subcommand("allocate", "one allocation at one confidence level");
    auto* sweep = app.add_subcommand("sweep", "allocations over an alpha grid and method list");
    for (auto* sub : {allocate, sweep}) {
      add_model(sub);
      add_alpha(sub);
      add_output(sub);
      sub->add_option("--method", opt_.method, "cte, tv, tcm, combined, euler_rooted (comma list)");
      sub->add_option("--order", opt_.order, "k for tcm and euler_rooted")->check(CLI::Range(2, 8));
      sub->add_option("--m1", opt_.m1, "combined weight on CTE");
      sub->add_option("--m2", opt_.m2, "combined weight on TV (p)");
      sub->add_option("--m3", opt_.m3, "combined weight on TCM_3 (q)");
    }
    sweep->add_flag("--pq-grid", opt_.pq_grid,
                    "add the combined p in [0,3], q in [0,0.005] preset (m1 = 1)");
    sweep->add_option("--threads", opt_.threads, "worker threads (0: all cores)");

    auto* losses = app.add_subcommand("losses", "daily log losses from a price CSV");
    losses->add_option("--prices", opt_.prices, "price CSV: date,<label>,...")->required();
    add_output(losses);

    auto* stats = app.add_subcommand("stats", "descriptive statistics of daily log losses");
    auto* src = stats->add_option_group("input");
    src->add_option("--prices", opt_.prices, "price CSV; statistics of its log losses");
    src->add_option("--losses", opt_.losses, "loss CSV in the same layout");
    src->require_option(1);
    add_output(stats);

    auto* validate = app.add_subcommand("validate", "compare analytic values with Monte Carlo");
    add_model(validate);
    add_alpha(validate);
    add_output(validate);
    validate->add_option("--order", opt_.order, "highest TM/TCM order")->check(CLI::Range(1, 8));
    validate->add_option("--samples", opt_.samples, "Monte Carlo draws")->check(CLI::PositiveNumber);
    validate->add_option("--seed", opt_.seed, "random seed");
    validate->add_option("--threads", opt_.threads, "sampling threads (0: all cores)");
    validate->add_option("--corrupt", opt_.corrupt, "")->group("");

    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out_ << app.help();
      return kOk;
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) {
        out_ << app.help();
        return kOk;
      }
      err_ << "error: " << e.what() << '\n';
      return kUsage;
    }

    try {
      if (*tm) return run_moments(false);
      if (*tcm) return run_moments(true);
      if (*allocate) return run_allocate(false);
      if (*sweep) return run_allocate(true);
      if (*losses) return run_losses();
      if (*stats) return run_stats();
      if (*validate) return run_validate();
    } catch (const UsageError& e) {
      err_ << "error: " << e.what() << '\n';
      return kUsage;
    } catch (const Error& e) {
      err_ << "error: " << e.what() << '\n';
      return exit_code_for(e.kind());
    }
    return kUsage;
  }

 private:
  io::LoadedModel load() const {
    io::LoadedModel m = io::load_model(opt_.model_path);
    if (!opt_.weights.empty()) {
      m.model = reweight(m.model, parse_weights(opt_.weights, m.model.dimension()));
    }
    return m;
  }

  std::vector<double> alphas(bool grid_default) const {
    if (!opt_.alpha.empty() && !opt_.alpha_grid.empty()) {
      throw UsageError("give either --alpha or --alpha-grid, not both");
    }
    if (!opt_.alpha_grid.empty()) return parse_alpha_grid(opt_.alpha_grid);
    if (!opt_.alpha.empty()) return parse_alpha_grid(opt_.alpha);
    if (grid_default) throw UsageError("--alpha-grid is required");
    throw UsageError("--alpha is required");
  }

  TailMomentOptions tm_options() const {
    TailMomentOptions o;
    std::ostream* err = &err_;
    o.warn = [err](const std::string& msg) { *err << "warning: " << msg << '\n'; };
    return o;
  }

  void emit(const std::string& text) const {
    if (opt_.out.empty()) {
      out_ << text;
    } else {
      io::write_atomic(opt_.out, text);
    }
  }

  std::string num(double v) const { return io::format_number(v, opt_.full_precision); }

  int run_moments(bool central) {
    const auto m = load();
    const UnivariateNMVM s = aggregate(m.model);
    std::string text = central ? "alpha,k,tcm\n" : "alpha,k,tm\n";
    for (double a : alphas(false)) {
      const TailMoments tails(s, a, opt_.order, tm_options());
      for (int k = 1; k <= opt_.order; ++k) {
        text += num(a) + "," + std::to_string(k) + "," + num(central ? tails.tcm(k) : tails.tm(k)) +
                "\n";
      }
    }
    emit(text);
    return kOk;
  }

  std::vector<MethodSpec> methods(bool sweep) const {
    std::vector<MethodSpec> out;
    for (const auto& name : split(opt_.method, ',')) {
      const auto m = parse_method(name);
      if (!m) throw UsageError("--method: unknown method '" + name + "'");
      MethodSpec spec{*m, name, {opt_.m1, opt_.m2, opt_.m3}};
      if (*m == Method::Combined && (opt_.m1 < 0.0 || opt_.m2 < 0.0 || opt_.m3 < 0.0)) {
        throw UsageError("--m1/--m2/--m3 must be non-negative");
      }
      out.push_back(spec);
    }
    if (sweep && opt_.pq_grid) {
      for (auto& spec : pq_grid_preset()) out.push_back(spec);
    }
    if (out.empty()) throw UsageError("--method is empty");
    if (!sweep && out.size() != 1) throw UsageError("allocate takes a single --method");
    return out;
  }

  int run_allocate(bool sweep) {
    const auto m = load();
    const auto grid = alphas(sweep);
    if (!sweep && grid.size() != 1) throw UsageError("allocate takes a single --alpha");
    const auto specs = methods(sweep);
    int order = 1;
    for (const auto& s : specs) order = std::max(order, required_order(s.method, opt_.order));

    // One engine per α; each cell's rows land in its own slot.
    std::vector<std::string> cells(grid.size());
    std::vector<std::exception_ptr> errors(grid.size());
    const auto work = [&](std::size_t c) {
      try {
        const AllocationEngine engine(m.model, grid[c], order, tm_options());
        for (const auto& s : specs) {
          cells[c] += io::allocation_rows(engine.run(s.method, opt_.order, s.weights), m.labels,
                                          opt_.full_precision, s.label);
        }
      } catch (...) {
        errors[c] = std::current_exception();
      }
    };
    unsigned threads = opt_.threads ? opt_.threads : std::thread::hardware_concurrency();
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(grid.size())));
    if (threads == 1) {
      for (std::size_t c = 0; c < grid.size(); ++c) work(c);
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          for (std::size_t c = t; c < grid.size(); c += threads) work(c);
        });
      }
      for (auto& th : pool) th.join();
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    std::string text = io::kAllocationHeader;
    for (const auto& c : cells) text += c;
    emit(text);
    return kOk;
  }

  int run_losses() {
    const io::PriceTable losses = io::log_losses(io::load_prices(opt_.prices));
    std::string text = "date";
    for (const auto& l : losses.labels) text += "," + l;
    text += "\n";
    for (std::size_t t = 0; t < losses.dates.size(); ++t) {
      text += losses.dates[t];
      for (const auto& s : losses.series) text += "," + num(s[t]);
      text += "\n";
    }
    emit(text);
    return kOk;
  }

  int run_stats() {
    const io::PriceTable losses = opt_.losses.empty() ? io::log_losses(io::load_prices(opt_.prices))
                                                      : io::load_losses(opt_.losses);
    std::string text = "label,count,mean,median,min,max,stdev,skewness,kurtosis\n";
    for (std::size_t i = 0; i < losses.labels.size(); ++i) {
      const auto d = io::descriptive_stats(losses.series[i]);
      text += losses.labels[i] + "," + std::to_string(d.count) + "," + num(d.mean) + "," +
              num(d.median) + "," + num(d.min) + "," + num(d.max) + "," + num(d.stdev) + "," +
              io::format_optional(d.skewness, opt_.full_precision) + "," +
              io::format_optional(d.kurtosis, opt_.full_precision) + "\n";
    }
    emit(text);
    return kOk;
  }

  int run_validate() {
    const auto m = load();
    ValidationOptions vo;
    vo.sampling.threads = opt_.threads;
    std::ostream* err = &err_;
    vo.warn = [err](const std::string& msg) { *err << "warning: " << msg << '\n'; };
    if (!opt_.corrupt.empty()) {
      const std::string target = opt_.corrupt;
      vo.tamper = [target](ValidationRow& row) {
        if (row.quantity == target || target == "all") {
          row.analytic += 100.0 * row.std_error + 1.0 + std::fabs(row.analytic);
        }
      };
    }
    const auto report = validation_report(m.model, alphas(false), opt_.order, opt_.samples,
                                          opt_.seed, vo);
    std::string text = "quantity,analytic,empirical,se,z\n";
    for (const auto& r : report.rows) {
      text += r.quantity + "," + num(r.analytic) + "," + num(r.empirical) + "," +
              num(r.std_error) + "," + num(r.z) + "\n";
    }
    emit(text);
    if (!report.passed()) {
      err_ << "validation failed: " << report.flagged << " of " << report.rows.size()
           << " quantities have |z| > " << vo.z_limit << '\n';
      for (const auto& r : report.rows) {
        if (r.flagged) err_ << "  " << r.quantity << " z=" << r.z << '\n';
      }
      return kValidation;
    }
    return kOk;
  }

  std::ostream& out_;
  std::ostream& err_;
  Options opt_;
};

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  return App(out, err).run(argc, argv);
}

}  // namespace nmvm::cli
