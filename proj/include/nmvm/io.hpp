#pragma once

// File formats: JSON model documents, price CSVs, allocation CSVs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "nmvm/allocation.hpp"
#include "nmvm/distribution.hpp"
#include "nmvm/error.hpp"
#include "nmvm/mixing.hpp"

namespace nmvm::io {

struct LoadedModel {
  MultivariateNMVM model;
  std::vector<std::string> labels;
};

namespace detail {

using nlohmann::json;

inline const json& field(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object()) fail(ErrorKind::Parse, where + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) fail(ErrorKind::Parse, "missing required field '" + where + key + "'");
  return *it;
}

inline double number(const json& v, const std::string& name) {
  if (!v.is_number()) fail(ErrorKind::Parse, "field '" + name + "': expected a number, got " + v.dump());
  return v.get<double>();
}

inline Eigen::VectorXd vector(const json& v, const std::string& name, std::size_t n) {
  if (!v.is_array()) fail(ErrorKind::Parse, "field '" + name + "': expected an array");
  if (v.size() != n) {
    fail(ErrorKind::Validation, "field '" + name + "': length " + std::to_string(v.size()) +
                                    " does not match dimension " + std::to_string(n));
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    out(static_cast<Eigen::Index>(i)) = number(v[i], name + "[" + std::to_string(i) + "]");
  }
  return out;
}

inline Eigen::MatrixXd matrix(const json& v, std::size_t n) {
  if (!v.is_array()) fail(ErrorKind::Parse, "field 'sigma': expected an array");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const bool nested = !v.empty() && v[0].is_array();
  if (nested) {
    if (v.size() != n) {
      fail(ErrorKind::Validation, "field 'sigma': " + std::to_string(v.size()) +
                                      " rows, expected " + std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = vector(v[i], "sigma[" + std::to_string(i) + "]", n);
      out.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
  } else {
    const auto flat = vector(v, "sigma", n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            flat(static_cast<Eigen::Index>(i * n + j));
      }
    }
  }
  return out;
}

inline MixingModel mixing(const json& v) {
  const json& type = field(v, "type", "mixing.");
  if (!type.is_string()) fail(ErrorKind::Parse, "field 'mixing.type': expected a string");
  const auto t = type.get<std::string>();
  try {
    if (t == "gig") {
      return MixingModel::gig(number(field(v, "lambda", "mixing."), "mixing.lambda"),
                              number(field(v, "chi", "mixing."), "mixing.chi"),
                              number(field(v, "psi", "mixing."), "mixing.psi"));
    }
    if (t == "degenerate") {
      return MixingModel::degenerate(number(field(v, "theta0", "mixing."), "mixing.theta0"));
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Parse) throw;
    fail(ErrorKind::Validation, std::string("field 'mixing': ") + e.what());
  }
  fail(ErrorKind::Parse, "field 'mixing.type': unknown mixing type '" + t +
                             "' (expected \"gig\" or \"degenerate\")");
}

}  // namespace detail

/// Model document:
///   {"dimension": n,
///    "mixing": {"type": "gig", "lambda": λ, "chi": χ, "psi": ψ} | {"type": "degenerate", "theta0": θ0},
///    "mu": [n], "gamma": [n], "sigma": [[n] x n] or [n*n], "labels": [n] (optional)}
inline LoadedModel parse_model(const std::string& text, const std::string& source = "<model>") {
  detail::json doc;
  try {
    doc = detail::json::parse(text);
  } catch (const detail::json::parse_error& e) {
    fail(ErrorKind::Parse, source + ": " + e.what());
  }
  try {
    const auto& dim = detail::field(doc, "dimension", "");
    if (!dim.is_number_integer() || dim.get<long long>() < 1) {
      fail(ErrorKind::Parse, "field 'dimension': expected a positive integer, got " + dim.dump());
    }
    const auto n = static_cast<std::size_t>(dim.get<long long>());
    MixingModel mix = detail::mixing(detail::field(doc, "mixing", ""));
    Eigen::VectorXd mu = detail::vector(detail::field(doc, "mu", ""), "mu", n);
    Eigen::VectorXd gamma = detail::vector(detail::field(doc, "gamma", ""), "gamma", n);
    Eigen::MatrixXd sigma = detail::matrix(detail::field(doc, "sigma", ""), n);

    std::vector<std::string> labels;
    if (const auto it = doc.find("labels"); it != doc.end()) {
      if (!it->is_array() || it->size() != n) {
        fail(ErrorKind::Validation, "field 'labels': expected " + std::to_string(n) + " strings");
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (!(*it)[i].is_string()) {
          fail(ErrorKind::Parse, "field 'labels[" + std::to_string(i) + "]': expected a string");
        }
        labels.push_back((*it)[i].get<std::string>());
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) labels.push_back("X" + std::to_string(i + 1));
    }
    return {MultivariateNMVM(std::move(mu), std::move(gamma), std::move(sigma), std::move(mix)),
            std::move(labels)};
  } catch (const Error& e) {
    throw Error(e.kind(), source + ": " + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Parse, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline LoadedModel load_model(const std::string& path) { return parse_model(read_file(path), path); }

struct PriceTable {
  std::vector<std::string> labels;
  std::vector<std::string> dates;
  std::vector<std::vector<double>> series;  // one per label
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (s[static_cast<std::size_t>(i)] < '0' || s[static_cast<std::size_t>(i)] > '9') return false;
  }
  const int month = std::stoi(s.substr(5, 2)), day = std::stoi(s.substr(8, 2));
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

}  // namespace detail

/// Header `date,<label>,...`; ISO dates strictly ascending. Values must be
/// positive unless `positive` is false (loss series).
inline PriceTable parse_series(const std::string& text, const std::string& source,
                               bool positive) {
  std::istringstream in(text);
  std::string line;
  PriceTable table;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    const std::string where = source + ":" + std::to_string(line_no);
    if (table.labels.empty()) {
      if (cells.size() < 2 || cells[0] != "date") {
        fail(ErrorKind::Parse, where + ": header must be 'date,<label>,...'");
      }
      table.labels.assign(cells.begin() + 1, cells.end());
      table.series.resize(table.labels.size());
      continue;
    }
    if (cells.size() != table.labels.size() + 1) {
      fail(ErrorKind::Parse, where + ": expected " + std::to_string(table.labels.size() + 1) +
                                 " fields, got " + std::to_string(cells.size()));
    }
    if (!detail::iso_date(cells[0])) {
      fail(ErrorKind::Parse, where + ": '" + cells[0] + "' is not an ISO date (YYYY-MM-DD)");
    }
    if (!table.dates.empty() && !(table.dates.back() < cells[0])) {
      fail(ErrorKind::Validation, where + ": date " + cells[0] +
                                      " is not after the previous row's date " + table.dates.back());
    }
    table.dates.push_back(cells[0]);
    for (std::size_t i = 1; i < cells.size(); ++i) {
      const std::string& c = cells[i];
      const std::string col = where + " column '" + table.labels[i - 1] + "'";
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (c.empty() || used != c.size() || !std::isfinite(v)) {
        fail(ErrorKind::Parse, col + ": '" + c + "' is not a number");
      }
      if (positive && !(v > 0.0)) {
        fail(ErrorKind::NonPositivePrice, col + ": price " + c + " is not positive");
      }
      table.series[i - 1].push_back(v);
    }
  }
  if (table.labels.empty()) fail(ErrorKind::Parse, source + ": empty file");
  return table;
}

inline std::vector<double> log_losses(const std::vector<double>& prices);

inline PriceTable parse_prices(const std::string& text, const std::string& source = "<prices>") {
  return parse_series(text, source, true);
}

inline PriceTable load_prices(const std::string& path) { return parse_prices(read_file(path), path); }

inline PriceTable load_losses(const std::string& path) {
  return parse_series(read_file(path), path, false);
}

/// Per-column log losses; dates are those of the later price in each pair.
inline PriceTable log_losses(const PriceTable& prices) {
  PriceTable out;
  out.labels = prices.labels;
  if (prices.dates.size() > 1) out.dates.assign(prices.dates.begin() + 1, prices.dates.end());
  for (const auto& s : prices.series) out.series.push_back(log_losses(s));
  return out;
}

/// L_t = -ln(P_t / P_{t-1}).
inline std::vector<double> log_losses(const std::vector<double>& prices) {
  std::vector<double> out;
  for (std::size_t t = 0; t < prices.size(); ++t) {
    if (!(prices[t] > 0.0)) {
      fail(ErrorKind::NonPositivePrice, "price at index " + std::to_string(t) + " is not positive");
    }
    if (t > 0) out.push_back(-std::log(prices[t] / prices[t - 1]));
  }
  return out;
}

struct DescriptiveStats {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  double stdev = 0.0;                // n - 1 denominator
  std::optional<double> skewness;    // m3 / m2^{3/2}
  std::optional<double> kurtosis;    // m4 / m2^2, not excess
};

inline DescriptiveStats descriptive_stats(const std::vector<double>& xs) {
  if (xs.size() < 2) {
    fail(ErrorKind::InsufficientData, "descriptive statistics need at least 2 observations, got " +
                                          std::to_string(xs.size()));
  }
  DescriptiveStats d;
  const double n = static_cast<double>(xs.size());
  d.count = xs.size();
  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  d.min = sorted.front();
  d.max = sorted.back();
  const std::size_t h = sorted.size() / 2;
  d.median = sorted.size() % 2 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
  double sum = 0.0;
  for (double x : xs) sum += x;
  d.mean = sum / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double e = x - d.mean, e2 = e * e;
    m2 += e2;
    m3 += e2 * e;
    m4 += e2 * e2;
  }
  d.stdev = std::sqrt(m2 / (n - 1.0));
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 > 0.0) {
    d.skewness = m3 / std::pow(m2, 1.5);
    d.kurtosis = m4 / (m2 * m2);
  }
  return d;
}

inline std::string format_number(double v, bool full_precision) {
  char buf[40];
  std::snprintf(buf, sizeof buf, full_precision ? "%.17g" : "%.6g", v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v, bool full_precision) {
  return v ? format_number(*v, full_precision) : "NA";
}

inline const char* kAllocationHeader = "alpha,method,k,component,capital,proportion,total\n";

/// Rows of one report in component order. `method_label` overrides the method name.
inline std::string allocation_rows(const AllocationReport& r, const std::vector<std::string>& labels,
                                   bool full_precision, const std::string& method_label = "") {
  std::string out;
  const std::string method = method_label.empty() ? to_string(r.method) : method_label;
  const std::string head = format_number(r.alpha, full_precision) + "," + method + "," +
                           std::to_string(r.order) + ",";
  const std::string total = format_number(r.total, full_precision);
  for (Eigen::Index i = 0; i < r.capitals.size(); ++i) {
    out += head + labels.at(static_cast<std::size_t>(i)) + "," +
           format_number(r.capitals(i), full_precision) + "," +
           format_optional(r.proportions[static_cast<std::size_t>(i)], full_precision) + "," +
           total + "\n";
  }
  return out;
}

/// Writes to a sibling temporary and renames it into place, so a failure
/// never leaves a partial file at `path`.
inline void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Validation, "cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) fail(ErrorKind::Validation, "write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    fail(ErrorKind::Validation, "cannot move output into " + path + ": " + ec.message());
  }
}

}  // namespace nmvm::io
