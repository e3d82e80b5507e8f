#ifndef YAKOVENKO_REPORT_HPP
#define YAKOVENKO_REPORT_HPP

#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "yakovenko/data.hpp"
#include "yakovenko/errors.hpp"
#include "yakovenko/params.hpp"
#include "yakovenko/reference.hpp"

namespace yakovenko {

// Normal years sit at alpha1 <= 0.89, the collapse year at 2.608.
inline constexpr double default_crisis_threshold = 2.0;

struct CrisisIndicator {
  bool flag = false;
  double score = 0.0;  // alpha1
};

/// A high-income branch whose exponent exceeds `threshold` (strictly) carries
/// almost no mass: the class has effectively disappeared.
inline CrisisIndicator crisis_indicator(const Params& p, double threshold = default_crisis_threshold) {
  validate(p);
  return {p.alpha1 > threshold, p.alpha1};
}

struct ReportRow {
  std::string label;
  Params params;
  Params errors;
  bool crisis = false;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

inline ReportRow make_row(std::string label, const Params& params, const Params& errors = {},
                          double threshold = default_crisis_threshold) {
  return {std::move(label), params, errors, crisis_indicator(params, threshold).flag};
}

inline std::vector<ReportRow> reference_rows(double threshold = default_crisis_threshold) {
  std::vector<ReportRow> rows;
  for (const auto& r : reference::eu_household_income) {
    rows.push_back(make_row(std::string(r.year), r.params, r.errors, threshold));
  }
  return rows;
}

struct ParamSummary {
  Params mean;
  std::vector<std::string> labels;  // rows that went into the mean
};

/// Arithmetic mean of each parameter over rows whose label is not excluded.
inline ParamSummary aggregate_params(std::span<const ReportRow> rows, const std::set<std::string>& exclude = {}) {
  ParamSummary s;
  double t = 0, t1 = 0, m0 = 0, m1 = 0, a = 0, a1 = 0;
  for (const auto& r : rows) {
    if (exclude.count(r.label)) continue;
    t += r.params.t_low;
    t1 += r.params.t_high;
    m0 += r.params.m0;
    m1 += r.params.m1;
    a += r.params.alpha;
    a1 += r.params.alpha1;
    s.labels.push_back(r.label);
  }
  if (s.labels.empty()) throw domain_error("aggregate_params: every row is excluded");
  const double n = static_cast<double>(s.labels.size());
  s.mean = {t / n, t1 / n, m0 / n, m1 / n, a / n, a1 / n};
  return s;
}

inline double round_to(double x, double unit) { return std::round(x / unit) * unit; }

/// Weighted Gini coefficient of a sorted dataset.
inline double gini(const Dataset& ds) {
  if (ds.empty()) throw empty_dataset("gini of an empty dataset");
  const double w = ds.total_weight();
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) total += ds.weights[i] * ds.values[i];
  if (!(total > 0.0)) return 0.0;
  // 1 - 2 * area under the Lorenz curve (trapezoids)
  double cum = 0.0, area = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double next = cum + ds.weights[i] * ds.values[i];
    area += ds.weights[i] / w * (cum + next) / (2.0 * total);
    cum = next;
  }
  return 1.0 - 2.0 * area;
}

namespace detail {

inline std::string money(double eur) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.0f", round_to(eur, 1000.0));
  return buf;
}

inline std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace detail

/// Plain-text table: monetary columns rounded to 1000 EUR, exponents to three
/// decimals. An error line follows each row with nonzero errors.
inline void write_report_table(std::ostream& out, std::span<const ReportRow> rows) {
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %9s %9s %7s %9s %9s %7s  %s\n", "label", "T", "m0", "alpha", "T1", "m1",
                "alpha1", "crisis");
  out << line;
  for (const auto& r : rows) {
    const Params& p = r.params;
    std::snprintf(line, sizeof line, "%-16s %9s %9s %7s %9s %9s %7s  %s\n", r.label.c_str(),
                  detail::money(p.t_low).c_str(), detail::money(p.m0).c_str(), detail::fixed(p.alpha, 3).c_str(),
                  detail::money(p.t_high).c_str(), detail::money(p.m1).c_str(), detail::fixed(p.alpha1, 3).c_str(),
                  r.crisis ? "yes" : "no");
    out << line;
    const Params& e = r.errors;
    if (e == Params{}) continue;
    std::snprintf(line, sizeof line, "%-16s %9s %9s %7s %9s %9s %7s\n", "  +/-", detail::money(e.t_low).c_str(),
                  detail::money(e.m0).c_str(), detail::fixed(e.alpha, 3).c_str(), detail::money(e.t_high).c_str(),
                  detail::money(e.m1).c_str(), detail::fixed(e.alpha1, 3).c_str());
    out << line;
  }
}

inline void write_summary_line(std::ostream& out, const std::string& label, const ParamSummary& s) {
  char line[256];
  const Params& p = s.mean;
  std::snprintf(line, sizeof line, "%-16s %9s %9s %7s %9s %9s %7s  (%zu rows)\n", label.c_str(),
                detail::money(p.t_low).c_str(), detail::money(p.m0).c_str(), detail::fixed(p.alpha, 3).c_str(),
                detail::money(p.t_high).c_str(), detail::money(p.m1).c_str(), detail::fixed(p.alpha1, 3).c_str(),
                s.labels.size());
  out << line;
}

inline void to_json(nlohmann::json& j, const ReportRow& r) {
  j = {{"label", r.label}, {"params", r.params}, {"errors", r.errors}, {"crisis", r.crisis}};
}

// "errors" and "crisis" are optional; crisis defaults to false.
inline void from_json(const nlohmann::json& j, ReportRow& r) {
  if (!j.is_object() || !j.contains("label") || !j.at("label").is_string() || !j.contains("params")) {
    throw format_error("report row needs a string 'label' and 'params'");
  }
  r.label = j.at("label").get<std::string>();
  r.params = j.at("params").get<Params>();
  r.errors = j.contains("errors") ? j.at("errors").get<Params>() : Params{};
  if (j.contains("crisis")) {
    if (!j.at("crisis").is_boolean()) throw format_error("report row 'crisis' must be a boolean");
    r.crisis = j.at("crisis").get<bool>();
  } else {
    r.crisis = false;
  }
}

inline void to_json(nlohmann::json& j, const ParamSummary& s) { j = {{"mean", s.mean}, {"labels", s.labels}}; }

}  // namespace yakovenko

#endif  // YAKOVENKO_REPORT_HPP
