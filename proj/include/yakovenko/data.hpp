#ifndef YAKOVENKO_DATA_HPP
#define YAKOVENKO_DATA_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "yakovenko/errors.hpp"

namespace yakovenko {

/// Income sample sorted ascending with non-negative weights.
struct Dataset {
  std::vector<double> values;
  std::vector<double> weights;
  std::string label;

  std::size_t size() const noexcept { return values.size(); }
  bool empty() const noexcept { return values.empty(); }
  double total_weight() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }
};

// Sorts by value (stable on ties) and checks the Dataset invariants.
// Empty `weights` means unit weights.
inline Dataset make_dataset(std::vector<double> values, std::vector<double> weights = {},
                            std::string label = {}) {
  if (weights.empty()) weights.assign(values.size(), 1.0);
  if (weights.size() != values.size()) throw domain_error("values and weights differ in length");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] < 0.0) throw domain_error("incomes must be finite and >= 0");
    if (!std::isfinite(weights[i]) || weights[i] < 0.0) throw domain_error("weights must be finite and >= 0");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  Dataset ds;
  ds.label = std::move(label);
  ds.values.reserve(values.size());
  ds.weights.reserve(values.size());
  for (std::size_t i : order) {
    ds.values.push_back(values[i]);
    ds.weights.push_back(weights[i]);
  }
  if (!ds.empty() && !(ds.total_weight() > 0.0)) throw domain_error("weights must have a positive total");
  return ds;
}

struct RowDiagnostic {
  std::size_t row;  // 1-based line number, header is row 1
  std::string message;
};

struct IncomeFormat {
  std::string income_column = "income";
  // Unset: a column named "weight" is used when present.
  std::optional<std::string> weight_column;
  char delimiter = ',';
  std::string label;
};

struct LoadedIncomes {
  Dataset dataset;
  std::vector<RowDiagnostic> rejected;
};

struct BillionaireRecord {
  double wealth_usd = 0.0;
  std::uint64_t name_hash = 0;
};

struct LoadedBillionaires {
  std::vector<BillionaireRecord> records;
  std::vector<RowDiagnostic> rejected;
};

struct CcdfPoint {
  double m;
  double p;
  friend bool operator==(const CcdfPoint&, const CcdfPoint&) = default;
};

/// Complementary CDF points with m strictly increasing and p strictly
/// decreasing inside (0, 1).
struct EmpiricalCcdf {
  std::vector<CcdfPoint> points;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
};

namespace detail {

// Splits one CSV record; double quotes may wrap fields and "" escapes a quote.
inline std::vector<std::string> split_csv(std::string_view line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delim) {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (row number, fields)
};

inline CsvTable read_csv(std::istream& in, char delim) {
  CsvTable t;
  std::string line;
  std::size_t row = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++row;
    if (row == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split_csv(line, delim);
    if (!have_header) {
      for (auto& f : fields) f = std::string(trim(f));
      t.header = std::move(fields);
      have_header = true;
    } else {
      t.rows.emplace_back(row, std::move(fields));
    }
  }
  if (!have_header) throw format_error("CSV input has no header row");
  return t;
}

inline std::optional<std::size_t> column_index(const std::vector<std::string>& header, std::string_view name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

// FNV-1a; stable across platforms unlike std::hash.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Reads household incomes from CSV. Rows with unparsable, non-finite or
/// negative values are skipped and reported by row number.
inline LoadedIncomes load_incomes(std::istream& in, const IncomeFormat& fmt = {}) {
  const detail::CsvTable t = detail::read_csv(in, fmt.delimiter);
  const auto income_col = detail::column_index(t.header, fmt.income_column);
  if (!income_col) throw format_error("missing income column '" + fmt.income_column + "'");
  std::optional<std::size_t> weight_col;
  if (fmt.weight_column) {
    weight_col = detail::column_index(t.header, *fmt.weight_column);
    if (!weight_col) throw format_error("missing weight column '" + *fmt.weight_column + "'");
  } else {
    weight_col = detail::column_index(t.header, "weight");
  }

  LoadedIncomes out;
  std::vector<double> values;
  std::vector<double> weights;
  for (const auto& [row, fields] : t.rows) {
    if (fields.size() != t.header.size()) {
      out.rejected.push_back({row, "expected " + std::to_string(t.header.size()) + " fields, found " +
                                       std::to_string(fields.size())});
      continue;
    }
    const auto income = detail::parse_number(fields[*income_col]);
    if (!income || !std::isfinite(*income) || *income < 0.0) {
      out.rejected.push_back({row, "invalid income '" + fields[*income_col] + "'"});
      continue;
    }
    double weight = 1.0;
    if (weight_col) {
      const auto w = detail::parse_number(fields[*weight_col]);
      if (!w || !std::isfinite(*w) || *w < 0.0) {
        out.rejected.push_back({row, "invalid weight '" + fields[*weight_col] + "'"});
        continue;
      }
      weight = *w;
    }
    values.push_back(*income);
    weights.push_back(weight);
  }
  if (values.empty()) {
    std::string msg = "no valid income rows";
    if (!out.rejected.empty()) {
      msg += " (row " + std::to_string(out.rejected.front().row) + ": " + out.rejected.front().message + ")";
    }
    throw empty_dataset(msg);
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw empty_dataset("all income rows carry zero weight");
  out.dataset = make_dataset(std::move(values), std::move(weights), fmt.label);
  return out;
}

/// Reads billionaire net worth (column `wealth_usd`, optional `name`).
inline LoadedBillionaires load_billionaires(std::istream& in, char delimiter = ',') {
  const detail::CsvTable t = detail::read_csv(in, delimiter);
  const auto wealth_col = detail::column_index(t.header, "wealth_usd");
  if (!wealth_col) throw format_error("missing wealth_usd column");
  const auto name_col = detail::column_index(t.header, "name");
  LoadedBillionaires out;
  for (const auto& [row, fields] : t.rows) {
    if (fields.size() != t.header.size()) {
      out.rejected.push_back({row, "field count mismatch"});
      continue;
    }
    const auto wealth = detail::parse_number(fields[*wealth_col]);
    if (!wealth || !std::isfinite(*wealth) || *wealth <= 0.0) {
      out.rejected.push_back({row, "invalid wealth_usd '" + fields[*wealth_col] + "'"});
      continue;
    }
    BillionaireRecord rec;
    rec.wealth_usd = *wealth;
    rec.name_hash = name_col ? detail::fnv1a(fields[*name_col]) : static_cast<std::uint64_t>(row);
    out.records.push_back(rec);
  }
  return out;
}

// Annual income imputed as wealth * (EUR per USD) * (return per year); only
// positive incomes are kept.
inline std::vector<double> billionaire_effective_income(std::span<const BillionaireRecord> records,
                                                        double usd_eur_rate, double return_rate) {
  if (!(usd_eur_rate > 0.0) || !std::isfinite(usd_eur_rate)) throw config_error("usd_eur_rate must be > 0");
  if (!(return_rate > 0.0) || !std::isfinite(return_rate)) throw config_error("return_rate must be > 0");
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const double income = r.wealth_usd * usd_eur_rate * return_rate;
    if (income > 0.0 && std::isfinite(income)) out.push_back(income);
  }
  return out;
}

// Survey plus top incomes, each top income carrying `top_weight`.
inline Dataset merge_datasets(const Dataset& survey, std::span<const double> top, double top_weight) {
  if (!(top_weight > 0.0) || !std::isfinite(top_weight)) throw config_error("top_weight must be > 0");
  if (top.empty()) return survey;
  std::vector<double> values = survey.values;
  std::vector<double> weights = survey.weights;
  values.insert(values.end(), top.begin(), top.end());
  weights.insert(weights.end(), top.size(), top_weight);
  std::string label = survey.label.empty() ? "merged" : survey.label;
  label += " + " + std::to_string(top.size()) + " top incomes";
  return make_dataset(std::move(values), std::move(weights), std::move(label));
}

/// Weibull plotting positions p_i = 1 - i/(n+1) for ascending rank i.
///
/// With unequal weights, p_i = 1 - W_i / (W + w_mean) where W_i is the
/// cumulative weight through rank i; equal weights take the unweighted path
/// so both agree exactly. Zero-weight rows carry no mass and are skipped;
/// tied values keep only the last (smallest p) point.
inline EmpiricalCcdf empirical_ccdf(const Dataset& ds) {
  std::vector<std::size_t> live;
  live.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.weights[i] > 0.0) live.push_back(i);
  }
  if (live.empty()) throw domain_error("empirical_ccdf of an empty dataset");

  const double w0 = ds.weights[live.front()];
  const bool equal = std::all_of(live.begin(), live.end(), [&](std::size_t i) { return ds.weights[i] == w0; });
  const double n = static_cast<double>(live.size());
  double total = 0.0;
  for (std::size_t i : live) total += ds.weights[i];
  const double denom = total + total / n;

  EmpiricalCcdf out;
  out.points.reserve(live.size());
  double cumulative = 0.0;
  for (std::size_t r = 0; r < live.size(); ++r) {
    const std::size_t i = live[r];
    cumulative += ds.weights[i];
    if (r + 1 < live.size() && ds.values[live[r + 1]] == ds.values[i]) continue;
    const double p = equal ? (n - static_cast<double>(r)) / (n + 1.0) : (denom - cumulative) / denom;
    out.points.push_back({ds.values[i], p});
  }
  return out;
}

}  // namespace yakovenko

#endif  // YAKOVENKO_DATA_HPP
