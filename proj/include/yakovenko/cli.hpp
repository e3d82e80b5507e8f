#ifndef YAKOVENKO_CLI_HPP
#define YAKOVENKO_CLI_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "yakovenko/data.hpp"
#include "yakovenko/errors.hpp"
#include "yakovenko/fit.hpp"
#include "yakovenko/langevin.hpp"
#include "yakovenko/model.hpp"
#include "yakovenko/params.hpp"
#include "yakovenko/report.hpp"

namespace yakovenko::cli {

enum exit_code : int { success = 0, internal_failure = 1, input_error = 2, not_converged = 3 };

namespace detail {

using nlohmann::json;

// Error tied to a file; the message already names it.
class input_failure : public error {
 public:
  using error::error;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_failure(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw input_failure(path + ": invalid JSON: " + e.what());
  }
}

inline void report_rejected(std::ostream& err, const std::string& path, const std::vector<RowDiagnostic>& rows) {
  for (const auto& r : rows) err << path << ":" << r.row << ": skipped: " << r.message << "\n";
}

inline LoadedIncomes load_income_file(const std::string& path, const IncomeFormat& fmt, std::ostream& err) {
  std::istringstream in(read_file(path));
  try {
    LoadedIncomes li = load_incomes(in, fmt);
    report_rejected(err, path, li.rejected);
    return li;
  } catch (const empty_dataset& e) {
    throw input_failure(path + ": " + e.what());
  } catch (const error& e) {
    throw input_failure(path + ":1: " + e.what());
  }
}

// Accepts a bare params object or anything with a "params" member (fit output).
inline Params load_params(const std::string& path) {
  const json j = read_json(path);
  try {
    Params p = (j.is_object() && j.contains("params")) ? j.at("params").get<Params>() : j.get<Params>();
    validate(p);
    return p;
  } catch (const error& e) {
    throw input_failure(path + ": " + e.what());
  }
}

template <class T>
void take(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw format_error(std::string("config key '") + key + "' has the wrong type");
  }
}

template <class T>
void take(const json& j, const char* key, std::optional<T>& dst) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    dst.reset();
    return;
  }
  T v{};
  take(j, key, v);
  dst = v;
}

inline void check_keys(const json& j, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw format_error("config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw format_error("unknown config key '" + k + "'");
    }
  }
}

inline std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Output goes to --out when given, else to `out`.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (path.empty()) return;
    file_.open(path, std::ios::binary);
    if (!file_) throw input_failure(path + ": cannot open for writing");
    os_ = &file_;
  }
  std::ostream& operator*() { return *os_; }
  void finish() {
    os_->flush();
    if (!*os_) throw input_failure("write failed");
  }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

struct FitArgs {
  std::string incomes;
  std::string income_column = "income";
  std::optional<std::string> weight_column;
  std::optional<std::string> billionaires;
  std::optional<double> usd_eur_rate;
  double return_rate = 0.05;
  double top_weight = 1.0;
  FitConfig fit;
};

inline void apply_config(const json& j, FitArgs& a, std::string& out) {
  check_keys(j, {"incomes", "income_column", "weight_column", "billionaires", "usd_eur_rate", "return_rate",
                 "top_weight", "out", "grid_points", "tail_points", "tie_t1_m1", "bounds", "restarts",
                 "bootstrap_resamples", "bootstrap", "seed", "opt_tol", "quad_tol", "max_evaluations"});
  take(j, "incomes", a.incomes);
  take(j, "income_column", a.income_column);
  take(j, "weight_column", a.weight_column);
  take(j, "billionaires", a.billionaires);
  take(j, "usd_eur_rate", a.usd_eur_rate);
  take(j, "return_rate", a.return_rate);
  take(j, "top_weight", a.top_weight);
  take(j, "out", out);
  take(j, "bootstrap", a.fit.bootstrap_resamples);
  json rest = j;
  for (const char* k : {"incomes", "income_column", "weight_column", "billionaires", "usd_eur_rate", "return_rate",
                        "top_weight", "out", "bootstrap"}) {
    rest.erase(k);
  }
  from_json(rest, a.fit);
}

inline int cmd_fit(const FitArgs& a, const std::string& out_path, std::ostream& out, std::ostream& err) {
  if (a.incomes.empty()) throw config_error("--incomes is required");
  FitConfig cfg = a.fit;
  validate(cfg);
  if (cfg.bootstrap_resamples != 0 && cfg.bootstrap_resamples < 20) {
    throw config_error("--bootstrap must be 0 (off) or >= 20");
  }
  IncomeFormat fmt;
  fmt.income_column = a.income_column;
  fmt.weight_column = a.weight_column;
  fmt.label = a.incomes;
  const LoadedIncomes survey = load_income_file(a.incomes, fmt, err);
  Dataset ds = survey.dataset;
  std::size_t top_count = 0;
  if (a.billionaires) {
    if (!a.usd_eur_rate) throw config_error("--billionaires needs --usd-eur");
    std::istringstream in(read_file(*a.billionaires));
    LoadedBillionaires lb;
    try {
      lb = load_billionaires(in);
    } catch (const error& e) {
      throw input_failure(*a.billionaires + ":1: " + e.what());
    }
    report_rejected(err, *a.billionaires, lb.rejected);
    const auto top = billionaire_effective_income(lb.records, *a.usd_eur_rate, a.return_rate);
    top_count = top.size();
    ds = merge_datasets(ds, top, a.top_weight);
  }

  FitResult r;
  try {
    r = fit(ds, cfg);
  } catch (const insufficient_data& e) {
    throw input_failure(a.incomes + ": " + e.what());
  }
  bool reliable = true;
  if (cfg.bootstrap_resamples > 0 && r.converged) {
    try {
      r.errors = bootstrap_errors(ds, cfg, r.params);
    } catch (const unreliable_errors& e) {
      reliable = false;
      err << "warning: " << e.what() << "\n";
    }
  }

  json j = r;
  j["errors_reliable"] = reliable;
  const CrisisIndicator ci = crisis_indicator(r.params);
  j["crisis"] = {{"flag", ci.flag}, {"score", ci.score}, {"threshold", default_crisis_threshold}};
  j["input"] = {{"incomes", a.incomes},
                {"income_column", a.income_column},
                {"weight_column", a.weight_column ? json(*a.weight_column) : json(nullptr)},
                {"billionaires", a.billionaires ? json(*a.billionaires) : json(nullptr)},
                {"usd_eur_rate", a.usd_eur_rate ? json(*a.usd_eur_rate) : json(nullptr)},
                {"return_rate", a.return_rate},
                {"top_weight", a.top_weight},
                {"observations", ds.size()},
                {"top_incomes", top_count},
                {"rejected_rows", survey.rejected.size()},
                {"total_weight", ds.total_weight()},
                {"gini", gini(ds)}};
  j["config"] = cfg;
  Sink sink(out_path, out);
  *sink << j.dump(2) << "\n";
  sink.finish();
  if (!r.converged) {
    err << "fit did not converge\n";
    return not_converged;
  }
  return success;
}

struct PlotArgs {
  std::string params;
  std::string incomes;
  std::string income_column = "income";
  std::optional<std::string> weight_column;
  std::size_t points = 500;
};

inline void apply_config(const json& j, PlotArgs& a, std::string& out) {
  check_keys(j, {"params", "incomes", "income_column", "weight_column", "points", "out"});
  take(j, "params", a.params);
  take(j, "incomes", a.incomes);
  take(j, "income_column", a.income_column);
  take(j, "weight_column", a.weight_column);
  take(j, "points", a.points);
  take(j, "out", out);
}

// series,m,empirical_ccdf,model_ccdf; empty cells where a column does not apply.
inline int cmd_plotdata(const PlotArgs& a, const std::string& out_path, std::ostream& out, std::ostream& err) {
  if (a.params.empty() || a.incomes.empty()) throw config_error("--params and --incomes are required");
  if (a.points < 2) throw config_error("--points must be >= 2");
  const Params p = load_params(a.params);
  IncomeFormat fmt;
  fmt.income_column = a.income_column;
  fmt.weight_column = a.weight_column;
  const Dataset ds = load_income_file(a.incomes, fmt, err).dataset;
  const EmpiricalCcdf ccdf = empirical_ccdf(ds);
  const NormalizedModel model(p);

  std::vector<double> em;
  for (const auto& pt : ccdf.points) em.push_back(pt.m);
  const std::vector<double> em_model = model.ccdf_sorted(em);

  const auto first_pos = std::find_if(em.begin(), em.end(), [](double m) { return m > 0.0; });
  const double lo = first_pos != em.end() ? *first_pos : p.m0 / 100.0;
  const double hi = std::max(em.empty() ? 0.0 : em.back(), p.m1) * 10.0;
  std::vector<double> grid(a.points);
  for (std::size_t i = 0; i < a.points; ++i) {
    grid[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * static_cast<double>(i) /
                                          static_cast<double>(a.points - 1));
  }
  const std::vector<double> grid_model = model.ccdf_sorted(grid);

  Sink sink(out_path, out);
  std::ostream& o = *sink;
  o << "series,m,empirical_ccdf,model_ccdf\n";
  for (std::size_t i = 0; i < em.size(); ++i) {
    o << "empirical," << num(em[i]) << "," << num(ccdf.points[i].p) << "," << num(em_model[i]) << "\n";
  }
  for (std::size_t i = 0; i < grid.size(); ++i) o << "model," << num(grid[i]) << ",," << num(grid_model[i]) << "\n";
  o << "marker_m0," << num(p.m0) << ",," << num(model.ccdf(p.m0)) << "\n";
  o << "marker_m1," << num(p.m1) << ",," << num(model.ccdf(p.m1)) << "\n";
  sink.finish();
  return success;
}

struct SampleArgs {
  std::string params;
  std::size_t n = 0;
  std::uint64_t seed = 1;
};

inline void apply_config(const json& j, SampleArgs& a, std::string& out) {
  check_keys(j, {"params", "n", "seed", "out"});
  take(j, "params", a.params);
  take(j, "n", a.n);
  take(j, "seed", a.seed);
  take(j, "out", out);
}

inline int cmd_sample(const SampleArgs& a, const std::string& out_path, std::ostream& out, std::ostream&) {
  if (a.params.empty()) throw config_error("--params is required");
  if (a.n == 0) throw config_error("--n must be >= 1");
  const NormalizedModel model(load_params(a.params));
  const std::vector<double> s = model.sample(a.n, a.seed);
  Sink sink(out_path, out);
  *sink << "income\n";
  for (double v : s) *sink << num(v) << "\n";
  sink.finish();
  return success;
}

struct SimulateArgs {
  std::string params;
  std::size_t agents = 10'000;
  double dt = 1e-3;
  std::size_t steps = 1'000;
  std::optional<std::size_t> stride;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::optional<double> initial_income;
};

inline void apply_config(const json& j, SimulateArgs& a, std::string& out) {
  check_keys(j, {"params", "agents", "dt", "steps", "stride", "seed", "threads", "initial_income", "out"});
  take(j, "params", a.params);
  take(j, "agents", a.agents);
  take(j, "dt", a.dt);
  take(j, "steps", a.steps);
  take(j, "stride", a.stride);
  take(j, "seed", a.seed);
  take(j, "threads", a.threads);
  take(j, "initial_income", a.initial_income);
  take(j, "out", out);
}

// Snapshot CSV on the output; stationarity and KS to the model on stderr.
inline int cmd_simulate(const SimulateArgs& a, const std::string& out_path, std::ostream& out, std::ostream& err) {
  if (a.params.empty()) throw config_error("--params is required");
  const Params p = load_params(a.params);
  SimConfig c = sim_config_for(p, a.agents, a.dt, a.steps, a.seed);
  c.record_stride = a.stride.value_or(std::max<std::size_t>(a.steps, 1));
  c.threads = a.threads;
  c.initial_income = a.initial_income;
  const auto snaps = simulate_ensemble(c);
  Sink sink(out_path, out);
  write_snapshots_csv(*sink, snaps);
  sink.finish();
  const auto k = detect_stationarity(snaps);
  if (k) {
    err << "stationary from t = " << num(snaps[*k].time) << "\n";
  } else {
    err << "stationarity not detected\n";
  }
  err << "ks distance to equilibrium at t = " << num(snaps.back().time) << ": "
      << num(ks_distance(snaps.back().incomes, NormalizedModel(p))) << "\n";
  return success;
}

struct ReportArgs {
  std::optional<std::string> rows;
  double crisis_threshold = default_crisis_threshold;
  std::vector<std::string> exclude;
  std::string format = "table";
};

inline void apply_config(const json& j, ReportArgs& a, std::string& out) {
  check_keys(j, {"rows", "crisis_threshold", "exclude", "format", "out"});
  take(j, "rows", a.rows);
  take(j, "crisis_threshold", a.crisis_threshold);
  take(j, "exclude", a.exclude);
  take(j, "format", a.format);
  take(j, "out", out);
}

// Rows from a JSON array (default: the reference table); crisis flags are
// recomputed at the chosen threshold.
inline int cmd_report(const ReportArgs& a, const std::string& out_path, std::ostream& out, std::ostream&) {
  if (a.format != "table" && a.format != "json") throw config_error("--format must be 'table' or 'json'");
  if (!std::isfinite(a.crisis_threshold)) throw config_error("--crisis-threshold must be finite");
  std::vector<ReportRow> rows;
  if (a.rows) {
    const json j = read_json(*a.rows);
    try {
      if (!j.is_array()) throw format_error("expected a JSON array of rows");
      for (const auto& e : j) rows.push_back(e.get<ReportRow>());
      for (auto& r : rows) r.crisis = crisis_indicator(r.params, a.crisis_threshold).flag;
    } catch (const error& e) {
      throw input_failure(*a.rows + ": " + e.what());
    }
    if (rows.empty()) throw input_failure(*a.rows + ": no rows");
  } else {
    rows = reference_rows(a.crisis_threshold);
  }
  const std::set<std::string> excluded(a.exclude.begin(), a.exclude.end());
  const ParamSummary mean = aggregate_params(rows, excluded);
  std::set<std::string> without_crisis = excluded;
  for (const auto& r : rows) {
    if (r.crisis) without_crisis.insert(r.label);
  }
  std::optional<ParamSummary> calm;
  if (without_crisis != excluded && without_crisis.size() < rows.size()) {
    calm = aggregate_params(rows, without_crisis);
  }

  Sink sink(out_path, out);
  if (a.format == "json") {
    json j = {{"rows", rows}, {"mean", mean}, {"crisis_threshold", a.crisis_threshold}};
    j["mean_without_crisis"] = calm ? json(*calm) : json(nullptr);
    *sink << j.dump(2) << "\n";
  } else {
    write_report_table(*sink, rows);
    write_summary_line(*sink, "mean", mean);
    if (calm) write_summary_line(*sink, "mean (no crisis)", *calm);
  }
  sink.finish();
  return success;
}

}  // namespace detail

/// Runs one subcommand. Exit codes: 0 success, 2 input error, 3 fit did not
/// converge (the result is still written).
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  using namespace detail;
  CLI::App app{"Two-branch income distribution: fitting, sampling and simulation", "yak"};
  app.require_subcommand(1);

  std::string config, out_path;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON file whose keys override the flags");
    sub->add_option("--out", out_path, "write output here instead of stdout");
  };

  FitArgs fa;
  std::size_t bootstrap = fa.fit.bootstrap_resamples;
  auto* fit_cmd = app.add_subcommand("fit", "fit the model to an income file and print JSON");
  common(fit_cmd);
  fit_cmd->add_option("--incomes", fa.incomes, "income CSV (column 'income', optional 'weight')");
  fit_cmd->add_option("--income-column", fa.income_column, "income column name");
  fit_cmd->add_option("--weight-column", fa.weight_column, "weight column name");
  fit_cmd->add_option("--billionaires", fa.billionaires, "top-wealth CSV (column 'wealth_usd')");
  fit_cmd->add_option("--usd-eur", fa.usd_eur_rate, "EUR per USD");
  fit_cmd->add_option("--return-rate", fa.return_rate, "annual return on wealth")->capture_default_str();
  fit_cmd->add_option("--top-weight", fa.top_weight, "survey weight of each top income")->capture_default_str();
  fit_cmd->add_flag("--tie-t1-m1", fa.fit.tie_t1_m1, "constrain T1 = m1");
  fit_cmd->add_option("--seed", fa.fit.seed, "random seed")->capture_default_str();
  fit_cmd->add_option("--bootstrap", bootstrap, "bootstrap resamples (0: none)")->capture_default_str();
  fit_cmd->add_option("--restarts", fa.fit.restarts, "simplex starts")->capture_default_str();

  PlotArgs pa;
  auto* plot_cmd = app.add_subcommand("plotdata", "empirical and model CCDF as CSV");
  common(plot_cmd);
  plot_cmd->add_option("--params", pa.params, "params JSON or fit output");
  plot_cmd->add_option("--incomes", pa.incomes, "income CSV");
  plot_cmd->add_option("--income-column", pa.income_column, "income column name");
  plot_cmd->add_option("--weight-column", pa.weight_column, "weight column name");
  plot_cmd->add_option("--points", pa.points, "model curve points")->capture_default_str();

  SampleArgs sa;
  auto* sample_cmd = app.add_subcommand("sample", "draw incomes from the model");
  common(sample_cmd);
  sample_cmd->add_option("--params", sa.params, "params JSON or fit output");
  sample_cmd->add_option("-n,--n", sa.n, "sample size");
  sample_cmd->add_option("--seed", sa.seed, "random seed")->capture_default_str();

  SimulateArgs ma;
  auto* sim_cmd = app.add_subcommand("simulate", "Langevin ensemble snapshots as CSV");
  common(sim_cmd);
  sim_cmd->add_option("--params", ma.params, "params JSON or fit output");
  sim_cmd->add_option("--agents", ma.agents, "ensemble size")->capture_default_str();
  sim_cmd->add_option("--dt", ma.dt, "time step")->capture_default_str();
  sim_cmd->add_option("--steps", ma.steps, "number of steps")->capture_default_str();
  sim_cmd->add_option("--stride", ma.stride, "steps between snapshots (default: steps)");
  sim_cmd->add_option("--seed", ma.seed, "random seed")->capture_default_str();
  sim_cmd->add_option("--threads", ma.threads, "worker threads")->capture_default_str();
  sim_cmd->add_option("--initial-income", ma.initial_income, "starting income (default T)");

  ReportArgs ra;
  auto* report_cmd = app.add_subcommand("report", "parameter table with crisis flags and means");
  common(report_cmd);
  report_cmd->add_option("--rows", ra.rows, "JSON array of {label, params, errors}; default: reference years");
  report_cmd->add_option("--crisis-threshold", ra.crisis_threshold, "flag alpha1 above this")->capture_default_str();
  report_cmd->add_option("--exclude", ra.exclude, "labels left out of the mean");
  report_cmd->add_option("--format", ra.format, "table or json")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    const CLI::App* failing = &app;
    for (auto* s : app.get_subcommands()) failing = s;
    err << failing->help();
    return input_error;
  }

  try {
    fa.fit.bootstrap_resamples = bootstrap;
    json cfg;
    if (!config.empty()) cfg = read_json(config);
    auto configured = [&](auto& args) {
      if (!config.empty()) {
        try {
          apply_config(cfg, args, out_path);
        } catch (const error& e) {
          throw input_failure(config + ": " + e.what());
        }
      }
    };
    if (fit_cmd->parsed()) {
      configured(fa);
      if (fa.incomes.empty()) {
        err << "--incomes is required\n" << fit_cmd->help();
        return input_error;
      }
      return cmd_fit(fa, out_path, out, err);
    }
    if (plot_cmd->parsed()) {
      configured(pa);
      return cmd_plotdata(pa, out_path, out, err);
    }
    if (sample_cmd->parsed()) {
      configured(sa);
      return cmd_sample(sa, out_path, out, err);
    }
    if (sim_cmd->parsed()) {
      configured(ma);
      return cmd_simulate(ma, out_path, out, err);
    }
    configured(ra);
    return cmd_report(ra, out_path, out, err);
  } catch (const error& e) {
    // every library error traces back to the input: files, flags or params
    err << "error: " << e.what() << "\n";
    return input_error;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return internal_failure;
  }
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"yak"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace yakovenko::cli

#endif  // YAKOVENKO_CLI_HPP
