#ifndef YAKOVENKO_FIT_HPP
#define YAKOVENKO_FIT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "json.hpp"
#include "yakovenko/data.hpp"
#include "yakovenko/errors.hpp"
#include "yakovenko/model.hpp"
#include "yakovenko/params.hpp"
#include "yakovenko/random.hpp"
#include "yakovenko/simplex.hpp"

namespace yakovenko {

struct ParamBounds {
  Params lower;
  Params upper;
  friend bool operator==(const ParamBounds&, const ParamBounds&) = default;
};

struct FitConfig {
  std::size_t grid_points = 200;
  std::size_t tail_points = 30;  // grid stops where fewer observations lie above
  bool tie_t1_m1 = false;
  std::optional<ParamBounds> bounds;  // unset: derived from the data range
  std::size_t restarts = 4;           // number of simplex starts, the first from initial_guess
  std::size_t bootstrap_resamples = 200;
  std::uint64_t seed = 1;
  double opt_tol = 1e-6;  // simplex diameter in log-parameter space
  double quad_tol = default_quad_tol;
  std::size_t max_evaluations = 4000;  // per simplex run
};

struct FitResult {
  Params params;
  Params errors;  // filled by bootstrap_errors; zero otherwise
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t restarts_used = 0;
  bool at_bound = false;    // some parameter sits on its box limit
  bool degenerate = false;  // one branch fits about as well: m1 not identified
  double single_branch_objective = 0.0;
};

inline void validate(const FitConfig& c) {
  if (c.grid_points < 10) throw config_error("grid_points must be >= 10");
  if (c.restarts < 1) throw config_error("restarts must be >= 1");
  if (!(c.opt_tol > 0.0)) throw config_error("opt_tol must be > 0");
  if (!(c.quad_tol > 0.0) || c.quad_tol > 1e-6) throw config_error("quad_tol must lie in (0, 1e-6]");
  if (c.max_evaluations < 10) throw config_error("max_evaluations must be >= 10");
  if (c.bounds) {
    const auto lo = std::to_array({c.bounds->lower.t_low, c.bounds->lower.t_high, c.bounds->lower.m0,
                                   c.bounds->lower.m1, c.bounds->lower.alpha, c.bounds->lower.alpha1});
    const auto hi = std::to_array({c.bounds->upper.t_low, c.bounds->upper.t_high, c.bounds->upper.m0,
                                   c.bounds->upper.m1, c.bounds->upper.alpha, c.bounds->upper.alpha1});
    for (std::size_t i = 0; i < lo.size(); ++i) {
      if (!(lo[i] > 0.0) || !(hi[i] >= lo[i]) || !std::isfinite(hi[i])) {
        throw config_error("bounds must be finite positive intervals");
      }
    }
  }
}

namespace detail {

inline std::vector<CcdfPoint> positive_points(const EmpiricalCcdf& ccdf) {
  std::vector<CcdfPoint> pts;
  pts.reserve(ccdf.size());
  for (const auto& pt : ccdf.points) {
    if (pt.m > 0.0) pts.push_back(pt);
  }
  return pts;
}

// ln p at ln m, linear between neighbouring points, clamped at the ends.
inline double interp_log(std::span<const double> lx, std::span<const double> ly, double x) {
  if (x <= lx.front()) return ly.front();
  if (x >= lx.back()) return ly.back();
  const std::size_t j = static_cast<std::size_t>(std::upper_bound(lx.begin(), lx.end(), x) - lx.begin());
  const double t = (x - lx[j - 1]) / (lx[j] - lx[j - 1]);
  return ly[j - 1] + t * (ly[j] - ly[j - 1]);
}

inline std::array<double, 6> to_array(const Params& p) {
  return {p.t_low, p.t_high, p.m0, p.m1, p.alpha, p.alpha1};
}

inline Params from_array(const std::array<double, 6>& a) { return {a[0], a[1], a[2], a[3], a[4], a[5]}; }

}  // namespace detail

/// Mean squared difference of log10 CCDFs, model against data, over a
/// log-spaced grid covering the positive data range.
class CcdfObjective {
 public:
  CcdfObjective(const EmpiricalCcdf& ccdf, std::size_t grid_points, std::size_t tail_points = 30) {
    if (grid_points < 2) throw config_error("grid_points must be >= 2");
    auto pts = detail::positive_points(ccdf);
    if (pts.size() < 2) throw insufficient_data("objective needs two positive incomes");
    // Drop the sparse top: the grid ends at the last point with about
    // `tail_points` distinct incomes above it (a tenth of the data if fewer).
    // Counting distinct points keeps this unchanged when every record is
    // duplicated.
    const double distinct = static_cast<double>(ccdf.size());
    const double keep = std::min(static_cast<double>(tail_points), 0.1 * distinct);
    const double p_floor = keep / (distinct + 1.0);
    while (pts.size() > 2 && pts.back().p < p_floor) pts.pop_back();
    std::vector<double> lx(pts.size()), ly(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      lx[i] = std::log(pts[i].m);
      ly[i] = std::log(pts[i].p);
    }
    grid_.resize(grid_points);
    target_.resize(grid_points);
    const double lo = lx.front();
    const double hi = lx.back();
    for (std::size_t k = 0; k < grid_points; ++k) {
      const double x = k + 1 == grid_points ? hi : lo + (hi - lo) * static_cast<double>(k) / (grid_points - 1.0);
      grid_[k] = k + 1 == grid_points ? pts.back().m : (k == 0 ? pts.front().m : std::exp(x));
      target_[k] = detail::interp_log(lx, ly, x) / std::numbers::ln10;
    }
  }

  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<double>& target_log10() const noexcept { return target_; }

  double operator()(const NormalizedModel& model) const {
    const std::vector<double> v = model.ccdf_sorted(grid_);
    double sum = 0.0;
    for (std::size_t k = 0; k < grid_.size(); ++k) {
      // below this the running sum has lost its relative accuracy
      const double lg = v[k] > 1e-290 ? std::log10(v[k]) : model.log_ccdf(grid_[k]) / std::numbers::ln10;
      const double d = lg - target_[k];
      sum += d * d;
    }
    return sum / static_cast<double>(grid_.size());
  }

  double operator()(const Params& params, double quad_tol = default_quad_tol) const {
    return (*this)(NormalizedModel(params, quad_tol));
  }

 private:
  std::vector<double> grid_;
  std::vector<double> target_;
};

inline double objective(const Params& params, const EmpiricalCcdf& ccdf, std::size_t grid_points = 200,
                        std::size_t tail_points = 30, double quad_tol = default_quad_tol) {
  return CcdfObjective(ccdf, grid_points, tail_points)(params, quad_tol);
}

/// Rough starting point read off the log-log CCDF. Needs at least 20
/// positive points spanning two decades.
inline Params initial_guess(const EmpiricalCcdf& ccdf) {
  const auto pts = detail::positive_points(ccdf);
  if (pts.size() < 20) throw insufficient_data("initial_guess needs at least 20 positive points");
  const double lo = std::log(pts.front().m);
  const double hi = std::log(pts.back().m);
  if (hi - lo < 2.0 * std::numbers::ln10) throw insufficient_data("data must span at least two decades");

  // T: -ln p = m/T through the origin on the upper half of the body.
  double smm = 0.0, smy = 0.0;
  std::size_t used = 0;
  for (const auto& pt : pts) {
    if (pt.p >= 0.5 && pt.p <= 0.95) {
      smm += pt.m * pt.m;
      smy += pt.m * -std::log(pt.p);
      ++used;
    }
  }
  if (used < 3) {
    smm = smy = 0.0;
    for (const auto& pt : pts) {
      if (pt.p >= 0.1) {
        smm += pt.m * pt.m;
        smy += pt.m * -std::log(pt.p);
      }
    }
  }
  const double t_low = smy > 0.0 ? smm / smy : std::exp(0.5 * (lo + hi));

  // Smoothed curve, ten nodes per decade; slopes and curvature over +-0.3 decade.
  std::vector<double> lx(pts.size()), ly(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    lx[i] = std::log(pts[i].m);
    ly[i] = std::log(pts[i].p);
  }
  const std::size_t nodes = static_cast<std::size_t>(std::ceil((hi - lo) / std::numbers::ln10 * 10.0)) + 1;
  std::vector<double> x(nodes), y(nodes);
  for (std::size_t k = 0; k < nodes; ++k) {
    x[k] = lo + (hi - lo) * static_cast<double>(k) / (nodes - 1.0);
    y[k] = detail::interp_log(lx, ly, x[k]);
  }
  const std::size_t h = 3;
  std::vector<double> slope(nodes, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> curv(nodes, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = h; k + h < nodes; ++k) slope[k] = (y[k + h] - y[k - h]) / (x[k + h] - x[k - h]);
  for (std::size_t k = 2 * h; k + 2 * h < nodes; ++k) curv[k] = (slope[k + h] - slope[k - h]) / (x[k + h] - x[k - h]);

  // Ignore the sparse top where a handful of points set the curve.
  const double p_floor = std::max(20.0 / static_cast<double>(pts.size()), 1e-6);
  auto reliable = [&](std::size_t k) { return !std::isnan(curv[k]) && std::exp(y[k]) >= p_floor; };

  std::optional<std::size_t> knee;
  for (std::size_t k = 0; k < nodes; ++k) {
    if (reliable(k) && (!knee || curv[k] < curv[*knee])) knee = k;
  }
  const std::size_t k0 = knee.value_or(nodes / 2);
  const double m0 = std::exp(x[k0]);

  std::optional<std::size_t> brk;
  for (std::size_t k = k0 + 1; k < nodes; ++k) {
    if (reliable(k) && curv[k] > 1.0 && (!brk || curv[k] > curv[*brk])) brk = k;
  }
  const std::size_t k1 = brk.value_or(std::min(nodes - 1, static_cast<std::size_t>(0.9 * (nodes - 1.0))));
  const double m1 = std::exp(x[k1]);

  std::vector<double> mid;
  for (std::size_t k = k0 + 1; k < k1; ++k) {
    if (!std::isnan(slope[k])) mid.push_back(-slope[k]);
  }
  double alpha = 0.0;
  if (!mid.empty()) {
    std::nth_element(mid.begin(), mid.begin() + mid.size() / 2, mid.end());
    alpha = mid[mid.size() / 2];
  } else if (!std::isnan(slope[k0])) {
    alpha = -slope[k0];
  }

  // Top decade, least squares on the raw points.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t top = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (lx[i] < hi - std::numbers::ln10) continue;
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
    ++top;
  }
  double alpha1 = 0.0;
  const double det = static_cast<double>(top) * sxx - sx * sx;
  if (top >= 2 && det > 0.0) alpha1 = -(static_cast<double>(top) * sxy - sx * sy) / det;

  Params p;
  p.t_low = t_low;
  p.m0 = m0;
  p.m1 = m1;
  p.t_high = m1;
  p.alpha = std::clamp(alpha, 0.2, 10.0);
  p.alpha1 = std::clamp(alpha1, 0.2, 10.0);
  return p;
}

// Box used when the config leaves bounds unset.
inline ParamBounds default_bounds(const EmpiricalCcdf& ccdf) {
  const auto pts = detail::positive_points(ccdf);
  if (pts.empty()) throw insufficient_data("no positive incomes");
  const double lo = pts.front().m * 1e-2;
  const double hi = pts.back().m * 1e2;
  return {{lo, lo, lo, lo, 0.05, 0.05}, {hi, hi, hi, hi, 20.0, 20.0}};
}

namespace detail {

// Optimisation coordinates are logarithms of the free parameters; with
// tie_t1_m1 the T1 slot is dropped and copied from m1.
class FitProblem {
 public:
  // single_branch: only (T, m0, alpha) move; the upper branch copies them
  // and m1 stays where `fixed_m1` puts it.
  FitProblem(const EmpiricalCcdf& ccdf, const FitConfig& cfg, bool single_branch = false, double fixed_m1 = 0.0)
      : cfg_(cfg), objective_(ccdf, cfg.grid_points, cfg.tail_points), single_(single_branch), fixed_m1_(fixed_m1) {
    validate(cfg_);
    const auto pts = positive_points(ccdf);
    if (pts.size() < 2 || pts.back().m < 100.0 * pts.front().m) {
      throw insufficient_data("fit needs data spanning at least two decades");
    }
    const ParamBounds b = cfg_.bounds ? *cfg_.bounds : default_bounds(ccdf);
    const auto lo = to_array(b.lower);
    const auto hi = to_array(b.upper);
    for (std::size_t i = 0; i < 6; ++i) {
      if (single_ && i != 0 && i != 2 && i != 4) continue;
      if (cfg_.tie_t1_m1 && i == 1) continue;
      slots_.push_back(i);
      lower_.push_back(std::log(lo[i]));
      upper_.push_back(std::log(hi[i]));
    }
  }

  const CcdfObjective& objective() const noexcept { return objective_; }

  std::vector<double> encode(const Params& p) const {
    const auto a = to_array(p);
    std::vector<double> x;
    for (std::size_t s : slots_) x.push_back(std::log(a[s]));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower_[i], upper_[i]);
    return x;
  }

  Params decode(const std::vector<double>& x) const {
    std::array<double, 6> a{};
    for (std::size_t i = 0; i < slots_.size(); ++i) a[slots_[i]] = std::exp(x[i]);
    if (single_) {
      a[1] = a[0];
      a[3] = fixed_m1_;
      a[5] = a[4];
    } else if (cfg_.tie_t1_m1) {
      a[1] = a[3];
    }
    return from_array(a);
  }

  double value(const Params& p) const {
    try {
      return objective_(p, cfg_.quad_tol);
    } catch (const yakovenko::error&) {
      return std::numeric_limits<double>::infinity();
    }
  }

  // Simplex from `start`, then once more from its result to undo a
  // prematurely collapsed simplex.
  SimplexResult run(const Params& start) const {
    SimplexOptions opt;
    opt.lower = lower_;
    opt.upper = upper_;
    opt.x_tol = cfg_.opt_tol;
    opt.max_evaluations = cfg_.max_evaluations;
    auto f = [&](const std::vector<double>& x) { return value(decode(x)); };
    SimplexResult first = nelder_mead(f, encode(start), opt);
    opt.initial_step = 0.05;
    // the restart keeps first.x as a vertex, so it can only improve
    SimplexResult second = nelder_mead(f, first.x, opt);
    second.iterations += first.iterations;
    second.evaluations += first.evaluations;
    return second;
  }

  bool at_bound(const std::vector<double>& x) const {
    const double eps = std::max(10.0 * cfg_.opt_tol, 1e-9);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] - lower_[i] < eps || upper_[i] - x[i] < eps) return true;
    }
    return false;
  }

  FitResult finish(const SimplexResult& r) const {
    FitResult out;
    out.params = decode(r.x);
    out.objective = r.fx;
    out.iterations = r.iterations;
    out.converged = r.converged;
    out.at_bound = at_bound(r.x);
    return out;
  }

 private:
  FitConfig cfg_;
  CcdfObjective objective_;
  bool single_;
  double fixed_m1_;
  std::vector<std::size_t> slots_;
  std::vector<double> lower_, upper_;
};

}  // namespace detail

// Best single-branch objective (alpha1 = alpha, T1 = T, so m1 drops out),
// started from the lower branch of `start`.
inline double single_branch_objective(const EmpiricalCcdf& ccdf, const FitConfig& cfg, const Params& start) {
  const detail::FitProblem prob(ccdf, cfg, true, start.m1);
  return prob.run(start).fx;
}

namespace detail {

// Two branches are not needed when one branch fits within a factor
// `degenerate_ratio` of the full objective; m1 is then unidentified.
inline constexpr double degenerate_ratio = 4.0;

inline void diagnose(FitResult& r, const EmpiricalCcdf& ccdf, const FitConfig& cfg) {
  r.single_branch_objective = single_branch_objective(ccdf, cfg, r.params);
  r.degenerate = r.single_branch_objective <= degenerate_ratio * r.objective;
}

inline FitResult fit_once(const FitProblem& prob, const FitConfig& cfg, const Params& start) {
  Params s = start;
  if (cfg.tie_t1_m1) s.t_high = s.m1;
  FitResult out = prob.finish(prob.run(s));
  out.restarts_used = 1;
  return out;
}

}  // namespace detail

/// Single simplex fit from `start`.
inline FitResult fit_from(const EmpiricalCcdf& ccdf, const FitConfig& cfg, const Params& start) {
  FitResult out = detail::fit_once(detail::FitProblem(ccdf, cfg), cfg, start);
  detail::diagnose(out, ccdf, cfg);
  return out;
}

/// Multistart fit: start 0 is initial_guess, start k >= 1 perturbs it by a
/// log-normal factor (sigma 0.5) per parameter. The best converged start
/// wins; if none converged the best overall is returned unconverged.
inline FitResult fit(const EmpiricalCcdf& ccdf, const FitConfig& cfg) {
  const detail::FitProblem prob(ccdf, cfg);
  Params guess = initial_guess(ccdf);
  if (cfg.tie_t1_m1) guess.t_high = guess.m1;

  std::vector<SimplexResult> runs;
  std::size_t iterations = 0;
  for (std::size_t k = 0; k < cfg.restarts; ++k) {
    std::vector<double> x = prob.encode(guess);
    if (k > 0) {
      Engine g = make_engine(cfg.seed, streams::restart + k);
      boost::random::normal_distribution<double> gauss(0.0, 0.5);
      for (double& xi : x) xi += gauss(g);
    }
    runs.push_back(prob.run(prob.decode(x)));
    iterations += runs.back().iterations;
  }
  auto better = [](const SimplexResult& a, const SimplexResult& b) {
    if (a.converged != b.converged) return a.converged;
    return a.fx < b.fx;
  };
  std::size_t best = 0;
  for (std::size_t k = 1; k < runs.size(); ++k) {
    if (better(runs[k], runs[best])) best = k;
  }
  FitResult out = prob.finish(runs[best]);
  out.iterations = iterations;
  out.restarts_used = runs.size();
  detail::diagnose(out, ccdf, cfg);
  return out;
}

inline FitResult fit(const Dataset& ds, const FitConfig& cfg) { return fit(empirical_ccdf(ds), cfg); }

/// Draw of ds.size() records with replacement, probability proportional to
/// weight; the resample carries unit weights.
inline Dataset weighted_resample(const Dataset& ds, Engine& g) {
  std::vector<double> cum(ds.size());
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) cum[i] = total += ds.weights[i];
  std::vector<double> values(ds.size());
  for (double& v : values) {
    const double u = open_uniform(g) * total;
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) --it;
    v = ds.values[static_cast<std::size_t>(it - cum.begin())];
  }
  return make_dataset(std::move(values), {}, ds.label);
}

/// Per-parameter standard deviations over bootstrap refits started at
/// `center`. `resample(ds, engine)` produces each replicate; resample b
/// draws from its own stream, so results do not depend on evaluation order.
template <class Resampler>
Params bootstrap_errors(const Dataset& ds, const FitConfig& cfg, const Params& center, Resampler&& resample) {
  validate(cfg);
  if (cfg.bootstrap_resamples < 20) throw config_error("bootstrap_resamples must be >= 20");
  if (ds.empty()) throw empty_dataset("bootstrap of an empty dataset");
  std::vector<std::array<double, 6>> fits;
  std::size_t failed = 0;
  for (std::size_t b = 0; b < cfg.bootstrap_resamples; ++b) {
    Engine g = make_engine(cfg.seed, streams::bootstrap + b);
    const Dataset rep = resample(ds, g);
    try {
      const EmpiricalCcdf cc = empirical_ccdf(rep);
      const FitResult r = detail::fit_once(detail::FitProblem(cc, cfg), cfg, center);
      if (r.converged) {
        fits.push_back(detail::to_array(r.params));
      } else {
        ++failed;
      }
    } catch (const insufficient_data&) {
      ++failed;
    }
  }
  if (2 * failed > cfg.bootstrap_resamples) {
    throw unreliable_errors(std::to_string(failed) + " of " + std::to_string(cfg.bootstrap_resamples) +
                            " bootstrap fits did not converge");
  }
  std::array<double, 6> sd{};
  for (std::size_t i = 0; i < 6; ++i) {
    // shifted by the first fit: identical replicates give exactly zero
    double mean = 0.0;
    for (const auto& f : fits) mean += f[i] - fits.front()[i];
    mean /= static_cast<double>(fits.size());
    double ss = 0.0;
    for (const auto& f : fits) {
      const double d = f[i] - fits.front()[i] - mean;
      ss += d * d;
    }
    sd[i] = fits.size() > 1 ? std::sqrt(ss / (fits.size() - 1.0)) : 0.0;
  }
  return detail::from_array(sd);
}

inline Params bootstrap_errors(const Dataset& ds, const FitConfig& cfg, const Params& center) {
  return bootstrap_errors(ds, cfg, center, weighted_resample);
}

inline void to_json(nlohmann::json& j, const ParamBounds& b) { j = {{"lower", b.lower}, {"upper", b.upper}}; }

inline void from_json(const nlohmann::json& j, ParamBounds& b) {
  try {
    b.lower = j.at("lower").get<Params>();
    b.upper = j.at("upper").get<Params>();
  } catch (const nlohmann::json::exception& e) {
    throw format_error(std::string("bounds: ") + e.what());
  }
}

inline void to_json(nlohmann::json& j, const FitConfig& c) {
  j = {{"grid_points", c.grid_points},
       {"tail_points", c.tail_points},
       {"tie_t1_m1", c.tie_t1_m1},
       {"restarts", c.restarts},
       {"bootstrap_resamples", c.bootstrap_resamples},
       {"seed", c.seed},
       {"opt_tol", c.opt_tol},
       {"quad_tol", c.quad_tol},
       {"max_evaluations", c.max_evaluations}};
  j["bounds"] = c.bounds ? nlohmann::json(*c.bounds) : nlohmann::json(nullptr);
}

// Missing keys keep their defaults.
inline void from_json(const nlohmann::json& j, FitConfig& c) {
  try {
    c.grid_points = j.value("grid_points", c.grid_points);
    c.tail_points = j.value("tail_points", c.tail_points);
    c.tie_t1_m1 = j.value("tie_t1_m1", c.tie_t1_m1);
    c.restarts = j.value("restarts", c.restarts);
    c.bootstrap_resamples = j.value("bootstrap_resamples", c.bootstrap_resamples);
    c.seed = j.value("seed", c.seed);
    c.opt_tol = j.value("opt_tol", c.opt_tol);
    c.quad_tol = j.value("quad_tol", c.quad_tol);
    c.max_evaluations = j.value("max_evaluations", c.max_evaluations);
    if (j.contains("bounds") && !j.at("bounds").is_null()) c.bounds = j.at("bounds").get<ParamBounds>();
  } catch (const nlohmann::json::exception& e) {
    throw format_error(std::string("fit config: ") + e.what());
  }
}

inline void to_json(nlohmann::json& j, const FitResult& r) {
  j = {{"params", r.params},   {"errors", r.errors},       {"objective", r.objective},
       {"iterations", r.iterations}, {"converged", r.converged}, {"restarts_used", r.restarts_used},
       {"at_bound", r.at_bound}, {"degenerate", r.degenerate},
       {"single_branch_objective", r.single_branch_objective}};
}

}  // namespace yakovenko

#endif  // YAKOVENKO_FIT_HPP
