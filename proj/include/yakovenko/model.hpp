#ifndef YAKOVENKO_MODEL_HPP
#define YAKOVENKO_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "json.hpp"
#include "yakovenko/errors.hpp"
#include "yakovenko/params.hpp"
#include "yakovenko/quadrature.hpp"
#include "yakovenko/random.hpp"

namespace yakovenko {

inline constexpr double default_quad_tol = 1e-10;

/// The two-branch equilibrium density with its normalization constants.
///
/// Below m1 the density is c_low * kernel_low(m), from m1 on it is
/// c_high * kernel_high(m). c_high / c_low follows from continuity at m1 and
/// c_low from unit total mass. Constants are held as logarithms so that
/// extreme parameter combinations neither underflow nor overflow.
///
/// Immutable after construction; every member function is const and
/// safe to call from several threads.
class NormalizedModel {
 public:
  NormalizedModel(const Params& params, double quad_tol = default_quad_tol)
      : params_(params), quad_tol_(quad_tol) {
    validate(params_);
    if (!(quad_tol > 0.0) || quad_tol > 1e-6) {
      throw domain_error("quad_tol must lie in (0, 1e-6]");
    }
    low_ = kernel_of(params_, Branch::low);
    high_ = kernel_of(params_, Branch::high);

    const double log_low_m1 = low_.log_value(params_.m1);
    const double log_high_m1 = high_.log_value(params_.m1);
    const QuadResult body = scaled_kernel_mass(low_, 0.0, params_.m1, 0.0, quad_tol_);
    const QuadResult tail = scaled_kernel_mass(high_, params_.m1, infinity, -log_high_m1, quad_tol_);
    if (!body.converged || !tail.converged) {
      const double achieved = std::max(body.relative_error(), tail.relative_error());
      throw quadrature_error("normalization integral did not converge", achieved);
    }
    const double scaled_tail = std::exp(log_low_m1) * tail.value;
    const double total = body.value + scaled_tail;
    log_c_low_ = -std::log(total);
    log_c_high_ = log_c_low_ + log_low_m1 - log_high_m1;
    log_tail_mass_ = log_low_m1 + std::log(tail.value) + log_c_low_;
    tail_mass_ = std::exp(log_tail_mass_);
  }

  const Params& params() const noexcept { return params_; }
  double quad_tol() const noexcept { return quad_tol_; }
  double c_low() const noexcept { return std::exp(log_c_low_); }
  double c_high() const noexcept { return std::exp(log_c_high_); }
  double log_c_low() const noexcept { return log_c_low_; }
  double log_c_high() const noexcept { return log_c_high_; }
  // Probability mass at and above m1.
  double upper_class_share() const noexcept { return tail_mass_; }

  // Either branch's normalized density, evaluated at any m >= 0.
  double branch_density(Branch branch, double m) const {
    check_income(m);
    return branch == Branch::low ? std::exp(log_c_low_ + low_.log_value(m))
                                 : std::exp(log_c_high_ + high_.log_value(m));
  }

  // Relative density jump between the branches at m1.
  double continuity_jump() const {
    const double lo = branch_density(Branch::low, params_.m1);
    const double hi = branch_density(Branch::high, params_.m1);
    return std::abs(lo - hi) / hi;
  }

  double log_pdf(double m) const {
    check_income(m);
    return m < params_.m1 ? log_c_low_ + low_.log_value(m) : log_c_high_ + high_.log_value(m);
  }

  double pdf(double m) const { return std::exp(log_pdf(m)); }

  // Probability mass on [a, b]; b may be +infinity.
  double mass(double a, double b) const {
    check_income(a);
    if (std::isnan(b) || b < a) throw domain_error("mass requires a <= b");
    const double m1 = params_.m1;
    QuadResult r;
    if (a < m1) r += scaled_kernel_mass(low_, a, std::min(b, m1), log_c_low_, quad_tol_);
    if (b > m1) r += scaled_kernel_mass(high_, std::max(a, m1), b, log_c_high_, quad_tol_);
    if (!r.converged) throw quadrature_error("probability mass did not converge", r.relative_error());
    return r.value;
  }

  double ccdf(double m) const {
    check_income(m);
    if (m >= params_.m1) return mass(m, infinity);
    return mass(m, params_.m1) + tail_mass_;
  }

  double cdf(double m) const { return 1.0 - ccdf(m); }

  // log ccdf(m), finite even where ccdf(m) itself underflows.
  double log_ccdf(double m) const {
    check_income(m);
    const BranchKernel& k = m < params_.m1 ? low_ : high_;
    const double log_here = k.log_value(m);
    QuadResult r;
    double log_offset = 0.0;
    if (m >= params_.m1) {
      r = scaled_kernel_mass(high_, m, infinity, -log_here, quad_tol_);
      log_offset = log_c_high_ + log_here;
    } else {
      r = scaled_kernel_mass(low_, m, params_.m1, -log_here, quad_tol_);
      log_offset = log_c_low_ + log_here;
      r.value += std::exp(log_tail_mass_ - log_offset);
    }
    if (!r.converged) throw quadrature_error("ccdf did not converge", r.relative_error());
    return log_offset + std::log(r.value);
  }

  /// CCDF at each of `ms`, which must be non-decreasing. Panels between
  /// neighbouring points are integrated once and accumulated from the top.
  std::vector<double> ccdf_sorted(std::span<const double> ms) const {
    std::vector<double> out(ms.size());
    if (ms.empty()) return out;
    for (std::size_t i = 0; i < ms.size(); ++i) {
      check_income(ms[i]);
      if (i > 0 && ms[i] < ms[i - 1]) throw domain_error("ccdf_sorted requires non-decreasing input");
    }
    double running = ccdf(ms.back());
    out.back() = running;
    for (std::size_t i = ms.size() - 1; i-- > 0;) {
      if (ms[i] < ms[i + 1]) running += mass(ms[i], ms[i + 1]);
      out[i] = running;
    }
    return out;
  }

  /// Income m with ccdf(m) = p, found by bracketed root finding on log ccdf.
  double quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw domain_error("quantile requires 0 < p < 1");
    const double log_p = std::log(p);
    auto g = [&](double m) { return log_ccdf(m) - log_p; };
    double lo = 0.0;
    double hi = params_.m1;
    if (p < tail_mass_) {
      lo = params_.m1;
      hi = 4.0 * params_.m1;
      while (g(hi) > 0.0) {
        lo = hi;
        hi *= 4.0;
        if (!std::isfinite(hi)) throw domain_error("quantile outside representable incomes");
      }
    }
    const double g_lo = g(lo);
    if (g_lo <= 0.0) return lo;
    const double g_hi = g(hi);
    if (g_hi >= 0.0) return hi;
    std::uintmax_t iters = 200;
    const auto bracket = boost::math::tools::toms748_solve(
        g, lo, hi, g_lo, g_hi, boost::math::tools::eps_tolerance<double>(46), iters);
    return 0.5 * (bracket.first + bracket.second);
  }

  /// n draws by inverse-CCDF transform of open uniforms from a seeded stream.
  std::vector<double> sample(std::size_t n, std::uint64_t seed) const;

  /// Least-squares slope of log ccdf against log m over k log-spaced points.
  double tail_slope(double m_lo, double m_hi, std::size_t k) const {
    if (!(m_lo >= params_.m1)) throw domain_error("tail_slope interval must start at or above m1");
    if (!(m_lo < m_hi) || !std::isfinite(m_hi)) throw domain_error("tail_slope requires m_lo < m_hi");
    if (k < 2) throw domain_error("tail_slope requires k >= 2");
    std::vector<double> xs(k);
    const double l0 = std::log(m_lo);
    const double step = (std::log(m_hi) - l0) / static_cast<double>(k - 1);
    for (std::size_t i = 0; i < k; ++i) xs[i] = std::exp(l0 + step * static_cast<double>(i));
    xs.front() = m_lo;
    xs.back() = m_hi;
    std::vector<double> log_ps(k);
    for (std::size_t i = 0; i < k; ++i) log_ps[i] = log_ccdf(xs[i]);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      mx += std::log(xs[i]);
      my += log_ps[i];
    }
    mx /= static_cast<double>(k);
    my /= static_cast<double>(k);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double dx = std::log(xs[i]) - mx;
      sxy += dx * (log_ps[i] - my);
      sxx += dx * dx;
    }
    return sxy / sxx;
  }

 private:
  static constexpr double infinity = std::numeric_limits<double>::infinity();

  static void check_income(double m) {
    if (!(m >= 0.0)) throw domain_error("income must be >= 0");
  }

  Params params_;
  double quad_tol_;
  BranchKernel low_{};
  BranchKernel high_{};
  double log_c_low_ = 0.0;
  double log_c_high_ = 0.0;
  double log_tail_mass_ = 0.0;
  double tail_mass_ = 0.0;
};

inline NormalizedModel normalize(const Params& params, double quad_tol = default_quad_tol) {
  return NormalizedModel(params, quad_tol);
}

/// Tabulated CCDF used to bracket many inversions at once; each inversion is
/// then polished by safeguarded Newton steps using the density as derivative.
class CcdfInverter {
 public:
  explicit CcdfInverter(const NormalizedModel& model, double nodes_per_decade = 16.0)
      : model_(&model) {
    const Params& p = model.params();
    const double start = 1e-3 * std::min(p.t_low, p.m0);
    const double reach = std::max(p.m1, p.m0);
    const double tail = std::max(model.upper_class_share(), 1e-300);
    // Past this point the ccdf is below ~1e-17 for a pure power tail.
    double stop = reach * std::pow(10.0, (std::log10(tail) + 17.0) / p.alpha1 + 1.0);
    if (!std::isfinite(stop) || stop > 1e300) stop = 1e300;
    stop = std::max(stop, 10.0 * reach);

    nodes_.push_back(0.0);
    const double ratio = std::pow(10.0, 1.0 / nodes_per_decade);
    bool m1_inserted = false;
    for (double m = start; m < stop; m *= ratio) {
      if (!m1_inserted && m >= p.m1) {
        if (m > p.m1) nodes_.push_back(p.m1);
        m1_inserted = true;
      }
      nodes_.push_back(m);
    }
    if (!m1_inserted) nodes_.push_back(p.m1);
    ccdf_ = model.ccdf_sorted(nodes_);
  }

  double invert(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw domain_error("inversion requires 0 < p < 1");
    if (p >= ccdf_.front()) return 0.0;
    double lo, hi, c_lo, c_hi;
    if (p <= ccdf_.back()) {
      lo = nodes_.back();
      c_lo = ccdf_.back();
      hi = 4.0 * lo;
      c_hi = model_->ccdf(hi);
      while (c_hi >= p) {
        lo = hi;
        c_lo = c_hi;
        hi *= 4.0;
        if (!std::isfinite(hi)) throw domain_error("inversion outside representable incomes");
        c_hi = model_->ccdf(hi);
      }
    } else {
      // First node whose ccdf falls below p; ccdf_ is non-increasing.
      const auto it = std::upper_bound(ccdf_.begin(), ccdf_.end(), p, std::greater<double>());
      const auto k = static_cast<std::size_t>(it - ccdf_.begin());
      lo = nodes_[k - 1];
      hi = nodes_[k];
      c_lo = ccdf_[k - 1];
      c_hi = ccdf_[k];
    }
    const double frac = (c_lo - p) / (c_lo - c_hi);
    const double guess = lo + std::clamp(frac, 0.0, 1.0) * (hi - lo);
    auto h = [&](double m) {
      const double value = c_hi + (m < hi ? model_->mass(m, hi) : 0.0) - p;
      return std::make_pair(value, -model_->pdf(m));
    };
    std::uintmax_t iters = 100;
    return boost::math::tools::newton_raphson_iterate(h, guess, lo, hi, 42, iters);
  }

 private:
  const NormalizedModel* model_;
  std::vector<double> nodes_;
  std::vector<double> ccdf_;
};

inline std::vector<double> NormalizedModel::sample(std::size_t n, std::uint64_t seed) const {
  if (n == 0) throw domain_error("sample requires n >= 1");
  const CcdfInverter inverter(*this);
  Engine gen = make_engine(seed, streams::sample);
  std::vector<double> out(n);
  for (auto& x : out) x = inverter.invert(open_uniform(gen));
  return out;
}

inline void to_json(nlohmann::json& j, const NormalizedModel& m) {
  j = nlohmann::json{{"params", m.params()},
                     {"c_low", m.c_low()},
                     {"c_high", m.c_high()},
                     {"log_c_low", m.log_c_low()},
                     {"log_c_high", m.log_c_high()},
                     {"quad_tol", m.quad_tol()}};
}

}  // namespace yakovenko

#endif  // YAKOVENKO_MODEL_HPP
