#ifndef YAKOVENKO_QUADRATURE_HPP
#define YAKOVENKO_QUADRATURE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <queue>
#include <vector>

#include "yakovenko/errors.hpp"
#include "yakovenko/params.hpp"

namespace yakovenko {

struct QuadResult {
  double value = 0.0;
  double abs_error_estimate = 0.0;
  std::size_t evaluations = 0;
  bool converged = true;

  QuadResult& operator+=(const QuadResult& o) {
    value += o.value;
    abs_error_estimate += o.abs_error_estimate;
    evaluations += o.evaluations;
    converged = converged && o.converged;
    return *this;
  }

  double relative_error() const {
    return value != 0.0 ? abs_error_estimate / std::abs(value) : abs_error_estimate;
  }
};

struct QuadOptions {
  std::size_t max_panels = 4096;
  // Convergence target is rel_tol * max(|value|, abs_floor).
  double abs_floor = std::numeric_limits<double>::min();
};

namespace detail {

struct Panel {
  double a;
  double b;
  double value;
  double error;
};

// 21-point Gauss-Kronrod rule with the QUADPACK error heuristic.
template <class F>
Panel gauss_kronrod21(F& f, double a, double b) {
  static constexpr std::array<double, 11> xgk = {
      0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
      0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
      0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
      0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
      0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
      0.000000000000000000000000000000000};
  static constexpr std::array<double, 11> wgk = {
      0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
      0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
      0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
      0.123491976262065851077600525478126, 0.134709217311473325928054001771707,
      0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
      0.149445554002916905664936468389821};
  static constexpr std::array<double, 5> wg = {
      0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
      0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
      0.295524224714752870173892994651338};
  constexpr double eps = std::numeric_limits<double>::epsilon();

  const double centr = 0.5 * (a + b);
  const double hlgth = 0.5 * (b - a);
  const double fc = f(centr);
  double resg = 0.0;
  double resk = wgk[10] * fc;
  double resabs = std::abs(resk);
  std::array<double, 10> fv1{};
  std::array<double, 10> fv2{};
  for (std::size_t j = 0; j < 10; ++j) {
    const double dx = hlgth * xgk[j];
    const double f1 = f(centr - dx);
    const double f2 = f(centr + dx);
    fv1[j] = f1;
    fv2[j] = f2;
    resk += wgk[j] * (f1 + f2);
    resabs += wgk[j] * (std::abs(f1) + std::abs(f2));
    if (j % 2 == 1) resg += wg[j / 2] * (f1 + f2);
  }
  const double reskh = 0.5 * resk;
  double resasc = wgk[10] * std::abs(fc - reskh);
  for (std::size_t j = 0; j < 10; ++j) {
    resasc += wgk[j] * (std::abs(fv1[j] - reskh) + std::abs(fv2[j] - reskh));
  }
  const double value = resk * hlgth;
  resabs *= std::abs(hlgth);
  resasc *= std::abs(hlgth);
  double err = std::abs((resk - resg) * hlgth);
  if (resasc != 0.0 && err != 0.0) {
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  }
  if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) {
    err = std::max(50.0 * eps * resabs, err);
  }
  if (!std::isfinite(value)) err = std::numeric_limits<double>::infinity();
  return Panel{a, b, value, err};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod integration of `f` over [a, b].
///
/// The panel with the largest error estimate is bisected until the summed
/// estimate meets rel_tol * max(|value|, abs_floor) or `max_panels` is reached.
/// Integrable endpoint singularities are resolved by repeated bisection since
/// the rule never samples the endpoints. `converged` is false whenever the
/// final estimate exceeds the target.
template <class F>
QuadResult integrate_adaptive(F&& f, double a, double b, double rel_tol, QuadOptions opts = {}) {
  if (!std::isfinite(a) || !std::isfinite(b) || !(a < b)) {
    throw domain_error("integrate_adaptive requires finite a < b");
  }
  if (!(rel_tol > 0.0)) throw domain_error("integrate_adaptive requires rel_tol > 0");

  auto by_error = [](const detail::Panel& x, const detail::Panel& y) { return x.error < y.error; };
  std::priority_queue<detail::Panel, std::vector<detail::Panel>, decltype(by_error)> active(by_error);
  std::vector<detail::Panel> frozen;  // panels too narrow to bisect

  QuadResult r;
  detail::Panel first = detail::gauss_kronrod21(f, a, b);
  r.evaluations = 21;
  double total = first.value;
  double error = first.error;
  active.push(first);
  std::size_t panels = 1;

  auto target = [&] { return rel_tol * std::max(std::abs(total), opts.abs_floor); };

  while (!active.empty() && error > target() && panels < opts.max_panels) {
    detail::Panel worst = active.top();
    active.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a) || !(mid < worst.b)) {
      frozen.push_back(worst);
      continue;
    }
    detail::Panel left = detail::gauss_kronrod21(f, worst.a, mid);
    detail::Panel right = detail::gauss_kronrod21(f, mid, worst.b);
    r.evaluations += 42;
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    active.push(left);
    active.push(right);
    ++panels;
  }

  // Re-sum from scratch, smallest contributions first.
  std::vector<detail::Panel> all = std::move(frozen);
  while (!active.empty()) {
    all.push_back(active.top());
    active.pop();
  }
  std::sort(all.begin(), all.end(),
            [](const auto& x, const auto& y) { return std::abs(x.value) < std::abs(y.value); });
  r.value = 0.0;
  r.abs_error_estimate = 0.0;
  for (const auto& p : all) {
    r.value += p.value;
    r.abs_error_estimate += p.error;
  }
  r.converged = std::isfinite(r.value) &&
                r.abs_error_estimate <= rel_tol * std::max(std::abs(r.value), opts.abs_floor);
  return r;
}

enum class Branch { low, high };

/// One branch of the density kernel,
/// exp(-(m0/T) atan(m/m0)) * (1 + (m/m0)^2)^(-(exponent+1)/2).
struct BranchKernel {
  double m0;
  double temperature;
  double exponent;

  double log_value(double m) const {
    const double x = m / m0;
    const double log_bracket = x > 1.0 ? 2.0 * std::log(x) + std::log1p(1.0 / (x * x))
                                       : std::log1p(x * x);
    return -(m0 / temperature) * std::atan(x) - 0.5 * (exponent + 1.0) * log_bracket;
  }
};

inline BranchKernel kernel_of(const Params& p, Branch branch) {
  return branch == Branch::low ? BranchKernel{p.m0, p.t_low, p.alpha}
                               : BranchKernel{p.m0, p.t_high, p.alpha1};
}

/// Integral of exp(log_scale) * kernel(m) over [a, b], b possibly +infinity.
///
/// Under u = atan(m/m0) the integrand becomes m0 exp(-(m0/T) u) cos(u)^(exponent-1),
/// so [0, inf) maps onto [0, pi/2). Intervals above m0 are integrated in the
/// complementary angle v = pi/2 - u, where cos u = sin v is evaluated without
/// cancellation. For b = inf the sliver v in [0, eps] near the singular end is
/// added from its series expansion.
inline QuadResult scaled_kernel_mass(const BranchKernel& k, double a, double b, double log_scale,
                                     double rel_tol) {
  if (!(a >= 0.0) || std::isnan(b) || !(a <= b) || std::isinf(a)) {
    throw domain_error("kernel mass requires 0 <= a <= b");
  }
  if (a == b) return QuadResult{};
  const bool infinite = std::isinf(b);
  if (infinite && !(k.exponent > 0.0)) {
    throw divergent_integral("upper branch with exponent <= 0 has infinite mass");
  }

  constexpr double half_pi = std::numbers::pi / 2.0;
  const double c = k.m0 / k.temperature;
  const double beta = k.exponent - 1.0;
  const double log_m0 = std::log(k.m0);

  QuadResult total;
  QuadResult sliver;
  // u-coordinates on [a, min(b, m0)]
  if (a < k.m0) {
    const double hi = std::min(b, k.m0);
    const double u_lo = std::atan(a / k.m0);
    const double u_hi = std::atan(hi / k.m0);
    auto g = [&](double u) {
      return std::exp(log_m0 - c * u + beta * std::log(std::cos(u)) + log_scale);
    };
    if (u_lo < u_hi) total += integrate_adaptive(g, u_lo, u_hi, rel_tol);
  }
  // v-coordinates on [max(a, m0), b]
  if (b > k.m0) {
    const double lo = std::max(a, k.m0);
    const double v_hi = std::atan2(k.m0, lo);
    double v_lo = infinite ? 0.0 : std::atan2(k.m0, b);
    auto g = [&](double v) {
      return std::exp(log_m0 - c * (half_pi - v) + beta * std::log(std::sin(v)) + log_scale);
    };
    if (infinite) {
      // Series of e^{c v} sin(v)^beta about v = 0 through second order.
      const double eps = std::min(1e-5 * v_hi, 1e-4 / std::max(c, 1.0));
      const double e = std::exp(log_m0 - c * half_pi + log_scale);
      const double alpha = k.exponent;
      const double t0 = std::pow(eps, alpha) / alpha;
      const double t1 = c * std::pow(eps, alpha + 1.0) / (alpha + 1.0);
      const double t2 = (0.5 * c * c - beta / 6.0) * std::pow(eps, alpha + 2.0) / (alpha + 2.0);
      const double ce = c * eps;
      sliver.value = e * (t0 + t1 + t2);
      sliver.abs_error_estimate =
          std::abs(e * t0) * (ce * ce * ce + eps * eps * eps * (1.0 + c) * (std::abs(beta) + 1.0));
      v_lo = eps;
    }
    if (v_lo < v_hi) total += integrate_adaptive(g, v_lo, v_hi, rel_tol);
  }
  total += sliver;
  total.converged = total.converged &&
                    sliver.abs_error_estimate <= 0.1 * rel_tol * std::abs(total.value);
  return total;
}

/// Mass of the unnormalized branch kernel over [a, b]; b may be +infinity.
inline double branch_mass(const Params& p, Branch branch, double a, double b,
                          double rel_tol = 1e-10) {
  const QuadResult r = scaled_kernel_mass(kernel_of(p, branch), a, b, 0.0, rel_tol);
  if (!r.converged) throw quadrature_error("branch mass did not converge", r.relative_error());
  return r.value;
}

}  // namespace yakovenko

#endif  // YAKOVENKO_QUADRATURE_HPP
