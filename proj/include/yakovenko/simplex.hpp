#ifndef YAKOVENKO_SIMPLEX_HPP
#define YAKOVENKO_SIMPLEX_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "yakovenko/errors.hpp"

namespace yakovenko {

struct SimplexOptions {
  std::vector<double> lower;  // box, same length as x0 (empty: unbounded)
  std::vector<double> upper;
  double initial_step = 0.1;
  double x_tol = 1e-6;  // converged when every vertex is within x_tol of the best (max norm)
  std::size_t max_evaluations = 4000;
};

struct SimplexResult {
  std::vector<double> x;
  double fx = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

/// Nelder-Mead minimisation with standard coefficients (1, 2, 1/2, 1/2).
///
/// Trial points are projected onto the box before evaluation, so `f` is
/// never called outside it. NaN from `f` is treated as +infinity.
template <class F>
SimplexResult nelder_mead(F&& f, std::vector<double> x0, const SimplexOptions& opt) {
  const std::size_t n = x0.size();
  if (n == 0) throw domain_error("nelder_mead needs at least one coordinate");
  const bool boxed = !opt.lower.empty();
  if (boxed && (opt.lower.size() != n || opt.upper.size() != n)) {
    throw domain_error("nelder_mead bounds must match the dimension");
  }

  auto clamp = [&](std::vector<double>& x) {
    if (!boxed) return;
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], opt.lower[i], opt.upper[i]);
  };
  SimplexResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  clamp(x0);
  std::vector<std::vector<double>> pts(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i + 1][i] += opt.initial_step;
    // step inward if the box would flatten this vertex onto x0
    if (boxed && pts[i + 1][i] > opt.upper[i]) pts[i + 1][i] = x0[i] - opt.initial_step;
    clamp(pts[i + 1]);
  }
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(pts[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  auto diameter = [&](std::size_t best) {
    double d = 0.0;
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t k = 0; k < n; ++k) d = std::max(d, std::abs(pts[i][k] - pts[best][k]));
    return d;
  };

  for (;;) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    // stable: ties resolved by vertex index, keeps runs reproducible
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[n - 1];

    if (diameter(best) < opt.x_tol) {
      res.converged = std::isfinite(fv[best]);
      break;
    }
    if (res.evaluations >= opt.max_evaluations) break;
    ++res.iterations;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[i][k];
    }
    for (double& c : centroid) c /= static_cast<double>(n);

    auto along = [&](double t, std::vector<double>& out) {
      for (std::size_t k = 0; k < n; ++k) out[k] = centroid[k] + t * (pts[worst][k] - centroid[k]);
      clamp(out);
    };

    along(-1.0, trial);
    const double fr = eval(trial);
    if (fr < fv[best]) {
      along(-2.0, trial2);
      const double fe = eval(trial2);
      if (fe < fr) {
        pts[worst] = trial2;
        fv[worst] = fe;
      } else {
        pts[worst] = trial;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      pts[worst] = trial;
      fv[worst] = fr;
      continue;
    }
    // contraction, outside or inside
    const bool outside = fr < fv[worst];
    along(outside ? -0.5 : 0.5, trial2);
    const double fc = eval(trial2);
    if (fc < (outside ? fr : fv[worst])) {
      pts[worst] = trial2;
      fv[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t k = 0; k < n; ++k) pts[i][k] = pts[best][k] + 0.5 * (pts[i][k] - pts[best][k]);
      fv[i] = eval(pts[i]);
    }
  }

  const std::size_t best =
      static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  res.x = pts[best];
  res.fx = fv[best];
  return res;
}

}  // namespace yakovenko

#endif  // YAKOVENKO_SIMPLEX_HPP
