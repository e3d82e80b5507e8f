#ifndef YAKOVENKO_LANGEVIN_HPP
#define YAKOVENKO_LANGEVIN_HPP

#include <algorithm>
#include <charconv>
#include <concepts>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <thread>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "yakovenko/errors.hpp"
#include "yakovenko/model.hpp"
#include "yakovenko/params.hpp"
#include "yakovenko/random.hpp"

namespace yakovenko {

struct SimConfig {
  FpCoefficients coeffs;
  double m1 = 0.0;  // drift switches from (A0, a) to (A0', a') here
  std::size_t n_agents = 0;
  double dt = 0.0;
  std::size_t n_steps = 0;
  std::uint64_t seed = 1;
  std::size_t record_stride = 1;
  std::optional<double> initial_income;  // unset: T = B0 / A0
  unsigned threads = 1;                  // does not change results
};

struct EnsembleSnapshot {
  double time = 0.0;
  std::vector<double> incomes;
};

inline void validate(const SimConfig& c) {
  const FpCoefficients& k = c.coeffs;
  for (double v : {k.a0_low, k.a_low, k.a0_high, k.a_high, k.b0, k.b}) {
    if (!std::isfinite(v)) throw config_error("coefficients must be finite");
  }
  if (k.b0 < 0.0 || k.b < 0.0) throw config_error("diffusion coefficients must be >= 0");
  if (!(c.m1 > 0.0) || !std::isfinite(c.m1)) throw config_error("m1 must be finite and > 0");
  if (c.n_agents < 1) throw config_error("n_agents must be >= 1");
  if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw config_error("dt must be finite and > 0");
  if (c.record_stride < 1) throw config_error("record_stride must be >= 1");
  const double rate = std::max({std::abs(k.a_low), std::abs(k.a_high), k.b});
  if (!(c.dt * rate < 0.1)) throw config_error("dt * max(|a|, |a'|, b) must be < 0.1");
  if (c.initial_income && (!(*c.initial_income >= 0.0) || !std::isfinite(*c.initial_income))) {
    throw config_error("initial income must be finite and >= 0");
  }
  if (!c.initial_income && !(k.a0_low > 0.0 && k.b0 > 0.0)) {
    throw config_error("default initial income B0/A0 needs A0 > 0 and B0 > 0");
  }
  if (c.threads < 1) throw config_error("threads must be >= 1");
}

// Coefficients with b = 1 realising `p`; one snapshot at the end.
inline SimConfig sim_config_for(const Params& p, std::size_t n_agents, double dt, std::size_t n_steps,
                                std::uint64_t seed = 1) {
  SimConfig c;
  c.coeffs = to_fp_coefficients(p, 1.0);
  c.m1 = p.m1;
  c.n_agents = n_agents;
  c.dt = dt;
  c.n_steps = n_steps;
  c.seed = seed;
  c.record_stride = std::max<std::size_t>(n_steps, 1);
  return c;
}

/// Euler-Maruyama (Ito) ensemble for dm = -A(m) dt + sqrt(2 B(m)) dW with a
/// reflecting wall at 0 (m <- |m|).
///
/// Agents are split into fixed blocks of `block_size`, each with its own
/// random stream, so trajectories do not depend on the thread count or on
/// how stepping is chunked.
class Ensemble {
 public:
  static constexpr std::size_t block_size = 4096;

  explicit Ensemble(const SimConfig& cfg) : cfg_(cfg) {
    validate(cfg_);
    const double start = cfg_.initial_income.value_or(cfg_.coeffs.b0 / cfg_.coeffs.a0_low);
    m_.assign(cfg_.n_agents, start);
    const std::size_t blocks = (cfg_.n_agents + block_size - 1) / block_size;
    engines_.reserve(blocks);
    for (std::size_t b = 0; b < blocks; ++b) engines_.push_back(make_engine(cfg_.seed, streams::langevin + b));
  }

  double time() const noexcept { return static_cast<double>(steps_) * cfg_.dt; }
  std::size_t steps_taken() const noexcept { return steps_; }
  std::span<const double> incomes() const noexcept { return m_; }
  EnsembleSnapshot snapshot() const { return {time(), m_}; }

  // Throws numerical_blowup naming the first step (1-based) that produced a
  // non-finite income.
  void advance(std::size_t n) {
    if (n == 0) return;
    const std::size_t blocks = engines_.size();
    std::vector<std::size_t> bad(blocks, 0);
    auto work = [&](std::size_t first, std::size_t last) {
      for (std::size_t b = first; b < last; ++b) bad[b] = advance_block(b, n);
    };
    const unsigned t = std::min<std::size_t>(cfg_.threads, blocks);
    if (t <= 1) {
      work(0, blocks);
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errs(t);
      for (unsigned i = 0; i < t; ++i) {
        pool.emplace_back([&, i] {
          try {
            work(blocks * i / t, blocks * (i + 1) / t);
          } catch (...) {
            errs[i] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (auto& e : errs) {
        if (e) std::rethrow_exception(e);
      }
    }
    std::size_t first_bad = 0;
    for (std::size_t s : bad) {
      if (s != 0 && (first_bad == 0 || s < first_bad)) first_bad = s;
    }
    if (first_bad != 0) throw numerical_blowup("non-finite income", steps_ + first_bad);
    steps_ += n;
  }

 private:
  // Returns 0, or the step within this call at which a value went non-finite.
  std::size_t advance_block(std::size_t b, std::size_t n) {
    const FpCoefficients& k = cfg_.coeffs;
    const double dt = cfg_.dt;
    const double m1 = cfg_.m1;
    const double sdt = std::sqrt(2.0 * dt);
    Engine& g = engines_[b];
    boost::random::normal_distribution<double> gauss;
    const std::size_t lo = b * block_size;
    const std::size_t hi = std::min(m_.size(), lo + block_size);
    for (std::size_t s = 1; s <= n; ++s) {
      bool finite = true;
      for (std::size_t i = lo; i < hi; ++i) {
        const double m = m_[i];
        const double drift = m < m1 ? k.a0_low + k.a_low * m : k.a0_high + k.a_high * m;
        const double diff = k.b0 + k.b * m * m;
        const double next = std::abs(m - drift * dt + sdt * std::sqrt(diff) * gauss(g));
        finite &= std::isfinite(next);
        m_[i] = next;
      }
      if (!finite) return s;
    }
    return 0;
  }

  SimConfig cfg_;
  std::vector<double> m_;
  std::vector<Engine> engines_;
  std::size_t steps_ = 0;
};

/// Snapshots at step 0 and every record_stride steps, plus the final step
/// when n_steps is not a multiple of the stride.
inline std::vector<EnsembleSnapshot> simulate_ensemble(const SimConfig& cfg) {
  Ensemble ens(cfg);
  std::vector<EnsembleSnapshot> out;
  out.push_back(ens.snapshot());
  while (ens.steps_taken() < cfg.n_steps) {
    ens.advance(std::min(cfg.record_stride, cfg.n_steps - ens.steps_taken()));
    out.push_back(ens.snapshot());
  }
  return out;
}

/// Kolmogorov-Smirnov distance between the sample's empirical CDF and `cdf`.
template <class Cdf>
  requires std::invocable<Cdf&, double>
double ks_distance(std::span<const double> sample, Cdf&& cdf) {
  if (sample.empty()) throw domain_error("ks_distance of an empty sample");
  std::vector<double> xs(sample.begin(), sample.end());
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size();) {
    std::size_t j = i;
    while (j + 1 < xs.size() && xs[j + 1] == xs[i]) ++j;
    const double f = cdf(xs[i]);
    d = std::max({d, static_cast<double>(j + 1) / n - f, f - static_cast<double>(i) / n});
    i = j + 1;
  }
  return d;
}

inline double ks_distance(std::span<const double> sample, const NormalizedModel& model) {
  if (sample.empty()) throw domain_error("ks_distance of an empty sample");
  std::vector<double> xs(sample.begin(), sample.end());
  std::sort(xs.begin(), xs.end());
  const std::vector<double> tail = model.ccdf_sorted(xs);
  std::size_t k = 0;
  return ks_distance(xs, [&](double x) {
    while (xs[k] != x) ++k;  // called in ascending order
    return 1.0 - tail[k];
  });
}

/// Two-sample KS statistic.
inline double two_sample_ks(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw domain_error("two_sample_ks needs two non-empty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return d;
}

inline constexpr double stationarity_threshold = 0.005;

/// First snapshot index k > 0 such that a snapshot at twice its time exists
/// and the two are within `threshold` in two-sample KS distance; the
/// ensemble counts as stationary from that later snapshot on.
inline std::optional<std::size_t> detect_stationarity(const std::vector<EnsembleSnapshot>& snaps,
                                                      double threshold = stationarity_threshold) {
  for (std::size_t k = 1; k < snaps.size(); ++k) {
    const double target = 2.0 * snaps[k].time;
    const auto it = std::find_if(snaps.begin() + static_cast<std::ptrdiff_t>(k), snaps.end(),
                                 [&](const EnsembleSnapshot& s) { return std::abs(s.time - target) <= 1e-9 * target; });
    if (it == snaps.end()) break;  // later k need later snapshots still
    if (two_sample_ks(snaps[k].incomes, it->incomes) < threshold) return k;
  }
  return std::nullopt;
}

/// CSV with header "time,income", one row per agent per snapshot.
inline void write_snapshots_csv(std::ostream& out, const std::vector<EnsembleSnapshot>& snaps) {
  out << "time,income\n";
  char buf[64];
  for (const auto& s : snaps) {
    const auto t = std::to_chars(buf, buf + sizeof buf, s.time);
    *t.ptr = ',';
    const std::size_t prefix = static_cast<std::size_t>(t.ptr - buf) + 1;
    for (double m : s.incomes) {
      const auto r = std::to_chars(buf + prefix, buf + sizeof buf - 1, m);
      *r.ptr = '\n';
      out.write(buf, r.ptr - buf + 1);
    }
  }
}

}  // namespace yakovenko

#endif  // YAKOVENKO_LANGEVIN_HPP
