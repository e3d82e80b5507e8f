#ifndef YAKOVENKO_PARAMS_HPP
#define YAKOVENKO_PARAMS_HPP

#include <cmath>
#include <string>

#include "json.hpp"
#include "yakovenko/errors.hpp"

namespace yakovenko {

/// Effective parameters of the two-branch equilibrium income density.
///
/// Monetary fields are in EUR. Below `m1` the density is governed by
/// (`t_low`, `alpha`), at and above `m1` by (`t_high`, `alpha1`); `m0` is the
/// crossover scale of the quadratic diffusion and is shared by both branches.
struct Params {
  double t_low = 0.0;   // income temperature T
  double t_high = 0.0;  // income temperature T1
  double m0 = 0.0;      // low/medium crossover
  double m1 = 0.0;      // medium/high crossover (drift threshold)
  double alpha = 0.0;   // medium-class exponent
  double alpha1 = 0.0;  // high-class exponent

  friend bool operator==(const Params&, const Params&) = default;
};

/// Drift and diffusion coefficients of the underlying Fokker-Planck equation:
/// A(m) = a0_low + a_low*m below the threshold, a0_high + a_high*m above it,
/// B(m) = b0 + b*m^2.
struct FpCoefficients {
  double a0_low = 0.0;
  double a_low = 0.0;
  double a0_high = 0.0;
  double a_high = 0.0;
  double b0 = 0.0;
  double b = 0.0;
  double m_init = 0.0;  // lowest income; absorbed into the normalization

  friend bool operator==(const FpCoefficients&, const FpCoefficients&) = default;
};

// Throws invalid_params, or non_normalizable when alpha1 <= 0.
inline void validate(const Params& p) {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!std::isfinite(p.alpha1) || p.alpha1 <= 0.0) {
    throw non_normalizable("alpha1 must be > 0 for a normalizable upper branch");
  }
  if (!positive(p.t_low) || !positive(p.t_high)) {
    throw invalid_params("income temperatures must be finite and > 0");
  }
  if (!positive(p.m0) || !positive(p.m1)) {
    throw invalid_params("crossover incomes m0, m1 must be finite and > 0");
  }
  if (!positive(p.alpha)) {
    throw invalid_params("alpha must be finite and > 0");
  }
}

inline bool is_valid(const Params& p) noexcept {
  try {
    validate(p);
    return true;
  } catch (const error&) {
    return false;
  }
}

inline Params from_fp_coefficients(const FpCoefficients& c, double m1) {
  if (!(c.b > 0.0) || !(c.b0 > 0.0) || !std::isfinite(c.b) || !std::isfinite(c.b0)) {
    throw invalid_coefficients("diffusion coefficients b and B0 must be finite and > 0");
  }
  if (!(c.a0_low > 0.0) || !(c.a0_high > 0.0)) {
    throw invalid_coefficients("additive drifts A0 and A0' must be > 0 (positive temperatures)");
  }
  if (!std::isfinite(c.a_low) || !std::isfinite(c.a_high)) {
    throw invalid_coefficients("multiplicative drifts a and a' must be finite");
  }
  if (!(m1 > 0.0) || !std::isfinite(m1)) {
    throw invalid_coefficients("threshold m1 must be finite and > 0");
  }
  Params p;
  p.alpha = 1.0 + c.a_low / c.b;
  p.alpha1 = 1.0 + c.a_high / c.b;
  p.t_low = c.b0 / c.a0_low;
  p.t_high = c.b0 / c.a0_high;
  p.m0 = std::sqrt(c.b0 / c.b);
  p.m1 = m1;
  return p;
}

// One of the coefficient sets realizing `p`; `b` fixes the time unit.
inline FpCoefficients to_fp_coefficients(const Params& p, double b = 1.0) {
  if (!(b > 0.0)) throw invalid_coefficients("b must be > 0");
  FpCoefficients c;
  c.b = b;
  c.b0 = p.m0 * p.m0 * b;
  c.a_low = (p.alpha - 1.0) * b;
  c.a_high = (p.alpha1 - 1.0) * b;
  c.a0_low = c.b0 / p.t_low;
  c.a0_high = c.b0 / p.t_high;
  return c;
}

inline void to_json(nlohmann::json& j, const Params& p) {
  j = nlohmann::json{{"T", p.t_low},  {"T1", p.t_high},   {"m0", p.m0},
                     {"m1", p.m1},    {"alpha", p.alpha}, {"alpha1", p.alpha1}};
}

inline void from_json(const nlohmann::json& j, Params& p) {
  if (!j.is_object()) throw format_error("params must be a JSON object");
  auto get = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_number()) {
      throw format_error(std::string("params JSON lacks numeric key '") + key + "'");
    }
    return j.at(key).get<double>();
  };
  p.t_low = get("T");
  p.t_high = get("T1");
  p.m0 = get("m0");
  p.m1 = get("m1");
  p.alpha = get("alpha");
  p.alpha1 = get("alpha1");
}

inline void to_json(nlohmann::json& j, const FpCoefficients& c) {
  j = nlohmann::json{{"A0", c.a0_low}, {"a", c.a_low}, {"A0_prime", c.a0_high},
                     {"a_prime", c.a_high}, {"B0", c.b0}, {"b", c.b}, {"m_init", c.m_init}};
}

inline void from_json(const nlohmann::json& j, FpCoefficients& c) {
  if (!j.is_object()) throw format_error("coefficients must be a JSON object");
  auto get = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_number()) {
      throw format_error(std::string("coefficients JSON lacks numeric key '") + key + "'");
    }
    return j.at(key).get<double>();
  };
  c.a0_low = get("A0");
  c.a_low = get("a");
  c.a0_high = get("A0_prime");
  c.a_high = get("a_prime");
  c.b0 = get("B0");
  c.b = get("b");
  c.m_init = j.value("m_init", 0.0);
}

}  // namespace yakovenko

#endif  // YAKOVENKO_PARAMS_HPP
