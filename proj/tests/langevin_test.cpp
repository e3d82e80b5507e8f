#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "yakovenko/langevin.hpp"
#include "yakovenko/reference.hpp"

namespace yakovenko {
namespace {

SimConfig small_config() {
  SimConfig c = sim_config_for(reference::year("2010"), 10'000, 1e-3, 200, 42);
  c.record_stride = 50;
  return c;
}

TEST(SimConfig, Validation) {
  SimConfig c = small_config();
  EXPECT_NO_THROW(validate(c));
  c.dt = 0.05;  // |a| = 2.153
  EXPECT_THROW(validate(c), config_error);
  c = small_config();
  c.dt = 0.0;
  EXPECT_THROW(validate(c), config_error);
  c = small_config();
  c.n_agents = 0;
  EXPECT_THROW(validate(c), config_error);
  c = small_config();
  c.coeffs.b = -1.0;
  EXPECT_THROW(validate(c), config_error);
  c = small_config();
  c.record_stride = 0;
  EXPECT_THROW(simulate_ensemble(c), config_error);
}

TEST(Simulate, ZeroStepsReturnsInitialCondition) {
  SimConfig c = small_config();
  c.n_steps = 0;
  const auto snaps = simulate_ensemble(c);
  ASSERT_EQ(snaps.size(), 1u);
  EXPECT_EQ(snaps[0].time, 0.0);
  const double t = reference::year("2010").t_low;
  ASSERT_EQ(snaps[0].incomes.size(), c.n_agents);
  for (double m : snaps[0].incomes) EXPECT_NEAR(m, t, 1e-9 * t);
}

TEST(Simulate, SnapshotsConserveAgentsAndStayNonNegative) {
  SimConfig c = small_config();
  c.n_steps = 230;  // not a multiple of the stride
  const auto snaps = simulate_ensemble(c);
  ASSERT_EQ(snaps.size(), 6u);
  EXPECT_DOUBLE_EQ(snaps.back().time, 0.23);
  EXPECT_DOUBLE_EQ(snaps[1].time, 0.05);
  for (const auto& s : snaps) {
    EXPECT_EQ(s.incomes.size(), c.n_agents);
    EXPECT_TRUE(std::all_of(s.incomes.begin(), s.incomes.end(), [](double m) { return m >= 0.0; }));
  }
}

TEST(Simulate, ReproducibleAcrossThreadsAndStrides) {
  SimConfig a = small_config();
  const auto ref = simulate_ensemble(a);
  EXPECT_EQ(simulate_ensemble(a).back().incomes, ref.back().incomes);
  SimConfig b = a;
  b.threads = 3;
  b.record_stride = 7;
  EXPECT_EQ(simulate_ensemble(b).back().incomes, ref.back().incomes);
  SimConfig other = a;
  other.seed = 43;
  EXPECT_NE(simulate_ensemble(other).back().incomes, ref.back().incomes);
}

TEST(Simulate, BlowupReportsStep) {
  // Above m1 the step is m -> 1.099 m - 1, which overflows at step 7 from 1e308.
  SimConfig c;
  c.coeffs = {1.0, 0.0, 1.0, -0.099, 1e-300, 0.0, 0.0};
  c.m1 = 1.0;
  c.n_agents = 5;
  c.dt = 1.0;
  c.n_steps = 20;
  c.initial_income = 1e308;
  try {
    simulate_ensemble(c);
    FAIL() << "expected numerical_blowup";
  } catch (const numerical_blowup& e) {
    EXPECT_EQ(e.step(), 7u);
  }
}

TEST(Ks, OneSampleBasics) {
  const NormalizedModel model(reference::year("2010"));
  const double median = model.quantile(0.5);
  const std::vector<double> one{median};
  EXPECT_NEAR(ks_distance(one, model), 0.5, 1e-9);
  EXPECT_THROW(ks_distance(std::vector<double>{}, model), domain_error);

  std::vector<double> s = model.sample(100'000, 77);
  const double d = ks_distance(s, model);
  EXPECT_LT(d, 1.63 / std::sqrt(1e5));
  EXPECT_GE(d, 0.0);
  std::mt19937_64 gen(1);
  std::shuffle(s.begin(), s.end(), gen);
  EXPECT_EQ(ks_distance(s, model), d);
}

TEST(Ks, TiesAndCallableCdf) {
  // Uniform(0,1) against {0.5, 0.5}: empirical jumps 0 -> 1 at 0.5.
  const std::vector<double> s{0.5, 0.5};
  EXPECT_DOUBLE_EQ(ks_distance(s, [](double x) { return x; }), 0.5);
  const std::vector<double> u{0.1, 0.2, 0.9};
  // max(1/3 - 0.1, 2/3 - 0.2, 1 - 0.9, 0.1 - 0, 0.2 - 1/3, 0.9 - 2/3)
  EXPECT_DOUBLE_EQ(ks_distance(u, [](double x) { return x; }), 2.0 / 3.0 - 0.2);
}

TEST(Ks, TwoSample) {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{5, 6};
  EXPECT_EQ(two_sample_ks(a, a), 0.0);
  EXPECT_EQ(two_sample_ks(a, b), 1.0);
  const std::vector<double> c{2.5, 10};
  EXPECT_DOUBLE_EQ(two_sample_ks(a, c), 0.5);
  EXPECT_EQ(two_sample_ks(a, c), two_sample_ks(c, a));
  EXPECT_THROW(two_sample_ks(a, std::vector<double>{}), domain_error);
}

TEST(Stationarity, FirstMatchingPair) {
  std::vector<EnsembleSnapshot> snaps;
  for (int k = 0; k <= 8; ++k) snaps.push_back({0.5 * k, std::vector<double>(100, k < 4 ? k : 4)});
  // t=0.5 vs t=1 differ, t=1 vs 2 differ, t=1.5 vs 3 differ, t=2 vs 4 equal.
  const auto k = detect_stationarity(snaps);
  ASSERT_TRUE(k.has_value());
  EXPECT_EQ(*k, 4u);
  snaps.resize(7);
  EXPECT_FALSE(detect_stationarity(snaps).has_value());
}

TEST(Csv, OneRowPerAgentPerSnapshot) {
  const std::vector<EnsembleSnapshot> snaps{{0.0, {1.5, 2.0}}, {0.25, {3.0, 1e9}}};
  std::ostringstream out;
  write_snapshots_csv(out, snaps);
  EXPECT_EQ(out.str(), "time,income\n0,1.5\n0,2\n0.25,3\n0.25,1e+09\n");
}

// The drift has no threshold, so the equilibrium is the single-branch model.
TEST(Equilibrium, SingleBranchEnsembleMatchesModel) {
  const Params p{38'000, 38'000, 135'000, 450'000, 3.153, 3.153};
  SimConfig c = sim_config_for(p, 100'000, 2.5e-4, 8'000, 11);
  ASSERT_EQ(c.coeffs.a_low, c.coeffs.a_high);
  ASSERT_EQ(c.coeffs.a0_low, c.coeffs.a0_high);
  c.record_stride = 1'000;
  const auto snaps = simulate_ensemble(c);
  const auto k = detect_stationarity(snaps);
  ASSERT_TRUE(k.has_value());
  EXPECT_LT(ks_distance(snaps.back().incomes, NormalizedModel(p)), 0.01);
}

// b = 0, a = a' = 0: constant drift A0 and diffusion B0 give exp(-m A0 / B0).
TEST(Equilibrium, AdditiveOnlyIsExponential) {
  SimConfig c;
  c.coeffs = {2.0, 0.0, 2.0, 0.0, 2.0, 0.0, 0.0};  // T = B0 / A0 = 1
  c.m1 = 1e9;
  c.n_agents = 20'000;
  c.dt = 1e-3;
  c.n_steps = 10'000;
  c.record_stride = 1'000;
  c.initial_income = 1.0;
  const auto snaps = simulate_ensemble(c);
  ASSERT_TRUE(detect_stationarity(snaps, 0.02).has_value());
  const auto& m = snaps.back().incomes;
  // Memoryless tail: mean excess over any level equals T.
  double excess = 0.0;
  std::size_t over = 0;
  for (double x : m) {
    if (x > 2.0) {
      excess += x - 2.0;
      ++over;
    }
  }
  ASSERT_GT(over, 1'000u);
  EXPECT_NEAR(excess / over, 1.0, 0.06);
  EXPECT_NEAR(std::accumulate(m.begin(), m.end(), 0.0) / m.size(), 1.0, 0.03);
  EXPECT_LT(ks_distance(m, [](double x) { return 1.0 - std::exp(-x); }), 0.02);
}

}  // namespace
}  // namespace yakovenko
