#include <algorithm>
#include <random>
#include <sstream>
#include <vector>

#include "gtest/gtest.h"
#include "yakovenko/data.hpp"

namespace yakovenko {
namespace {

LoadedIncomes load(const std::string& text, IncomeFormat fmt = {}) {
  std::istringstream in(text);
  return load_incomes(in, fmt);
}

TEST(LoadIncomes, SortsAndDefaultsWeights) {
  const auto r = load("income\n10\n30\n20\n");
  EXPECT_EQ(r.dataset.values, (std::vector<double>{10, 20, 30}));
  EXPECT_EQ(r.dataset.weights, (std::vector<double>{1, 1, 1}));
  EXPECT_TRUE(r.rejected.empty());
}

TEST(LoadIncomes, ReadsWeightColumn) {
  const auto r = load("income,weight\n10,2\n");
  EXPECT_EQ(r.dataset.weights, (std::vector<double>{2}));
}

TEST(LoadIncomes, RejectsNegativeRowWithRowNumber) {
  const auto r = load("income\n-5\n10\n");
  ASSERT_EQ(r.dataset.size(), 1u);
  ASSERT_EQ(r.rejected.size(), 1u);
  EXPECT_EQ(r.rejected[0].row, 2u);
}

TEST(LoadIncomes, RejectsGarbageAndNonFinite) {
  const auto r = load("id,income\na,12.5\nb,abc\nc,inf\nd,nan\ne,\nf,1e3\n");
  EXPECT_EQ(r.dataset.values, (std::vector<double>{12.5, 1000}));
  ASSERT_EQ(r.rejected.size(), 4u);
  EXPECT_EQ(r.rejected[0].row, 3u);
  EXPECT_EQ(r.rejected[3].row, 6u);
}

TEST(LoadIncomes, NamedColumnsAndQuotes) {
  IncomeFormat fmt;
  fmt.income_column = "hy010";
  fmt.weight_column = "db090";
  fmt.label = "2010";
  const auto r = load("\"hy010\",db090,note\n\"25000\",1.5,\"a, b\"\n", fmt);
  EXPECT_EQ(r.dataset.values, (std::vector<double>{25000}));
  EXPECT_EQ(r.dataset.weights, (std::vector<double>{1.5}));
  EXPECT_EQ(r.dataset.label, "2010");
}

TEST(LoadIncomes, Errors) {
  EXPECT_THROW(load("salary\n10\n"), format_error);
  EXPECT_THROW(load(""), format_error);
  IncomeFormat fmt;
  fmt.weight_column = "w";
  EXPECT_THROW(load("income\n10\n", fmt), format_error);
  EXPECT_THROW(load("income\n"), empty_dataset);
  EXPECT_THROW(load("income\n-1\nx\n"), empty_dataset);
  EXPECT_THROW(load("income,weight\n10,0\n"), empty_dataset);
}

TEST(Billionaires, LoadAndEffectiveIncome) {
  std::istringstream in("name,wealth_usd\nA,1e9\nB,-3\nC,2e9\n");
  const auto loaded = load_billionaires(in);
  ASSERT_EQ(loaded.records.size(), 2u);
  EXPECT_EQ(loaded.rejected.size(), 1u);
  EXPECT_NE(loaded.records[0].name_hash, loaded.records[1].name_hash);
  const auto income = billionaire_effective_income(loaded.records, 0.9, 0.05);
  ASSERT_EQ(income.size(), 2u);
  EXPECT_DOUBLE_EQ(income[0], 4.5e7);
  EXPECT_DOUBLE_EQ(income[1], 9e7);
}

TEST(Billionaires, EdgeCases) {
  EXPECT_TRUE(billionaire_effective_income({}, 0.9, 0.05).empty());
  const std::vector<BillionaireRecord> one{{1e9, 1}};
  EXPECT_THROW(billionaire_effective_income(one, 0.9, 0.0), config_error);
  EXPECT_THROW(billionaire_effective_income(one, 0.0, 0.05), config_error);
  EXPECT_THROW(billionaire_effective_income(one, -1.0, 0.05), config_error);
  std::istringstream in("name\nA\n");
  EXPECT_THROW(load_billionaires(in), format_error);
}

TEST(Merge, ConcatenatesAndSorts) {
  const Dataset survey = make_dataset({20, 10}, {}, "2010");
  const std::vector<double> top{100};
  const Dataset merged = merge_datasets(survey, top, 1.0);
  EXPECT_EQ(merged.values, (std::vector<double>{10, 20, 100}));
  EXPECT_NE(merged.label.find("2010"), std::string::npos);
  EXPECT_NE(merged.label, "2010");
  const auto ccdf = empirical_ccdf(merged);
  ASSERT_EQ(ccdf.size(), 3u);
  EXPECT_EQ(ccdf.points[0].p, 0.75);
  EXPECT_EQ(ccdf.points[1].p, 0.5);
  EXPECT_EQ(ccdf.points[2].p, 0.25);
}

TEST(Merge, EmptyTopIsIdentityAndWeightChecked) {
  const Dataset survey = make_dataset({3, 1, 2}, {1, 2, 3}, "x");
  const Dataset same = merge_datasets(survey, {}, 5.0);
  EXPECT_EQ(same.values, survey.values);
  EXPECT_EQ(same.weights, survey.weights);
  EXPECT_EQ(same.label, survey.label);
  const std::vector<double> top{10};
  EXPECT_THROW(merge_datasets(survey, top, 0.0), config_error);
  EXPECT_THROW(merge_datasets(survey, top, -1.0), config_error);
}

TEST(EmpiricalCcdf, WeibullPositions) {
  const auto c = empirical_ccdf(make_dataset({30, 10, 20}));
  const std::vector<CcdfPoint> want{{10, 0.75}, {20, 0.5}, {30, 0.25}};
  EXPECT_EQ(c.points, want);
  const auto single = empirical_ccdf(make_dataset({42}));
  EXPECT_EQ(single.points, (std::vector<CcdfPoint>{{42, 0.5}}));
  EXPECT_THROW(empirical_ccdf(Dataset{}), domain_error);
}

TEST(EmpiricalCcdf, DuplicatesKeepSmallestPosition) {
  const auto c = empirical_ccdf(make_dataset({5, 5, 5, 7}));
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.points[0].m, 5.0);
  EXPECT_DOUBLE_EQ(c.points[0].p, 1.0 - 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(c.points[1].p, 1.0 - 4.0 / 5.0);
}

TEST(EmpiricalCcdf, WeightedFormula) {
  // W = 6, mean 2: p = 1 - W_i / 8.
  const auto c = empirical_ccdf(make_dataset({1, 2, 3}, {1, 2, 3}));
  ASSERT_EQ(c.size(), 3u);
  EXPECT_DOUBLE_EQ(c.points[0].p, 7.0 / 8.0);
  EXPECT_DOUBLE_EQ(c.points[1].p, 5.0 / 8.0);
  EXPECT_DOUBLE_EQ(c.points[2].p, 2.0 / 8.0);
}

TEST(EmpiricalCcdf, ZeroWeightRowsCarryNoMass) {
  const auto c = empirical_ccdf(make_dataset({1, 2, 3}, {1, 0, 1}));
  EXPECT_EQ(c.points, (std::vector<CcdfPoint>{{1, 2.0 / 3.0}, {3, 1.0 / 3.0}}));
}

// Properties over random weighted samples.
class CcdfProperties : public ::testing::TestWithParam<int> {};

TEST_P(CcdfProperties, Invariants) {
  std::mt19937_64 gen(static_cast<unsigned>(GetParam()));
  std::uniform_int_distribution<int> size_dist(1, 400);
  std::lognormal_distribution<double> income(10.0, 1.0);
  std::uniform_int_distribution<int> coarse(0, 50);
  std::uniform_real_distribution<double> wdist(0.1, 5.0);

  const int n = size_dist(gen);
  std::vector<double> values(n);
  std::vector<double> weights(n);
  // Coarse rounding forces ties.
  for (int i = 0; i < n; ++i) {
    values[i] = GetParam() % 2 ? static_cast<double>(coarse(gen)) : income(gen);
    weights[i] = wdist(gen);
  }
  const double c = wdist(gen);
  const auto weighted = empirical_ccdf(make_dataset(values, weights));
  const auto unit = empirical_ccdf(make_dataset(values));
  const auto scaled = empirical_ccdf(make_dataset(values, std::vector<double>(n, c)));

  EXPECT_EQ(unit.points, scaled.points);
  for (const auto* cc : {&weighted, &unit}) {
    for (std::size_t i = 0; i < cc->size(); ++i) {
      EXPECT_GT(cc->points[i].p, 0.0);
      EXPECT_LT(cc->points[i].p, 1.0);
      if (i > 0) {
        EXPECT_GT(cc->points[i].m, cc->points[i - 1].m);
        EXPECT_LT(cc->points[i].p, cc->points[i - 1].p);
      }
    }
  }

  // Ties: the surviving point carries the rank of the last duplicate.
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& pt : unit.points) {
    const auto last = std::upper_bound(sorted.begin(), sorted.end(), pt.m) - sorted.begin();
    EXPECT_EQ(pt.p, (n - static_cast<double>(last) + 1.0) / (n + 1.0));
  }

  // Top incomes above the survey raise (never lower) p at existing values.
  const std::vector<double> top{sorted.back() * 2.0 + 1.0, sorted.back() * 7.0 + 1.0};
  const Dataset survey = make_dataset(values, weights);
  const auto merged = empirical_ccdf(merge_datasets(survey, top, wdist(gen)));
  for (const auto& pt : weighted.points) {
    const auto it = std::find_if(merged.points.begin(), merged.points.end(),
                                 [&](const CcdfPoint& q) { return q.m == pt.m; });
    ASSERT_NE(it, merged.points.end());
    EXPECT_GE(it->p, pt.p);
  }
}

INSTANTIATE_TEST_SUITE_P(Random, CcdfProperties, ::testing::Range(1, 41));

TEST(MakeDataset, Invariants) {
  EXPECT_THROW(make_dataset({1, -2}), domain_error);
  EXPECT_THROW(make_dataset({1, std::numeric_limits<double>::quiet_NaN()}), domain_error);
  EXPECT_THROW(make_dataset({1, 2}, {1}), domain_error);
  EXPECT_THROW(make_dataset({1, 2}, {0, 0}), domain_error);
  EXPECT_THROW(make_dataset({1, 2}, {1, -1}), domain_error);
  const Dataset d = make_dataset({3, 1, 3, 2}, {1, 2, 3, 4});
  EXPECT_EQ(d.values, (std::vector<double>{1, 2, 3, 3}));
  EXPECT_EQ(d.weights, (std::vector<double>{2, 4, 1, 3}));
}

}  // namespace
}  // namespace yakovenko
