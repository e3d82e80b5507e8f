#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "json.hpp"
#include "yakovenko/cli.hpp"
#include "yakovenko/reference.hpp"

namespace yakovenko {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome yak(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> v;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> v;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) v.push_back(cell);
  if (!line.empty() && line.back() == ',') v.emplace_back();
  return v;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("yak_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    write_params("p2010.json", reference::year("2010"));
    write_params("p2009.json", reference::year("2009"));
    write_sample("s2010.csv", reference::year("2010"), 100'000, 2010);
    write_sample("s2009.csv", reference::year("2009"), 20'000, 9);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string path(const std::string& name) { return (dir_ / name).string(); }

  static void write(const std::string& name, const std::string& text) {
    std::ofstream(path(name), std::ios::binary) << text;
  }
  static void write_params(const std::string& name, const Params& p) { write(name, json(p).dump()); }
  static void write_sample(const std::string& name, const Params& p, std::size_t n, std::uint64_t seed) {
    std::ostringstream s;
    s << "income\n";
    for (double v : NormalizedModel(p).sample(n, seed)) s << cli::detail::num(v) << "\n";
    write(name, s.str());
  }

  static inline fs::path dir_;
};

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(yak({}).code, 2);
  EXPECT_EQ(yak({"frobnicate"}).code, 2);
  const Outcome r = yak({"fit", "--seed", "7"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--incomes"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(yak({"fit", "--incomes", path("s2010.csv"), "--bootstrap", "5"}).code, 2);
  EXPECT_EQ(yak({"--help"}).code, 0);
}

TEST_F(Cli, FitRoundTripFixture) {
  const Outcome r = yak({"fit", "--incomes", path("s2010.csv"), "--tie-t1-m1", "--seed", "7", "--bootstrap", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_TRUE(j.at("converged").get<bool>());
  EXPECT_LT(j.at("params").at("alpha1").get<double>(), 1.0);
  EXPECT_EQ(j.at("params").at("T1"), j.at("params").at("m1"));
  EXPECT_EQ(j.at("config").at("seed"), 7);
  EXPECT_TRUE(j.at("config").at("tie_t1_m1").get<bool>());
  EXPECT_EQ(j.at("input").at("observations"), 100'000);
  EXPECT_FALSE(j.at("crisis").at("flag").get<bool>());
}

TEST_F(Cli, FitIsByteIdenticalAndOutMatchesStdout) {
  const std::vector<std::string> args{"fit", "--incomes", path("s2009.csv"), "--seed", "3", "--bootstrap", "20"};
  const Outcome a = yak(args);
  const Outcome b = yak(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const json j = json::parse(a.out);
  EXPECT_GT(j.at("errors").at("alpha").get<double>(), 0.0);

  auto with_out = args;
  with_out.insert(with_out.end(), {"--out", path("fit.json")});
  const Outcome c = yak(with_out);
  ASSERT_EQ(c.code, 0);
  EXPECT_TRUE(c.out.empty());
  std::ifstream in(path("fit.json"), std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(in), {}), a.out);
}

TEST_F(Cli, ConfigOverridesFlags) {
  write("cfg.json", R"({"seed": 9, "bootstrap": 0, "restarts": 2})");
  const Outcome r = yak({"fit", "--incomes", path("s2009.csv"), "--seed", "3", "--config", path("cfg.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j.at("config").at("seed"), 9);
  EXPECT_EQ(j.at("config").at("restarts"), 2);

  write("cfg_in.json", R"({"incomes": ")" + path("s2009.csv") + R"(", "bootstrap": 0})");
  EXPECT_EQ(yak({"fit", "--config", path("cfg_in.json")}).code, 0);

  write("bad_key.json", R"({"sede": 9})");
  const Outcome bad = yak({"fit", "--incomes", path("s2009.csv"), "--config", path("bad_key.json")});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("sede"), std::string::npos);
  write("bad_type.json", R"({"seed": "nine"})");
  EXPECT_EQ(yak({"fit", "--incomes", path("s2009.csv"), "--config", path("bad_type.json")}).code, 2);
  EXPECT_EQ(yak({"fit", "--incomes", path("s2009.csv"), "--config", path("absent.json")}).code, 2);
}

TEST_F(Cli, NonConvergenceExitsThreeWithResult) {
  write("tight.json", R"({"max_evaluations": 10, "restarts": 1, "bootstrap": 0})");
  const Outcome r = yak({"fit", "--incomes", path("s2009.csv"), "--config", path("tight.json")});
  EXPECT_EQ(r.code, 3);
  const json j = json::parse(r.out);
  EXPECT_FALSE(j.at("converged").get<bool>());
}

TEST_F(Cli, InputDiagnosticsNamePathAndRow) {
  const Outcome missing = yak({"fit", "--incomes", path("nope.csv")});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find(path("nope.csv")), std::string::npos);

  write("bad.csv", "income\nabc\n-5\n");
  const Outcome bad = yak({"fit", "--incomes", path("bad.csv")});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find(path("bad.csv")), std::string::npos);
  EXPECT_NE(bad.err.find("row 2"), std::string::npos);

  write("nocol.csv", "wage\n1\n");
  const Outcome nocol = yak({"fit", "--incomes", path("nocol.csv")});
  EXPECT_EQ(nocol.code, 2);
  EXPECT_NE(nocol.err.find("income"), std::string::npos);

  // one bad row among good ones is skipped with a warning
  std::ifstream in(path("s2009.csv"));
  std::string text(std::istreambuf_iterator<char>(in), {});
  text.insert(text.find('\n') + 1, "oops\n");
  write("one_bad.csv", text);
  const Outcome warn = yak({"fit", "--incomes", path("one_bad.csv"), "--bootstrap", "0"});
  EXPECT_EQ(warn.code, 0);
  EXPECT_NE(warn.err.find(path("one_bad.csv") + ":2:"), std::string::npos);
  EXPECT_EQ(json::parse(warn.out).at("input").at("rejected_rows"), 1);
}

TEST_F(Cli, BillionaireMerge) {
  write("top.csv", "name,wealth_usd\nA,5e10\nB,2e10\nC,x\n");
  const std::vector<std::string> base{"fit", "--incomes", path("s2009.csv"), "--bootstrap", "0",
                                      "--billionaires", path("top.csv")};
  EXPECT_EQ(yak(base).code, 2);  // no exchange rate
  auto args = base;
  args.insert(args.end(), {"--usd-eur", "0.9", "--top-weight", "2"});
  const Outcome r = yak(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j.at("input").at("observations"), 20'002);
  EXPECT_EQ(j.at("input").at("top_incomes"), 2);
  EXPECT_DOUBLE_EQ(j.at("input").at("total_weight").get<double>(), 20'004.0);
  EXPECT_NE(r.err.find(path("top.csv") + ":4:"), std::string::npos);
}

TEST_F(Cli, PlotData) {
  const Outcome r = yak({"plotdata", "--params", path("p2009.json"), "--incomes", path("s2009.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  ASSERT_FALSE(ls.empty());
  EXPECT_EQ(ls[0], "series,m,empirical_ccdf,model_ccdf");
  std::size_t empirical = 0, model = 0;
  double prev = 2.0, smallest_m = 1e300, model_at_smallest = 0, emp_at_smallest = 0;
  std::vector<double> markers;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    const auto c = cells(ls[i]);
    ASSERT_EQ(c.size(), 4u) << ls[i];
    const double m = std::stod(c[1]);
    const double mc = std::stod(c[3]);
    if (c[0] == "empirical") {
      ++empirical;
      if (m < smallest_m) {
        smallest_m = m;
        model_at_smallest = mc;
        emp_at_smallest = std::stod(c[2]);
      }
    } else if (c[0] == "model") {
      ++model;
      EXPECT_LE(mc, prev);
      prev = mc;
      EXPECT_TRUE(c[2].empty());
    } else {
      markers.push_back(m);
    }
  }
  EXPECT_EQ(model, 500u);
  EXPECT_GT(empirical, 19'000u);
  EXPECT_EQ(markers, (std::vector<double>{145'000, 290'000}));
  EXPECT_LE(model_at_smallest, 1.0);
  EXPECT_GE(model_at_smallest, emp_at_smallest - 0.1);

  write("empty.csv", "income\n");
  EXPECT_EQ(yak({"plotdata", "--params", path("p2009.json"), "--incomes", path("empty.csv")}).code, 2);
  write("bad_params.json", R"({"T":1,"T1":1,"m0":1,"m1":1,"alpha":1,"alpha1":-1})");
  EXPECT_EQ(yak({"plotdata", "--params", path("bad_params.json"), "--incomes", path("s2009.csv")}).code, 2);
}

TEST_F(Cli, SampleIsSeeded) {
  const Outcome a = yak({"sample", "--params", path("p2010.json"), "-n", "100", "--seed", "4"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(lines(a.out).size(), 101u);
  EXPECT_EQ(lines(a.out)[0], "income");
  EXPECT_EQ(yak({"sample", "--params", path("p2010.json"), "-n", "100", "--seed", "4"}).out, a.out);
  EXPECT_NE(yak({"sample", "--params", path("p2010.json"), "-n", "100", "--seed", "5"}).out, a.out);
  EXPECT_EQ(yak({"sample", "--params", path("p2010.json")}).code, 2);
  // fit output is accepted as a params file
  const Outcome f = yak({"fit", "--incomes", path("s2009.csv"), "--bootstrap", "0", "--out", path("f.json")});
  ASSERT_EQ(f.code, 0);
  EXPECT_EQ(yak({"sample", "--params", path("f.json"), "-n", "10"}).code, 0);
}

TEST_F(Cli, Simulate) {
  const Outcome r = yak({"simulate", "--params", path("p2010.json"), "--agents", "500", "--steps", "100", "--stride",
                     "50", "--seed", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  EXPECT_EQ(ls[0], "time,income");
  EXPECT_EQ(ls.size(), 1u + 3u * 500u);
  EXPECT_NE(r.err.find("ks distance"), std::string::npos);
  EXPECT_EQ(yak({"simulate", "--params", path("p2010.json"), "--dt", "1"}).code, 2);  // stability bound
}

TEST_F(Cli, ReportReferenceTable) {
  const Outcome t = yak({"report"});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.out.find("143000"), std::string::npos);
  EXPECT_NE(t.out.find("451000"), std::string::npos);

  const json j = json::parse(yak({"report", "--format", "json"}).out);
  EXPECT_EQ(std::round(j.at("mean").at("mean").at("m0").get<double>()), 143'333.0);
  EXPECT_EQ(j.at("mean_without_crisis").at("mean").at("m1").get<double>(), 451'000.0);
  for (const auto& row : j.at("rows")) EXPECT_EQ(row.at("crisis").get<bool>(), row.at("label") == "2009");

  const json high = json::parse(yak({"report", "--format", "json", "--crisis-threshold", "3"}).out);
  EXPECT_TRUE(high.at("mean_without_crisis").is_null());
  const json ex = json::parse(yak({"report", "--format", "json", "--exclude", "2009"}).out);
  EXPECT_EQ(ex.at("mean").at("mean").at("m1").get<double>(), 451'000.0);
  EXPECT_EQ(yak({"report", "--exclude", "2005", "2006", "2007", "2008", "2009", "2010"}).code, 2);
  EXPECT_EQ(yak({"report", "--format", "xml"}).code, 2);
}

TEST_F(Cli, ReportRowsFile) {
  write("rows.json", json(reference_rows()).dump());
  const json j = json::parse(yak({"report", "--rows", path("rows.json"), "--format", "json"}).out);
  EXPECT_EQ(j.at("rows").get<std::vector<ReportRow>>(), reference_rows());
  write("rows_bad.json", R"([{"label": "x"}])");
  EXPECT_EQ(yak({"report", "--rows", path("rows_bad.json")}).code, 2);
}

}  // namespace
}  // namespace yakovenko
