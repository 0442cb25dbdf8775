#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "pqlab/studies.hpp"

using namespace pqlab;

namespace {

Config parse(const std::string& text) {
  std::istringstream in(text);
  return Config::parse(in);
}

std::string csv(const StudyResult& r) {
  std::ostringstream out;
  r.table.write(out);
  return out.str();
}

}  // namespace

TEST(Config, ParsesCommentsAndNormalizesKeys) {
  const Config c = parse("# header\nlambda-list = 1, 2,3  # trailing\n\n  tol=1e-8\npq_list = 2:2.4, 1.8:2.2\n");
  EXPECT_EQ(c.list("lambda_list", {}), (std::vector<double>{1, 2, 3}));
  EXPECT_DOUBLE_EQ(c.number("tol", 0.0), 1e-8);
  const auto t = c.tuples("pq-list", {});
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[1], (std::vector<double>{1.8, 2.2}));
  EXPECT_TRUE(c.unused().empty());
}

TEST(Config, ReportsErrors) {
  EXPECT_THROW(parse("broken line\n"), ConfigError);
  EXPECT_THROW(parse("= 3\n"), ConfigError);
  EXPECT_THROW(parse("n = three\n").integer("n", 3), ConfigError);
  EXPECT_THROW(parse("n = 3.5\n").integer("n", 3), ConfigError);
  const Config c = parse("n = 3\nextra = 1\n");
  c.integer("n", 3);
  EXPECT_EQ(c.unused(), (std::vector<std::string>{"extra"}));
}

TEST(ExperimentConfig, Validates) {
  EXPECT_NO_THROW(ExperimentConfig::from(parse(""), "x", {1.0}, {0.125}));
  EXPECT_THROW(ExperimentConfig::from(parse("kappa = 0.7\n"), "x", {1.0}, {0.125}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from(parse("lambda_list = 3, 2\n"), "x", {1.0}, {0.125}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from(parse("p = 2\nq = 1.5\n"), "x", {1.0}, {0.125}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from(parse("h = 0.75\n"), "x", {1.0}, {0.125}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from(parse("threads = 0\n"), "x", {1.0}, {0.125}), ConfigError);
}

TEST(Csv, FormatsCells) {
  EXPECT_EQ(format_cell(std::nan("")), "nan");
  EXPECT_EQ(format_cell(cell(true)), "1");
  EXPECT_EQ(format_cell(cell("abc")), "abc");
  const double x = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_cell(x)), x);
  CsvTable t;
  t.header = {"a", "b"};
  EXPECT_THROW(t.add({cell(1)}), std::logic_error);
  t.add({cell(1), cell(2.5)});
  std::ostringstream out;
  t.write(out);
  EXPECT_EQ(out.str(), "a,b\n1,2.5\n");
  EXPECT_DOUBLE_EQ(t.number(0, "b"), 2.5);
  EXPECT_THROW(t.column("c"), std::out_of_range);
}

TEST(ParallelMap, KeepsOrderAndRethrowsFirstError) {
  const auto sq = parallel_map<int>(50, 4, [](std::size_t i) { return static_cast<int>(i * i); });
  for (std::size_t i = 0; i < sq.size(); ++i) EXPECT_EQ(sq[i], static_cast<int>(i * i));
  try {
    parallel_map<int>(20, 3, [](std::size_t i) -> int {
      if (i == 7 || i == 13) throw std::runtime_error("fail " + std::to_string(i));
      return 0;
    });
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "fail 7");
  }
}

TEST(Studies, CounterexampleDeterministicAcrossThreads) {
  Config c = parse("n_list = 3, 4\nlambda_list = 100, 1000, 10000\n");
  const auto one = counterexample_study(ExperimentConfig::from(c, "counterexample", {}, {1.0 / 16}));
  c.set("threads", "3");
  const auto three = counterexample_study(ExperimentConfig::from(c, "counterexample", {}, {1.0 / 16}));
  EXPECT_EQ(csv(one), csv(three));
  EXPECT_TRUE(one.sound);
  EXPECT_EQ(csv(one).find('\r'), std::string::npos);
}

TEST(Studies, UnknownKeyRejected) {
  const Config c = parse("no_such_key = 1\n");
  EXPECT_THROW(counterexample_study(ExperimentConfig::from(c, "counterexample", {100, 1000}, {1.0 / 16})), ConfigError);
}

TEST(Studies, IsotropicContrastRatioIsConstant) {
  const Config c = parse("mode = grid\nisotropic = 1\nlambda_list = 10, 100, 1000\n");
  const StudyResult r = contrast_study(ExperimentConfig::from(c, "contrast", {}, {0.125}));
  for (std::size_t i = 1; i < r.table.rows.size(); ++i) {
    EXPECT_DOUBLE_EQ(r.table.number(i, "measured_ratio"), r.table.number(0, "measured_ratio"));
  }
}

TEST(Studies, ContrastBoundCanFail) {
  const Config c = parse("c_bound = 0.001\nlambda_list = 10, 100\n");
  EXPECT_FALSE(contrast_study(ExperimentConfig::from(c, "contrast", {}, {0.125})).sound);
}

TEST(Studies, DegiorgiForcingRaisesBound) {
  const Config base = parse("h = 0.0625\nc1 = 1\nc2 = 25\n");
  const auto r0 = degiorgi_study(ExperimentConfig::from(base, "degiorgi", {10}, {}));
  Config forced = base;
  forced.set("f_const", "0.5");
  const auto r1 = degiorgi_study(ExperimentConfig::from(forced, "degiorgi", {10}, {}));
  EXPECT_TRUE(r0.sound);
  EXPECT_TRUE(r1.sound);
  EXPECT_GT(r1.table.number(0, "bound"), r0.table.number(0, "bound"));
  EXPECT_GE(r0.table.number(0, "bound"), r0.table.number(0, "grid_sup"));
}

TEST(Studies, LipschitzGateRejectsInadmissiblePairs) {
  const Config c = parse("pq_list = 2:4.02\n");
  EXPECT_THROW(lipschitz_study(ExperimentConfig::from(c, "lipschitz", {1}, {0.125})), ConfigError);
}

TEST(Studies, RegularizationColumns) {
  // mu = 1 keeps F smooth; m beyond the sup of the floored forcing truncates nothing.
  const Config c = parse("mu = 1\np = 1.8\nq = 2.2\nm_list = 8, 16, 32\nh = 0.125\neps0 = 0\n");
  const StudyResult r = regularization_study(ExperimentConfig::from(c, "regularize", {1}, {}));
  EXPECT_TRUE(r.sound);
  for (std::size_t i = 0; i < r.table.rows.size(); ++i) {
    EXPECT_EQ(r.table.number(i, "sup_tilde_minus_F"), 0.0);
    EXPECT_EQ(r.table.number(i, "truncation_ln"), 0.0);
  }
}

TEST(Studies, LorentzFromSamplesFile) {
  const std::string path = ::testing::TempDir() + "pqlab_samples.csv";
  {
    std::ofstream out(path);
    out << "value,measure\n3,0.5\n1,0.5\n";
  }
  Config c = parse("");
  c.set("input", path);
  const StudyResult r = lorentz_study(ExperimentConfig::from(c, "lorentz", {1}, {0.0625}));
  std::remove(path.c_str());
  EXPECT_TRUE(r.sound);
  EXPECT_DOUBLE_EQ(r.table.number(0, "total_measure"), 1.0);
  EXPECT_DOUBLE_EQ(r.table.number(0, "linf"), 3.0);
}
