#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "perpetua/perpetua.hpp"

using namespace perpetua;

TEST(Sample, DegenerateSpecIsConstant) {
  const auto spec = make_spec("const", {{1.0, make_branch(Coefficient::constant(0.0), Coefficient::constant(0.42))}},
                              std::nullopt);
  oracle::McConfig cfg;
  cfg.samples = 1000;
  const auto r = oracle::sample(spec, cfg);
  for (double x : r.samples) ASSERT_EQ(x, 0.42);
  EXPECT_EQ(r.truncation_error, 0.0);
}

TEST(Sample, QuickselectMean) {
  oracle::McConfig cfg;
  cfg.threads = 4;
  const auto xs = oracle::sample(quickselect_spec(), cfg).samples;
  ASSERT_EQ(xs.size(), 1000000u);
  double m = 0.0, v = 0.0;
  for (double x : xs) m += x;
  m /= 1e6;
  for (double x : xs) v += (x - m) * (x - m);
  const double sigma = std::sqrt(v / 1e6);
  EXPECT_NEAR(m, 1.0 / 3.0, 3.0 * sigma / 1e3);
}

TEST(Sample, IntervalSplittingMatchesBeta22) {
  oracle::McConfig cfg;
  cfg.threads = 4;
  const auto r = oracle::sample(interval_splitting_spec(), cfg);
  const oracle::EmpiricalCdf emp(r.samples);
  EXPECT_LE(oracle::ks_statistic(emp, beta22_cdf), oracle::dkw_band(cfg.samples, 0.999) + 1e-6);
}

TEST(Sample, ReproducibleAndThreadIndependent) {
  oracle::McConfig cfg;
  cfg.samples = 50000;
  cfg.threads = 1;
  const auto a = oracle::sample(interval_splitting_spec(), cfg).samples;
  cfg.threads = 5;
  const auto b = oracle::sample(interval_splitting_spec(), cfg).samples;
  EXPECT_EQ(a, b);
  cfg.rng_seed ^= 1;
  const auto c = oracle::sample(interval_splitting_spec(), cfg).samples;
  EXPECT_NE(a, c);
}

TEST(Sample, TruncationMeetsTarget) {
  for (const auto& spec : {quickselect_spec(), interval_splitting_spec(), ax1::uniform_spec(0.5)}) {
    const int m = oracle::truncation_for(spec, 1e-6);
    EXPECT_LE(oracle::truncation_error(spec, m), 1e-6) << spec.name;
    EXPECT_GT(oracle::truncation_error(spec, m - 1), 1e-6) << spec.name;
    oracle::McConfig cfg;
    cfg.samples = 10;
    EXPECT_EQ(oracle::sample(spec, cfg).truncation, m);
  }
  oracle::McConfig bad;
  bad.samples = 0;
  EXPECT_THROW(oracle::sample(quickselect_spec(), bad), ConfigError);
}

TEST(Dkw, Examples) {
  EXPECT_NEAR(oracle::dkw_band(1000000, 0.999), 0.00195, 5e-6);
  EXPECT_NEAR(oracle::dkw_band(1000, 1e-12), std::sqrt(std::log(2.0) / 2000.0), 1e-9);
  EXPECT_GE(oracle::dkw_band(1, 0.86), 0.5);
  EXPECT_THROW(oracle::dkw_band(0, 0.9), ConfigError);
  EXPECT_THROW(oracle::dkw_band(10, 1.0), ConfigError);
}

TEST(EmpiricalCdf, Basics) {
  const oracle::EmpiricalCdf e({0.3, 0.1, 0.2, 0.2});
  EXPECT_EQ(e(0.0), 0.0);
  EXPECT_EQ(e(0.1), 0.25);
  EXPECT_EQ(e(0.2), 0.75);
  EXPECT_EQ(e(1.0), 1.0);
  EXPECT_EQ(e.min(), 0.1);
  EXPECT_EQ(e.max(), 0.3);
  EXPECT_THROW(oracle::EmpiricalCdf({}), ConfigError);
  EXPECT_NEAR(oracle::ks_statistic(e, [](double x) { return x; }), 0.7, 1e-15);
}

// Both presets: |F_emp - F_lattice| stays inside certificate + DKW + truncation.
TEST(Agreement, LatticeVsMonteCarloOnPresets) {
  struct Case {
    PerpetuitySpec spec;
    DiscretisationSchedule sched;
    std::int64_t n;
    double sup;
  };
  for (const auto& c : {Case{quickselect_spec(), DiscretisationSchedule::polynomial(3), 25, 18.0},
                        Case{interval_splitting_spec(), DiscretisationSchedule::polynomial(3, UMode::Symmetric), 25,
                             1.5}}) {
    const auto pmf = run(IterationPlan{c.spec, c.sched, c.n, std::nullopt, 4}).final;
    const double cert = optimize_p(c.spec, c.sched, c.n, c.sup).bound;
    oracle::McConfig cfg;
    cfg.threads = 4;
    const auto mc = oracle::sample(c.spec, cfg);
    const oracle::EmpiricalCdf emp(mc.samples);
    const double gap = oracle::max_cdf_gap(emp, pmf, 0.0, 1.0);
    EXPECT_LE(gap, cert + oracle::dkw_band(cfg.samples, 0.999) + mc.truncation_error) << c.spec.name;
  }
}

TEST(SamplesCsv, SingleColumn) {
  std::ostringstream os;
  oracle::write_samples_csv(os, {0.5, 0.1});
  EXPECT_EQ(os.str(), "x\n0.5\n0.10000000000000001\n");
}
