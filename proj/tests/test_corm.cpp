#include <gtest/gtest.h>

#include <cmath>

#include "crm/crm.hpp"
#include "oracles.hpp"

using namespace crm;

TEST(Directing, Values) {
  EXPECT_NEAR(directing_intensity_beta_scores(1.0, 2.0, 1.0)(0.5), 4.0, 1e-14);
  EXPECT_NEAR(directing_intensity_beta_scores(1.0, 2.0, 2.0)(0.5), 3.0, 1e-14);
  // M c z^{-1}(1-z)^{c-1} + M c (c-1)/xi (1-z)^{c-2} written out directly
  const double M = 1.5, c = 3.5, xi = 0.7, z = 0.3;
  const double want = M * c / z * std::pow(1 - z, c - 1) + M * c * (c - 1) / xi * std::pow(1 - z, c - 2);
  EXPECT_NEAR(directing_intensity_beta_scores(M, c, xi)(z) / want, 1.0, 1e-14);
  const auto d = decompose(directing_intensity_beta_scores(M, c, xi));
  ASSERT_TRUE(d.has_value());
  EXPECT_EQ(d->kappa, 1.0);
  EXPECT_NEAR(d->g(z) / (z * want), 1.0, 1e-14);
}

TEST(Directing, ParameterChecks) {
  EXPECT_THROW(directing_intensity_beta_scores(1.0, 1.0, 2.0), ParameterError);
  EXPECT_THROW(directing_intensity_beta_scores(1.0, 0.5, 1.0), ParameterError);
  EXPECT_THROW(directing_intensity_beta_scores(0.0, 2.0, 1.0), ParameterError);
  EXPECT_THROW(directing_intensity_beta_scores(1.0, 2.0, -1.0), ParameterError);
  EXPECT_NEAR(directing_intensity_beta_scores(2.0, 1.0, 1.0)(0.25), 8.0, 1e-14);
  EXPECT_THROW(ScoreDistribution(0.0), ParameterError);
}

TEST(IntegralEquation, ResidualSmall) {
  const auto marginal = make_standard(BetaParams{1.0, 2.0});
  const auto probes = log_spaced(1e-6, 0.99, 20);
  ASSERT_EQ(probes.size(), 20u);
  EXPECT_NEAR(probes.front(), 1e-6, 1e-20);
  EXPECT_NEAR(probes.back(), 0.99, 1e-15);
  for (double xi : {1.0, 2.0, 0.5}) {
    const double r =
        verify_integral_equation(marginal, ScoreDistribution(xi), directing_intensity_beta_scores(1.0, 2.0, xi), probes);
    EXPECT_LE(r, 1e-6) << xi;
  }
  const auto m3 = make_standard(BetaParams{2.0, 3.0});
  EXPECT_LE(verify_integral_equation(m3, ScoreDistribution(1.5), directing_intensity_beta_scores(2.0, 3.0, 1.5), probes),
            1e-6);
}

TEST(IntegralEquation, MutatedDirectingFails) {
  const auto marginal = make_standard(BetaParams{1.0, 2.0});
  // first term only
  const auto wrong = make_custom([](double z) { return 2.0 / z * (1.0 - z); }, Domain::unit_interval());
  EXPECT_GE(verify_integral_equation(marginal, ScoreDistribution(1.0), wrong, {0.5}), 0.1);
}

TEST(IntegralEquation, ProbeNearOne) {
  const auto marginal = make_standard(BetaParams{1.0, 2.0});
  const double x = 1.0 - 1e-6;
  EXPECT_LT(marginal(x), 1e-5);
  EXPECT_LE(verify_integral_equation(marginal, ScoreDistribution(1.0), directing_intensity_beta_scores(1.0, 2.0, 1.0),
                                     {x}),
            1e-6);
  EXPECT_THROW(verify_integral_equation(marginal, ScoreDistribution(1.0), marginal, {1.0}), DomainError);
}

TEST(SampleCorm, ShapesAndSharedLocations) {
  const auto dir = directing_intensity_beta_scores(1.0, 2.0, 1.0);
  Rng rng(5);
  const auto s = sample_corm(dir, ScoreDistribution(1.0), 3, GridConfig::with_bins(1000), rng,
                             SamplerBudget::jumps(100));
  ASSERT_EQ(s.dimension(), 3u);
  ASSERT_EQ(s.directing.size(), 100u);
  for (std::size_t j = 0; j < 3; ++j) {
    ASSERT_EQ(s.scores[j].size(), 100u);
    ASSERT_EQ(s.measures[j].size(), 100u);
    for (std::size_t i = 0; i < 100; ++i) {
      EXPECT_GT(s.scores[j][i], 0.0);
      EXPECT_LE(s.scores[j][i], 1.0);
      EXPECT_DOUBLE_EQ(s.measures[j][i], s.scores[j][i] * s.directing.jumps[i]);
    }
  }
  // the directing draw is the plain sampler's draw on the same seed
  Rng again(5);
  const auto plain = sample(dir, GridConfig::with_bins(1000), again, SamplerBudget::jumps(100));
  EXPECT_EQ(plain.jumps, s.directing.jumps);
  EXPECT_EQ(plain.locations, s.directing.locations);
  EXPECT_THROW(sample_corm(dir, ScoreDistribution(1.0), 0, GridConfig{}, rng, SamplerBudget::jumps(1)),
               ParameterError);
}

TEST(SampleCorm, LargeXiGivesUnitScores) {
  const auto dir = directing_intensity_beta_scores(1.0, 2.0, 1e6);
  Rng rng(8);
  const auto s = sample_corm(dir, ScoreDistribution(1e6), 1, GridConfig::with_bins(500), rng,
                             SamplerBudget::jumps(200));
  for (std::size_t i = 0; i < s.directing.size(); ++i) {
    EXPECT_GT(s.scores[0][i], 1.0 - 1e-4);
    EXPECT_NEAR(s.measures[0][i] / s.directing.jumps[i], 1.0, 1e-4);
  }
}

TEST(Scores, UniformMean) {
  const ScoreDistribution f(1.0);
  Rng rng(31);
  double sum = 0.0;
  const int n = 100000;
  std::vector<double> draws;
  for (int i = 0; i < n; ++i) {
    draws.push_back(f.sample(rng));
    sum += draws.back();
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
  const ScoreDistribution g(3.0);
  std::vector<double> d3;
  for (int i = 0; i < 5000; ++i) d3.push_back(g.sample(rng));
  EXPECT_GT(oracle::ks_pvalue(d3, [](double x) { return x * x * x; }), 0.01);
  EXPECT_NEAR(oracle::simpson([&](double x) { return g.density(x); }, 0.0, std::nextafter(1.0, 0.0)), 1.0, 1e-9);
}

TEST(SampleCorm, MarginalCountIsPoisson) {
  // each marginal measure is a beta process; count its weights above t
  const auto dir = directing_intensity_beta_scores(1.0, 2.0, 1.0);
  const auto marginal = make_standard(BetaParams{1.0, 2.0});
  const double t = 0.1;
  const double mean = exact_tail_mass(marginal, t);
  EXPECT_NEAR(mean, 2.0 * (std::log(10.0) - 0.9), 1e-10);
  Rng rng(41);
  std::vector<long> counts;
  for (int r = 0; r < 2000; ++r) {
    const auto s = sample_corm(dir, ScoreDistribution(1.0), 2, GridConfig::with_bins(1000), rng,
                               SamplerBudget::min_jump(t));
    counts.push_back(std::count_if(s.measures[1].begin(), s.measures[1].end(), [&](double w) { return w > t; }));
  }
  EXPECT_GT(oracle::poisson_chi2_pvalue(counts, mean), 0.01);
}
