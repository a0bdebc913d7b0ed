#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "crm/crm.hpp"
#include "oracles.hpp"

using namespace crm;
using namespace crm::occupancy;

namespace {

// p(Y_i) by summing over every latent occupancy vector Z in {0,1}^n.
double brute_force_likelihood(double theta, double q, const OccupancyData& d, std::size_t i) {
  const std::size_t n = d.sites(), K = d.occasions();
  double total = 0.0;
  for (std::uint32_t z = 0; z < (1u << n); ++z) {
    double p = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (z >> j & 1u) {
        p *= theta;
        for (std::size_t k = 0; k < K; ++k) p *= d.y(i, j, k) ? q : 1.0 - q;
      } else {
        p *= 1.0 - theta;
        for (std::size_t k = 0; k < K; ++k) {
          if (d.y(i, j, k)) p = 0.0;
        }
      }
    }
    total += p;
  }
  return total;
}

double midpoint_integral(const std::function<double(double)>& f, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += f((static_cast<double>(i) + 0.5) / static_cast<double>(n));
  return s / static_cast<double>(n);
}

}  // namespace

TEST(SiteLikelihood, Examples) {
  EXPECT_DOUBLE_EQ(site_likelihood(0.5, 0.5, 0, 1), 0.75);
  EXPECT_DOUBLE_EQ(site_likelihood(1.0, 1.0, 5, 5), 1.0);
  EXPECT_EQ(site_likelihood(0.0, 0.3, 2, 4), 0.0);
  EXPECT_EQ(site_likelihood(0.0, 0.3, 0, 4), 1.0);
  EXPECT_NEAR(std::exp(log_site_likelihood(0.5, 0.5, 0, 1)), 0.75, 1e-15);
  EXPECT_NEAR(std::exp(log_site_likelihood(0.3, 0.2, 2, 5)), 0.3 * 0.04 * std::pow(0.8, 3), 1e-15);
  EXPECT_EQ(log_site_likelihood(0.0, 0.2, 1, 3), -std::numeric_limits<double>::infinity());
}

TEST(SiteLikelihood, MatchesBruteForceOnRandomInstances) {
  Rng rng(2718);
  std::uniform_int_distribution<std::size_t> sites(1, 10), occasions(1, 4);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = sites(rng), K = occasions(rng);
    OccupancyData d(1, n, K);
    const double theta = rng.uniform_open(), q = rng.uniform_open();
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < K; ++k) d.set(0, j, k, rng.bernoulli(0.3));
    }
    const double want = brute_force_likelihood(theta, q, d, 0);
    const double got = std::exp(species_log_likelihood(theta, q, d.counts(0), static_cast<int>(K)));
    EXPECT_NEAR(got, want, 1e-12 * std::max(1.0, want)) << rep;
    double prod = 1.0;
    for (int s : d.counts(0)) prod *= site_likelihood(theta, q, s, static_cast<int>(K));
    EXPECT_NEAR(prod, want, 1e-12 * std::max(1.0, want)) << rep;
  }
}

TEST(TiltedIntensity, Examples) {
  const auto prior = OccupancyPrior::beta_process(2.0, 1.5, QPrior{2.0, 3.0});
  const double f_p = prior.theta_process(0.4) * prior.q_prior.density(0.3);
  EXPECT_NEAR(tilted_intensity(prior, 0.4, 0.3, 0, 5) / f_p, 1.0, 1e-14);
  EXPECT_NEAR(tilted_intensity(prior, 1e-12, 0.3, 10, 5) / (prior.theta_process(1e-12) * prior.q_prior.density(0.3)),
              1.0, 1e-10);
  // theta = 1 and q = 0: the bracket is 1
  EXPECT_NEAR(0.0 + std::exp(10 * log_site_likelihood(1.0, 0.0, 0, 5)), 1.0, 1e-15);
  // the bracket is the all-zero site likelihood
  for (int n : {1, 3, 10}) {
    double prod = 1.0;
    for (int j = 0; j < n; ++j) prod *= site_likelihood(0.4, 0.3, 0, 5);
    EXPECT_NEAR(tilted_intensity(prior, 0.4, 0.3, n, 5) / (f_p * prod), 1.0, 1e-13) << n;
  }
}

TEST(TiltedIntensity, ShrinksWithSites) {
  const auto prior = OccupancyPrior::beta_process(1.0, 1.0);
  double prev = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= 10; ++n) {
    const double v = tilted_intensity(prior, 0.5, 0.5, n, 3);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(QPrior, IntegratesToOne) {
  for (auto p : {QPrior{}, QPrior{2.0, 5.0}, QPrior{0.7, 1.3}}) {
    const double v = midpoint_integral([&](double q) { return p.density(q); }, 2000000);
    // the midpoint rule converges slowly at integrable endpoint singularities
    const double tol = p.alpha < 1.0 ? 1e-3 : 1e-9;
    EXPECT_NEAR(v, 1.0, tol) << p.alpha << " " << p.beta;
  }
  EXPECT_EQ(QPrior{}.density(0.0), 0.0);
}

TEST(Data, DerivedQuantities) {
  OccupancyData d(3, 2, 2);
  d.set(0, 1, 0, 1);
  d.set(0, 1, 1, 1);
  d.set(2, 0, 1, 1);
  EXPECT_EQ(d.count(0, 1), 2);
  EXPECT_EQ(d.undetected_indicator(0, 0), 1);
  EXPECT_EQ(d.undetected_indicator(0, 1), 0);
  EXPECT_TRUE(d.discovered(0));
  EXPECT_FALSE(d.discovered(1));
  EXPECT_EQ(d.p_star(), 2u);
  EXPECT_EQ(d.counts(2), (std::vector<int>{1, 0}));
  EXPECT_THROW(d.set(0, 0, 0, 2), ParameterError);
  EXPECT_THROW(static_cast<void>(d.y(3, 0, 0)), OutOfRange);
}

TEST(Data, CsvRoundTrip) {
  Rng rng(4);
  const auto d = generate_synthetic(SyntheticScenario{}, rng);
  std::stringstream ss;
  write_csv(ss, d);
  const auto e = read_csv(ss);
  ASSERT_EQ(e.species(), d.species());
  ASSERT_EQ(e.sites(), d.sites());
  ASSERT_EQ(e.occasions(), d.occasions());
  for (std::size_t i = 0; i < d.species(); ++i) {
    EXPECT_EQ(e.counts(i), d.counts(i));
  }
  std::istringstream sparse("species,site,occasion,detected\r\n2,1,3,1\r\n");
  const auto s = read_csv(sparse);
  EXPECT_EQ(s.species(), 3u);
  EXPECT_EQ(s.occasions(), 4u);
  EXPECT_EQ(s.y(2, 1, 3), 1);
  EXPECT_EQ(s.p_star(), 1u);
}

TEST(Data, CsvErrors) {
  for (const char* text : {"", "a,b,c,d\n", "species,site,occasion,detected\n1,2,3\n",
                           "species,site,occasion,detected\n1,2,3,2\n",
                           "species,site,occasion,detected\n1,x,3,1\n",
                           "species,site,occasion,detected\n-1,0,0,1\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(read_csv(in), FormatError) << text;
  }
  EXPECT_THROW(read_csv_file("/nonexistent/occupancy.csv"), FormatError);
}

TEST(Synthetic, ScenarioShape) {
  Rng a(10), b(10);
  const auto d1 = generate_synthetic(SyntheticScenario{}, a);
  const auto d2 = generate_synthetic(SyntheticScenario{}, b);
  EXPECT_GE(d1.species(), 2u);
  EXPECT_EQ(d1.sites(), 10u);
  EXPECT_EQ(d1.occasions(), 5u);
  ASSERT_EQ(d1.species(), d2.species());
  for (std::size_t i = 0; i < d1.species(); ++i) EXPECT_EQ(d1.counts(i), d2.counts(i));
  SyntheticScenario only;
  only.background_mass = 0.0;
  EXPECT_EQ(generate_synthetic(only, a).species(), 2u);
}

TEST(FixedPoint, SingleObservation) {
  const auto prior = OccupancyPrior::beta_process(1.0, 2.0);
  OccupancyData d(1, 1, 1);
  d.set(0, 0, 0, 1);
  OccupancyConfig cfg;
  cfg.theta_cells = 40;
  cfg.q_cells = 30;
  const auto g = fixed_point_posterior(prior, d, 0, cfg);
  ASSERT_EQ(g.density.size(), 40u * 30u);
  EXPECT_NEAR(g.integral(), 1.0, 1e-9);
  // density proportional to p(q) f(theta) theta q
  auto unnorm = [&](double t, double q) { return prior.theta_process(t) * t * q; };
  const double ref = g.at(0, 0) / unnorm(g.theta[0], g.q[0]);
  for (std::size_t a = 0; a < g.theta.size(); a += 7) {
    for (std::size_t b = 0; b < g.q.size(); b += 5) {
      EXPECT_NEAR(g.at(a, b) / unnorm(g.theta[a], g.q[b]) / ref, 1.0, 1e-12);
    }
  }
  double m = 0.0;
  for (double v : g.theta_marginal()) m += v * g.d_theta;
  EXPECT_NEAR(m, 1.0, 1e-9);
}

TEST(FixedPoint, ErrorsAndNormalisation) {
  Rng rng(7);
  const auto d = generate_synthetic(SyntheticScenario{}, rng);
  const auto prior = OccupancyPrior::beta_process(1.0, 1.0);
  for (std::size_t i = 0; i < d.species(); ++i) {
    if (d.discovered(i)) {
      EXPECT_NEAR(fixed_point_posterior(prior, d, i).integral(), 1.0, 1e-9);
    } else {
      EXPECT_THROW(fixed_point_posterior(prior, d, i), ParameterError);
    }
  }
  EXPECT_THROW(fixed_point_posterior(prior, d, d.species()), OutOfRange);
}

TEST(FixedPoint, StripSamplerMatchesGrid) {
  OccupancyData d(1, 4, 3);
  d.set(0, 0, 0, 1);
  d.set(0, 2, 1, 1);
  OccupancyConfig cfg;
  cfg.theta_cells = 20;
  cfg.q_cells = 20;
  const auto g = fixed_point_posterior(OccupancyPrior::beta_process(1.0, 1.0), d, 0, cfg);
  // theta marginal cdf of the grid, piecewise linear in each cell
  const auto marg = g.theta_marginal();
  auto cdf = [&](double t) {
    double acc = 0.0;
    for (std::size_t a = 0; a < marg.size(); ++a) {
      const double lo = static_cast<double>(a) * g.d_theta;
      if (t >= lo + g.d_theta) {
        acc += marg[a] * g.d_theta;
      } else {
        if (t > lo) acc += marg[a] * (t - lo);
        break;
      }
    }
    return acc;
  };
  Rng rng(12);
  std::vector<double> ts;
  for (int i = 0; i < 10000; ++i) ts.push_back(g.sample(rng).first);
  EXPECT_GT(oracle::ks_pvalue(ts, cdf), 0.01);
}

TEST(Undiscovered, NoOccasionsIsPrior) {
  const auto prior = OccupancyPrior::beta_process(1.0, 2.0);
  const UndiscoveredProcess proc(prior, 10, 0);
  for (double t : {1e-6, 0.01, 0.5, 0.9}) {
    EXPECT_NEAR(proc.theta_intensity()(t) / prior.theta_process(t), 1.0, 1e-12);
    const auto w = proc.q_conditional(t);
    for (double v : w) EXPECT_NEAR(v, 1.0 / static_cast<double>(w.size()), 1e-14);
  }
  const auto ref = build_envelope(prior.theta_process, OccupancyConfig{}.theta_grid);
  EXPECT_NEAR(proc.envelope().total_mass() / ref.total_mass(), 1.0, 1e-10);
  const UndiscoveredProcess none(prior, 0, 5);
  EXPECT_NEAR(none.theta_intensity()(0.3) / prior.theta_process(0.3), 1.0, 1e-12);
}

TEST(Undiscovered, TiltedMarginalAndCells) {
  const auto prior = OccupancyPrior::beta_process(1.0, 1.0, QPrior{2.0, 2.0});
  const std::size_t n = 10, K = 5;
  const UndiscoveredProcess proc(prior, n, K);
  const auto& qg = proc.q_grid();
  ASSERT_EQ(qg.size(), 200u);
  for (double t : {1e-4, 0.2, 0.7}) {
    double want = 0.0;
    for (double q : qg) want += tilted_intensity(prior, t, q, static_cast<int>(n), static_cast<int>(K));
    want /= static_cast<double>(qg.size());
    EXPECT_NEAR(proc.theta_intensity()(t) / want, 1.0, 1e-12) << t;
  }
  const auto cells = proc.cell_masses();
  ASSERT_EQ(cells.size(), proc.envelope().bin_masses.size() * qg.size());
  double total = 0.0;
  for (double v : cells) {
    EXPECT_GE(v, 0.0);
    total += v;
  }
  double binsum = 0.0;
  for (double v : proc.envelope().bin_masses) binsum += v;
  EXPECT_NEAR(total / binsum, 1.0, 1e-12);
  // the tilted process has less mass than the prior
  EXPECT_LT(binsum, build_envelope(prior.theta_process, OccupancyConfig{}.theta_grid).total_mass());
}

TEST(Undiscovered, QGivenThetaSelfConsistent) {
  Rng data_rng(6);
  const auto d = generate_synthetic(SyntheticScenario{}, data_rng);
  const auto post = fit(OccupancyPrior::beta_process(1.0, 1.0), d);
  EXPECT_EQ(post.fixed_points.size(), d.p_star());
  const auto& proc = post.undiscovered;
  Rng rng(15);
  for (double t : {0.05, 0.6}) {
    std::vector<double> qs;
    for (int i = 0; i < 10000; ++i) qs.push_back(proc.sample_q(t, rng));
    EXPECT_GT(oracle::ks_pvalue(qs, [&](double q) { return proc.q_conditional_cdf(t, q); }), 0.01) << t;
  }
  // pooled probability integral transform of whole posterior draws
  std::vector<double> pit;
  while (pit.size() < 10000) {
    for (const auto& f : sample_undiscovered(proc, rng, SamplerBudget::min_jump(1e-3))) {
      pit.push_back(proc.q_conditional_cdf(f.theta, f.q));
    }
  }
  EXPECT_GT(oracle::ks_pvalue(pit, [](double u) { return u; }), 0.01);
}

TEST(Predictive, PointMasses) {
  PredictiveSettings s;
  s.n_mc = 500;
  s.cap = 10;
  s.threads = 1;
  Rng rng(1);
  const auto zero = predictive_counts(std::vector<Feature>{{0.0, 0.5}, {0.0, 0.9}}, s, rng);
  ASSERT_EQ(zero.probabilities.size(), 11u);
  EXPECT_EQ(zero.probabilities[0], 1.0);

  const auto one = predictive_counts(std::vector<Feature>{{1.0, 1.0}}, s, rng);
  EXPECT_EQ(one.probabilities[1], 1.0);

  s.K_sub = 5;
  s.r = 2;
  const auto never = predictive_counts(std::vector<Feature>{{1.0, 1.0}}, s, rng);
  EXPECT_EQ(never.probabilities[0], 1.0);
  s.r = 5;
  EXPECT_EQ(predictive_counts(std::vector<Feature>{{1.0, 1.0}}, s, rng).probabilities[1], 1.0);

  s.r = -1;
  s.cap = 3;
  const auto capped = predictive_counts(std::vector<Feature>(8, Feature{1.0, 1.0}), s, rng);
  EXPECT_EQ(capped.probabilities[3], 1.0);
  s.cap = 0;
  EXPECT_THROW(predictive_counts(std::vector<Feature>{}, s, rng), ParameterError);
  s.cap = 5;
  s.n_mc = 0;
  EXPECT_THROW(predictive_counts(std::vector<Feature>{}, s, rng), ParameterError);
}

TEST(Predictive, BinomialForFixedFeatures) {
  // 4 features each seen with probability 1 - (1 - 0.5 * 0.5)^1 on one site
  PredictiveSettings s;
  s.n_mc = 20000;
  s.threads = 2;
  Rng rng(3);
  const auto p = predictive_counts(std::vector<Feature>(4, Feature{0.5, 0.5}), s, rng);
  const double pi = 0.25;
  for (int k = 0; k <= 4; ++k) {
    const double want = std::tgamma(5) / (std::tgamma(k + 1) * std::tgamma(5 - k)) * std::pow(pi, k) *
                        std::pow(1 - pi, 4 - k);
    EXPECT_NEAR(p.probabilities[k], want, 0.015) << k;
  }
}

TEST(Predictive, PosteriorRunSumsToOneAndIgnoresThreads) {
  Rng data_rng(9);
  const auto d = generate_synthetic(SyntheticScenario{}, data_rng);
  const UndiscoveredProcess proc(OccupancyPrior::beta_process(1.0, 1.0), d.sites(), d.occasions());
  PredictiveSettings s;
  s.n_mc = 300;
  s.K_sub = 5;
  s.n_sites = 10;
  Rng rng(77);
  s.threads = 1;
  const auto a = predictive_counts(proc, s, rng);
  s.threads = 4;
  const auto b = predictive_counts(proc, s, rng);
  EXPECT_EQ(a.probabilities, b.probabilities);
  EXPECT_NEAR(a.sum(), 1.0, 1e-9);
  EXPECT_EQ(a.probabilities.size(), 51u);
  for (double v : a.probabilities) EXPECT_GE(v, 0.0);
}
