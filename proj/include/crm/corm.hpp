#pragma once

// Compound random measures with Beta(xi, 1) scores over a beta-process
// marginal: mu_j = sum_i m_ji J_i delta_{x_i}, where (J_i, x_i) come from the
// directing measure and the scores m_ji are i.i.d.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "crm/crm_sample.hpp"
#include "crm/detail/gauss_kronrod.hpp"
#include "crm/error.hpp"
#include "crm/grid.hpp"
#include "crm/intensity.hpp"
#include "crm/reference.hpp"
#include "crm/rng.hpp"
#include "crm/sampler.hpp"

namespace crm {

/// Beta(xi, 1): density xi x^{xi-1} on (0, 1).
struct ScoreDistribution {
  double xi = 1.0;

  explicit ScoreDistribution(double xi_) : xi(xi_) {
    if (!(xi > 0.0) || !std::isfinite(xi)) throw ParameterError("score distribution: xi must be > 0");
  }

  [[nodiscard]] double density(double x) const {
    if (!(x > 0.0 && x < 1.0)) return 0.0;
    return xi * std::pow(x, xi - 1.0);
  }

  /// Inverse-cdf draw u^{1/xi}, strictly inside (0, 1] up to rounding.
  double sample(Rng& rng) const { return std::pow(rng.uniform_open(), 1.0 / xi); }
};

/// nu*(z) = M c z^{-1} (1-z)^{c-1} + (M c (c-1) / xi) (1-z)^{c-2} on (0, 1),
/// stored with kappa = 1 and g(z) = z nu*(z).
inline LevyIntensity directing_intensity_beta_scores(double M, double c, double xi) {
  detail::require(detail::positive(M), "corm", "M > 0");
  detail::require(std::isfinite(c) && c >= 1.0, "corm", "c >= 1");
  detail::require(detail::positive(xi), "corm", "xi > 0");
  detail::require(c != 1.0 || xi == 1.0, "corm", "c = 1 requires xi = 1");
  if (c == 1.0) {
    // the second term vanishes; nu* is the beta intensity M z^{-1}
    return make_custom([M](double z) { return M / z; }, Domain::unit_interval(),
                       Decomposition{1.0, [M](double) { return M; }}, TailHint::Auto,
                       "corm-directing");
  }
  const double a = M * c;
  const double b = M * c * (c - 1.0) / xi;
  auto g = [a, b, c](double z) {
    return a * std::pow(1.0 - z, c - 1.0) + b * z * std::pow(1.0 - z, c - 2.0);
  };
  return make_custom([g](double z) { return g(z) / z; }, Domain::unit_interval(),
                     Decomposition{1.0, g}, TailHint::Auto, "corm-directing");
}

/// n log-spaced probe points on [lo, hi].
inline std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    out[i] = lo * std::pow(hi / lo, t);
  }
  return out;
}

/// Max over probes of |int_x^1 f(x/z) z^{-1} nu*(z) dz - nu(x)| / nu(x); where
/// nu(x) = 0 the absolute deviation is used.
inline double verify_integral_equation(const LevyIntensity& marginal, const ScoreDistribution& f,
                                       const LevyIntensity& directing,
                                       const std::vector<double>& probes,
                                       const QuadratureSettings& s = {}) {
  if (!marginal.domain().bounded() || !directing.domain().bounded()) {
    throw ParameterError("verify_integral_equation needs unit-interval intensities");
  }
  QuadratureSettings qs = s;
  qs.max_subdivisions = std::max(qs.max_subdivisions, 1000);
  double worst = 0.0;
  for (double x : probes) {
    if (!(x > 0.0 && x < 1.0)) throw DomainError("verify_integral_equation: probe outside (0, 1)");
    // dz / z = dt with z = e^t below 1/2; plain z above
    double rhs = 0.0;
    const double split = std::max(x, 0.5);
    if (x < split) {
      rhs += detail::checked_integral(
          [&](double t) {
            const double z = std::exp(t);
            return f.density(x / z) * directing(z);
          },
          std::log(x), std::log(split), qs, "verify_integral_equation");
    }
    rhs += detail::checked_integral(
        [&](double z) { return f.density(x / z) * directing(z) / z; }, split, 1.0, qs,
        "verify_integral_equation");
    const double lhs = marginal(x);
    const double dev = std::abs(rhs - lhs);
    worst = std::max(worst, lhs != 0.0 ? dev / std::abs(lhs) : dev);
  }
  return worst;
}

struct CormSample {
  CrmSample directing;
  std::vector<std::vector<double>> scores;    // d rows, one column per jump
  std::vector<std::vector<double>> measures;  // weights m_ji J_i, same shape

  [[nodiscard]] std::size_t dimension() const noexcept { return scores.size(); }
};

/// Directing jumps from the grid sampler, then i.i.d. scores from a third
/// stream of rng.
inline CormSample sample_corm(const LevyIntensity& directing, const ScoreDistribution& f,
                              std::size_t d, const GridConfig& cfg, Rng& rng,
                              const SamplerBudget& budget) {
  if (d < 1) throw ParameterError("sample_corm: d must be >= 1");
  CormSample out;
  out.directing = sample(directing, cfg, rng, budget);
  Rng score_rng = rng.split();
  const std::size_t n = out.directing.size();
  out.scores.assign(d, std::vector<double>(n));
  out.measures.assign(d, std::vector<double>(n));
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const double m = f.sample(score_rng);
      out.scores[j][i] = m;
      out.measures[j][i] = m * out.directing.jumps[i];
    }
  }
  return out;
}

}  // namespace crm
