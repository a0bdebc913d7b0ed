#pragma once

// Test oracles built without the library: closed forms, Boost special
// functions and goodness-of-fit p-values.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

/// E_1(x) = int_x^inf e^{-z}/z dz.
inline double e1(double x) { return boost::math::expint(1, x); }

/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// One-sample two-sided KS p-value (Stephens' finite-n correction).
inline double ks_pvalue(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  return kolmogorov_q((sn + 0.12 + 0.11 / sn) * d);
}

/// Chi-square goodness of fit of integer counts to Poisson(mean). Cells are
/// 0, 1, ..., merged from both ends until every expected count is >= 5.
inline double poisson_chi2_pvalue(const std::vector<long>& counts, double mean) {
  const boost::math::poisson_distribution<double> pois(mean);
  const double n = static_cast<double>(counts.size());
  const long hi = static_cast<long>(mean + 10.0 * std::sqrt(mean) + 10.0);
  std::vector<double> obs(static_cast<std::size_t>(hi) + 1, 0.0);
  for (long c : counts) obs[static_cast<std::size_t>(std::min(c, hi))] += 1.0;
  std::vector<double> expct(obs.size());
  for (long k = 0; k < hi; ++k) expct[static_cast<std::size_t>(k)] = n * boost::math::pdf(pois, static_cast<double>(k));
  expct.back() = n * boost::math::cdf(boost::math::complement(pois, static_cast<double>(hi - 1)));

  std::vector<double> o, e;
  double acc_o = 0.0, acc_e = 0.0;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    acc_o += obs[k];
    acc_e += expct[k];
    if (acc_e >= 5.0) {
      o.push_back(acc_o);
      e.push_back(acc_e);
      acc_o = acc_e = 0.0;
    }
  }
  if (!e.empty()) {
    o.back() += acc_o;
    e.back() += acc_e;
  }
  double stat = 0.0;
  for (std::size_t k = 0; k < o.size(); ++k) stat += (o[k] - e[k]) * (o[k] - e[k]) / e[k];
  const double dof = static_cast<double>(o.size()) - 1.0;
  if (dof < 1.0) return 1.0;
  const boost::math::chi_squared_distribution<double> chi(dof);
  return boost::math::cdf(boost::math::complement(chi, stat));
}

/// Composite Simpson on [a, b] with n (even) panels, used for smooth integrands.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

/// Integral of f over [a, b] with 0 < a, via Simpson in t = ln z.
inline double log_simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  return simpson([&](double t) {
    const double z = std::exp(t);
    return f(z) * z;
  }, std::log(a), std::log(b), n);
}

}  // namespace oracle
