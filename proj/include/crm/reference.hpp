#pragma once

// Exact Ferguson-Klass sampler: tail masses by adaptive quadrature and jump
// sizes by root-finding on the tail mass, one inversion per arrival. Serves as
// the precision and speed baseline for the grid sampler.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "crm/crm_sample.hpp"
#include "crm/detail/gauss_kronrod.hpp"
#include "crm/error.hpp"
#include "crm/intensity.hpp"
#include "crm/rng.hpp"

namespace crm {

struct QuadratureSettings {
  double abs_tol = 1e-13;
  double rel_tol = 1e-11;
  int max_subdivisions = 200;

  void validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || max_subdivisions < 1) {
      throw ParameterError("quadrature settings: tolerances must be > 0");
    }
  }
};

namespace detail {

// Smallest x the inversion routines will go to; keeps x^{-1} finite.
inline constexpr double kJumpFloor = 1e-300;

template <class F>
double checked_integral(F&& f, double a, double b, const QuadratureSettings& s,
                        const std::string& what) {
  const QuadResult r = integrate(f, a, b, s.abs_tol, s.rel_tol, s.max_subdivisions);
  if (!r.converged || !std::isfinite(r.value)) {
    throw ConvergenceFailure(what + ": adaptive quadrature did not converge on [" +
                             std::to_string(a) + ", " + std::to_string(b) + "]");
  }
  return r.value;
}

/// Integral of h(t) over [t0, +inf) (step > 0) or (-inf, t0] (step < 0), taken
/// in chunks of |step|. Stops once the geometric extrapolation of the remaining
/// chunks is below tolerance, or the chunk ratio has settled (exact power law),
/// adding the extrapolated remainder.
template <class H>
double chunked_integral(H&& h, double t0, double step, double t_limit,
                        const QuadratureSettings& s, const std::string& what) {
  double total = 0.0;
  double prev = 0.0;
  double prev_ratio = std::numeric_limits<double>::quiet_NaN();
  for (int k = 0;; ++k) {
    const double a = t0 + k * step;
    const double b = a + step;
    if ((step > 0.0 && b > t_limit) || (step < 0.0 && b < t_limit)) {
      throw NonIntegrableTail(what + ": tail mass does not converge within floating-point range");
    }
    const double v = step > 0.0 ? checked_integral(h, a, b, s, what)
                                : checked_integral(h, b, a, s, what);
    total += v;
    if (v == 0.0) break;
    const double tol = std::max(s.abs_tol, s.rel_tol * std::abs(total));
    if (k >= 1 && prev > 0.0) {
      const double r = v / prev;
      if (r < 1.0 - 1e-9) {
        const double remainder = v * r / (1.0 - r);
        const bool settled = k >= 2 && std::abs(r - prev_ratio) <= 1e-9 * r;
        if (remainder <= tol || settled) {
          total += remainder;
          break;
        }
      }
      prev_ratio = r;
    }
    prev = v;
  }
  return total;
}

}  // namespace detail

/// Integral of nu over [a, b] inside the domain, with log-space substitution
/// z = e^t on the part below 1/2 (the x^{-p} singularity at zero).
inline double mass_between(const LevyIntensity& nu, double a, double b,
                           const QuadratureSettings& s = {}) {
  if (!(a > 0.0) || !(b <= nu.domain().upper) || !(a <= b)) {
    throw DomainError(nu.name() + ": mass_between needs 0 < a <= b <= upper");
  }
  if (a == b) return 0.0;
  auto log_integrand = [&nu](double t) {
    const double z = std::exp(t);
    return nu(z) * z;
  };
  if (!nu.domain().bounded()) {
    return detail::checked_integral(log_integrand, std::log(a), std::log(b), s, nu.name());
  }
  const double split = 0.5;
  double total = 0.0;
  if (a < split) {
    total += detail::checked_integral(log_integrand, std::log(a), std::log(std::min(b, split)), s,
                                      nu.name());
  }
  if (b > split) {
    const double lo = std::max(a, split);
    total += detail::checked_integral([&nu](double z) { return nu(z); }, lo, b, s, nu.name());
  }
  return total;
}

/// eta(x) = integral of nu over [x, upper).
inline double exact_tail_mass(const LevyIntensity& nu, double x, const QuadratureSettings& s = {}) {
  if (!(x > 0.0)) throw DomainError(nu.name() + ": tail mass needs x > 0");
  const Domain& d = nu.domain();
  if (d.bounded()) {
    if (x >= d.upper) return 0.0;
    return mass_between(nu, x, d.upper, s);
  }
  if (!std::isfinite(x)) return 0.0;
  const double B = std::max(x, 1.0);
  double total = x < B ? mass_between(nu, x, B, s) : 0.0;
  auto log_integrand = [&nu](double t) {
    const double z = std::exp(t);
    return nu(z) * z;
  };
  total += detail::chunked_integral(log_integrand, std::log(B), 2.0 * std::log(10.0), 700.0, s,
                                    nu.name());
  return total;
}

/// Mean mass of the jumps below t: integral of x nu(x) over (0, t].
inline double small_jump_mean(const LevyIntensity& nu, double t, const QuadratureSettings& s = {}) {
  if (!(t > 0.0)) throw DomainError(nu.name() + ": small_jump_mean needs t > 0");
  auto integrand = [&nu](double u) {
    const double z = std::exp(u);
    return nu(z) * z * z;
  };
  return detail::chunked_integral(integrand, std::log(std::min(t, nu.domain().upper)),
                                  -2.0 * std::log(10.0), std::log(detail::kJumpFloor), s,
                                  nu.name());
}

/// Generalised inverse eta^{-1}(e) by bracketing in log x and Illinois
/// regula falsi on log eta, to relative 1e-10 in x.
inline double exact_invert(const LevyIntensity& nu, double e, const QuadratureSettings& s = {}) {
  if (!(e >= 0.0) || !std::isfinite(e)) throw ParameterError("exact_invert: need finite e >= 0");
  const Domain& d = nu.domain();
  if (e == 0.0) {
    if (d.bounded()) return d.upper;
    e = s.abs_tol;
  }
  const double log_e = std::log(e);
  auto f = [&](double u) {
    const double eta = exact_tail_mass(nu, std::exp(u), s);
    return eta > 0.0 ? std::log(eta) - log_e : -std::numeric_limits<double>::infinity();
  };

  const double u_floor = std::log(detail::kJumpFloor);
  double lo = d.bounded() ? std::log(0.5) : 0.0;
  double f_lo = f(lo);
  double hi = lo;
  double f_hi = f_lo;
  if (f_lo > 0.0) {
    // jump is above the starting point
    if (d.bounded()) {
      hi = 0.0;
      f_hi = -std::numeric_limits<double>::infinity();
    } else {
      double step = 1.0;
      for (;;) {
        hi = lo + step;
        if (hi > 700.0) throw BracketFailure("exact_invert: no bracket below x = e^700");
        f_hi = f(hi);
        if (f_hi <= 0.0) break;
        lo = hi;
        f_lo = f_hi;
        step *= 2.0;
      }
    }
  } else {
    double step = 1.0;
    for (;;) {
      lo = std::max(hi - step, u_floor);
      f_lo = f(lo);
      if (f_lo >= 0.0) break;
      if (lo == u_floor) {
        const double eta_floor = exact_tail_mass(nu, detail::kJumpFloor, s);
        const double eta_mid = exact_tail_mass(nu, 1e-150, s);
        if (eta_floor - eta_mid <= 1e-12 * eta_floor) {
          throw FiniteActivityExhausted("exact_invert: e exceeds the total intensity mass");
        }
        throw RangeExhausted("exact_invert: jump for e = " + std::to_string(e) +
                             " lies below the floating-point range");
      }
      hi = lo;
      f_hi = f_lo;
      step *= 2.0;
    }
  }
  if (f_lo == 0.0) return std::exp(lo);
  if (f_hi == 0.0) return std::exp(hi);

  // Illinois iteration on [lo, hi] with f(lo) > 0 > f(hi).
  int side = 0;
  for (int it = 0; it < 200 && hi - lo > 1e-11; ++it) {
    double u;
    if (std::isfinite(f_lo) && std::isfinite(f_hi)) {
      u = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
      if (!(u > lo && u < hi)) u = 0.5 * (lo + hi);
    } else {
      u = 0.5 * (lo + hi);
    }
    const double fu = f(u);
    if (fu == 0.0) return std::exp(u);
    if (fu > 0.0) {
      lo = u;
      f_lo = fu;
      if (side == -1) f_hi *= 0.5;
      side = -1;
    } else {
      hi = u;
      f_hi = fu;
      if (side == 1) f_lo *= 0.5;
      side = 1;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

inline CrmSample ferguson_klass_sample(const LevyIntensity& nu, Rng& rng, const SamplerBudget& budget,
                                       const QuadratureSettings& s = {}) {
  SampleStreams streams = split_streams(rng);
  CrmSample out;
  std::vector<double> arrivals;
  if (budget.is_count()) {
    arrivals = poisson_arrivals(streams.arrivals, budget.count());
  } else {
    arrivals = poisson_arrivals_until(streams.arrivals, exact_tail_mass(nu, budget.threshold(), s));
  }
  out.jumps.reserve(arrivals.size());
  out.arrivals.reserve(arrivals.size());
  for (double e : arrivals) {
    double j;
    try {
      j = exact_invert(nu, e, s);
    } catch (const FiniteActivityExhausted&) {
      break;
    }
    if (!budget.is_count()) j = std::max(j, budget.threshold());
    if (!out.jumps.empty()) j = std::min(j, out.jumps.back());
    out.jumps.push_back(j);
    out.arrivals.push_back(e);
  }
  out.locations = uniform_locations(streams.locations, out.jumps.size());
  return out;
}

}  // namespace crm
