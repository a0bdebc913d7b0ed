#pragma once

// Approximate Ferguson-Klass sampling on a prebuilt envelope: unit Poisson
// arrivals, inversion of the tabulated tail mass by linear interpolation, and
// extension below x_lower when the arrivals run past the tabulated mass.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <vector>

#include "crm/crm_sample.hpp"
#include "crm/error.hpp"
#include "crm/grid.hpp"
#include "crm/quadrature.hpp"
#include "crm/rng.hpp"

namespace crm {

/// Piecewise-linear tail mass of the envelope at x in [x_lower, x_upper].
inline double interpolated_tail_mass(const Envelope& env, double x) {
  if (x < env.x_lower()) throw OutOfRange("interpolated_tail_mass: x below x_lower");
  if (x >= env.x_upper()) return 0.0;
  const std::size_t i = find_bin(env, x);
  const double x0 = env.point(i);
  const double frac = (x - x0) / (env.point(i + 1) - x0);
  return env.cum(i) - frac * env.bin_mass(i);
}

/// Jump for arrival e on the current grid; e must not exceed the total mass.
inline double lookup_jump(const Envelope& env, double e) {
  if (!(e >= 0.0)) throw ParameterError("invert_tail: arrival must be >= 0");
  const auto& cum = env.cum_tail;
  if (e <= cum.front()) {
    // first index with cum < e; cum is non-increasing
    const auto it = std::partition_point(cum.begin(), cum.end(), [e](double v) { return v >= e; });
    if (it == cum.end()) return env.x_upper();
    const auto i = static_cast<std::size_t>(it - cum.begin()) - 1;
    const auto& pts = env.points();
    const double frac = (cum[i] - e) / (cum[i] - cum[i + 1]);
    return pts[i] + frac * (pts[i + 1] - pts[i]);
  }
  const LowerBlock& b = env.lower;
  if (b.n == 0 || e > b.cum(static_cast<double>(b.n))) {
    throw OutOfRange("invert_tail: arrival exceeds the tabulated mass");
  }
  // smallest block index j with cum(j) >= e
  const double need = e - b.base;
  double j;
  if (b.log_r == 0.0) {
    j = std::ceil(need / b.w1);
  } else {
    j = std::ceil(std::log1p(need * std::expm1(b.log_r) / b.w1) / b.log_r);
  }
  const auto n = static_cast<double>(b.n);
  j = std::clamp(j, 1.0, n);
  while (j > 1.0 && b.cum(j - 1.0) >= e) j -= 1.0;
  while (j < n && b.cum(j) < e) j += 1.0;
  const double lo = b.point(j);
  const double hi = b.point(j - 1.0);
  const double frac = std::clamp((b.cum(j) - e) / b.mass(j), 0.0, 1.0);
  return lo + frac * (hi - lo);
}

/// Jump for arrival e, extending the grid below x_lower first if needed.
inline double invert_tail(Envelope& env, double e) {
  if (e > env.total_mass()) extend_lower(env, e);
  return lookup_jump(env, e);
}

namespace detail {

// Samples from `env`; `local` holds a writable copy once an extension is needed
// (or already holds env itself when the caller owns it).
inline CrmSample sample_envelope(const Envelope& env, std::optional<Envelope>& local, Rng& rng,
                                 const SamplerBudget& budget) {
  SampleStreams streams = split_streams(rng);
  const Envelope* cur = local ? &*local : &env;
  auto writable = [&]() -> Envelope& {
    if (!local) local = env;
    cur = &*local;
    return *local;
  };

  std::vector<double> arrivals;
  if (budget.is_count()) {
    arrivals = poisson_arrivals(streams.arrivals, budget.count());
    if (!arrivals.empty() && arrivals.back() > cur->total_mass()) {
      try {
        extend_lower(writable(), arrivals.back());
      } catch (const FiniteActivityExhausted&) {
        const double total = cur->total_mass();
        arrivals.erase(std::upper_bound(arrivals.begin(), arrivals.end(), total), arrivals.end());
      }
    }
  } else {
    const double t = budget.threshold();
    if (t < cur->x_lower()) extend_lower_to(writable(), t);
    const double e_stop = t >= cur->x_upper() ? 0.0 : interpolated_tail_mass(*cur, t);
    arrivals = poisson_arrivals_until(streams.arrivals, e_stop);
  }

  CrmSample out;
  out.jumps.reserve(arrivals.size());
  for (double e : arrivals) {
    double j = lookup_jump(*cur, e);
    if (!budget.is_count()) j = std::max(j, budget.threshold());
    out.jumps.push_back(j);
  }
  out.arrivals = std::move(arrivals);
  out.locations = uniform_locations(streams.locations, out.jumps.size());
  return out;
}

}  // namespace detail

/// Draws a CRM from a prebuilt envelope. The envelope is not modified; a copy
/// is extended when the budget reaches below x_lower.
inline CrmSample resample(const Envelope& env, Rng& rng, const SamplerBudget& budget) {
  std::optional<Envelope> local;
  return detail::sample_envelope(env, local, rng, budget);
}

inline CrmSample sample(const LevyIntensity& nu, const GridConfig& cfg, Rng& rng,
                        const SamplerBudget& budget) {
  std::optional<Envelope> env = build_envelope(nu, cfg);
  return detail::sample_envelope(*env, env, rng, budget);
}

}  // namespace crm
