#pragma once

// Per-bin intensity masses and the piecewise approximation nu~ behind them.
//
// Below x_thr a bin is integrated with a power rule: g(x_k) * int z^{-kappa}
// (mixed method) or nu(x_k) x_k^p * int z^{-p} (trapezium method, p fitted on
// the first trapezium bins). From x_thr up to x_tail the trapezium rule is
// used, and tail bins take the masses of the grid's tail model.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "crm/error.hpp"
#include "crm/grid.hpp"
#include "crm/intensity.hpp"

namespace crm {

/// int_{x0}^{x1} z^{-kappa} dz in closed form.
inline double power_integral(double kappa, double x0, double x1) {
  if (kappa == 1.0) return std::log(x1 / x0);
  // (x0^{1-k} - x1^{1-k}) / (k - 1) = x0^{1-k} (1 - (x1/x0)^{1-k}) / (k - 1)
  const double e = 1.0 - kappa;
  return std::pow(x0, e) * -std::expm1(e * std::log(x1 / x0)) / (kappa - 1.0);
}

inline double bin_mass_mixed(const LevyIntensity& nu, double x0, double x1) {
  const auto& d = nu.decomposition();
  if (!d) throw MissingDecomposition(nu.name() + ": mixed method needs a decomposition x^-kappa g(x)");
  if (!(x0 < x1)) throw ArgumentOrderError("bin_mass_mixed needs x0 < x1");
  return d->g(x0) * power_integral(d->kappa, x0, x1);
}

inline double bin_mass_trapezium(const LevyIntensity& nu, double x0, double x1) {
  if (!(x0 < x1)) throw ArgumentOrderError("bin_mass_trapezium needs x0 < x1");
  return 0.5 * (nu.evaluate(x0) + nu.evaluate(x1)) * (x1 - x0);
}

/// Shape of nu~ on one bin.
struct BinShape {
  enum class Kind { Power, Linear, ExpTail, PolyTail };
  Kind kind = Kind::Linear;
  double u = 0.0;  // Power/PolyTail: prefactor; Linear: nu(left); ExpTail: prefactor
  double v = 0.0;  // Power/PolyTail: exponent;  Linear: nu(right); ExpTail: rate

  [[nodiscard]] double at(double x, double x0, double x1) const {
    switch (kind) {
      case Kind::Power:
      case Kind::PolyTail:
        return u * std::pow(x, -v);
      case Kind::ExpTail:
        return u * std::exp(-v * x);
      case Kind::Linear:
      default:
        return u + (v - u) * (x - x0) / (x1 - x0);
    }
  }
};

/// Bins below the tabulated section, added by lower extension. They carry the
/// power law u x^{-p} fitted to the two leftmost tabulated bins, so points,
/// masses and cumulative masses have closed forms: block point j (0..n) is
/// x_top c^{-j}, block bin j (1..n) spans [x_top c^{-j}, x_top c^{-(j-1)}]
/// and has mass w1 r^{j-1} with r = c^{p-1}.
struct LowerBlock {
  std::size_t n = 0;
  double x_top = 0.0;
  double log_c = 0.0;
  double p = 1.0;
  double u = 0.0;
  double w1 = 0.0;
  double log_r = 0.0;
  double base = 0.0;  // tabulated mass above x_top

  [[nodiscard]] double point(double j) const { return x_top * std::exp(-j * log_c); }
  [[nodiscard]] double mass(double j) const { return w1 * std::exp((j - 1.0) * log_r); }
  /// Mass of block bins 1..j.
  [[nodiscard]] double partial(double j) const {
    if (log_r == 0.0) return w1 * j;
    return w1 * std::expm1(j * log_r) / std::expm1(log_r);
  }
  [[nodiscard]] double cum(double j) const { return base + partial(j); }
};

struct Envelope {
  LevyIntensity intensity;
  Method method = Method::Mixed;
  double x_thr = 0.0;
  double trap_exponent = 0.0;  // p used below x_thr by the trapezium method
  Partition partition;         // tabulated section
  std::vector<double> bin_masses;
  std::vector<double> cum_tail;  // cum_tail[i] = sum_{k >= i} bin_masses[k]
  std::vector<BinShape> shapes;
  LowerBlock lower;

  // Index-based view over the whole grid: block bins first (lowest x), then
  // the tabulated section.
  [[nodiscard]] std::size_t bins() const noexcept { return lower.n + bin_masses.size(); }
  [[nodiscard]] double point(std::size_t i) const {
    return i < lower.n ? lower.point(static_cast<double>(lower.n - i)) : partition.points[i - lower.n];
  }
  [[nodiscard]] double bin_mass(std::size_t i) const {
    return i < lower.n ? lower.mass(static_cast<double>(lower.n - i)) : bin_masses[i - lower.n];
  }
  /// Mass of all bins from point i upwards; cum(bins()) = 0.
  [[nodiscard]] double cum(std::size_t i) const {
    return i < lower.n ? lower.cum(static_cast<double>(lower.n - i)) : cum_tail[i - lower.n];
  }
  [[nodiscard]] BinShape shape(std::size_t i) const {
    return i < lower.n ? BinShape{BinShape::Kind::Power, lower.u, lower.p} : shapes[i - lower.n];
  }
  [[nodiscard]] std::vector<double> all_points() const {
    std::vector<double> v(bins() + 1);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = point(i);
    return v;
  }
  [[nodiscard]] std::vector<double> all_masses() const {
    std::vector<double> v(bins());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = bin_mass(i);
    return v;
  }
  [[nodiscard]] std::vector<double> all_cum() const {
    std::vector<double> v(bins() + 1);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = cum(i);
    return v;
  }

  /// Tabulated points (no lower block).
  [[nodiscard]] const std::vector<double>& points() const noexcept { return partition.points; }
  [[nodiscard]] double x_lower() const { return point(0); }
  [[nodiscard]] double x_upper() const { return partition.points.back(); }
  [[nodiscard]] double total_mass() const { return cum(0); }
};

namespace detail {

inline void rebuild_cum_tail(Envelope& env) {
  const std::size_t nb = env.bin_masses.size();
  env.cum_tail.assign(nb + 1, 0.0);
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t i = nb; i-- > 0;) {
    const double y = env.bin_masses[i] - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    env.cum_tail[i] = sum;
  }
}

/// Power-rule shape below x_thr for bin [x0, x1].
inline BinShape power_shape(const Envelope& env, double x0) {
  if (env.method == Method::Mixed) {
    const auto& d = *env.intensity.decomposition();
    return {BinShape::Kind::Power, d.g(x0), d.kappa};
  }
  const double p = env.trap_exponent;
  return {BinShape::Kind::Power, env.intensity(x0) * std::pow(x0, p), p};
}

inline double power_mass(const BinShape& s, double x0, double x1) {
  if (s.u == 0.0) return 0.0;
  return s.u * power_integral(s.v, x0, x1);
}

// Keeps x^{-p} prefactors finite when x_lower is pushed very low.
inline BinShape power_shape_checked(const Envelope& env, double x0) {
  BinShape s = power_shape(env, x0);
  if (!std::isfinite(s.u)) throw RangeExhausted("envelope: power-rule prefactor overflows");
  return s;
}

/// Exponent of the power law through the two leftmost bins.
inline double leftmost_exponent(const Envelope& env) {
  if (env.bins() < 2) throw RangeExhausted("extend_lower: envelope has fewer than two bins");
  const double w = env.bin_mass(0);
  const double b1 = env.bin_mass(1);
  if (!(w > 0.0) || !(b1 > 0.0)) {
    throw FiniteActivityExhausted("extend_lower: leftmost bins carry no mass");
  }
  return estimate_p(b1 / w, env.point(1) / env.point(0));
}

/// Starts the lower block at the current x_lower (no bins yet).
inline void open_lower_block(Envelope& env) {
  if (env.lower.x_top > 0.0) return;
  const auto& pts = env.partition.points;
  const double p = leftmost_exponent(env);
  LowerBlock& b = env.lower;
  b.x_top = pts[0];
  b.log_c = std::log(pts[1] / pts[0]);
  b.p = p;
  b.u = env.bin_masses[0] / power_integral(p, pts[0], pts[1]);
  b.log_r = (p - 1.0) * b.log_c;
  b.w1 = env.bin_masses[0] * std::exp(b.log_r);
  b.base = env.cum_tail[0];
  b.n = 0;
}

// Lowest usable grid point.
inline constexpr double kGridFloor = 1e-300;

inline std::size_t max_block_bins(const LowerBlock& b) {
  return static_cast<std::size_t>(std::floor((std::log(b.x_top) - std::log(kGridFloor)) / b.log_c));
}

}  // namespace detail

/// Bin masses, nu~ shapes and the cumulative tail table over `part`.
inline Envelope build_envelope(const LevyIntensity& nu, const GridConfig& cfg, Partition part) {
  cfg.validate();
  Envelope env{nu, cfg.method, cfg.resolved_x_thr(), 0.0, std::move(part), {}, {}, {}, {}};
  if (env.method == Method::Mixed && !nu.decomposition()) {
    throw MissingDecomposition(nu.name() + ": mixed method needs a decomposition x^-kappa g(x)");
  }
  auto& pts = env.partition.points;
  if (pts.size() < 2) throw ParameterError("envelope: partition needs at least two points");

  // split the bin straddling x_thr
  const double thr = env.x_thr;
  if (thr > pts.front() && thr < env.partition.x_tail) {
    const auto it = std::lower_bound(pts.begin(), pts.end(), thr);
    if (*it != thr) {
      const auto at = static_cast<std::size_t>(it - pts.begin());
      pts.insert(it, thr);
      if (env.partition.tail_index >= at) ++env.partition.tail_index;
    }
  }

  const std::size_t nb = pts.size() - 1;
  const std::size_t tail_at = env.partition.tail_index;
  env.bin_masses.assign(nb, 0.0);
  env.shapes.assign(nb, BinShape{});

  // trapezium bins between x_thr and x_tail
  std::size_t first_trap = nb;
  for (std::size_t i = 0; i < std::min(nb, tail_at); ++i) {
    if (pts[i] < thr) continue;
    if (first_trap == nb) first_trap = i;
    const double nl = nu.evaluate(pts[i]);
    const double nr = nu.evaluate(pts[i + 1]);
    env.shapes[i] = {BinShape::Kind::Linear, nl, nr};
    env.bin_masses[i] = 0.5 * (nl + nr) * (pts[i + 1] - pts[i]);
  }

  if (env.method == Method::Trapezium) {
    // exponent for the power rule from the two leftmost trapezium bins
    double p = 1.0;
    if (first_trap + 1 < std::min(nb, tail_at)) {
      const double b0 = env.bin_masses[first_trap];
      const double b1 = env.bin_masses[first_trap + 1];
      const double c = pts[first_trap + 1] / pts[first_trap];
      if (b0 > 0.0 && b1 > 0.0) p = estimate_p(b1 / b0, c);
    }
    env.trap_exponent = p;
  }

  // power-rule bins below x_thr
  for (std::size_t i = 0; i < std::min(nb, tail_at); ++i) {
    if (pts[i] >= thr) break;
    env.shapes[i] = detail::power_shape_checked(env, pts[i]);
    env.bin_masses[i] = detail::power_mass(env.shapes[i], pts[i], pts[i + 1]);
  }

  // tail bins: model masses and model density
  const TailModel& tm = env.partition.tail_model;
  for (std::size_t i = tail_at; i < nb; ++i) {
    const std::size_t j = i - tail_at;
    const double m = j < env.partition.tail_masses.size() ? env.partition.tail_masses[j] : 0.0;
    env.bin_masses[i] = m;
    if (tm.kind == TailModel::Kind::Exponential) {
      const double a = tm.a;
      // u e^{-ax} integrates to m over the bin
      const double w = pts[i + 1] - pts[i];
      const double u = m > 0.0 ? m * a / (std::exp(-a * pts[i]) * -std::expm1(-a * w)) : 0.0;
      env.shapes[i] = {BinShape::Kind::ExpTail, u, a};
    } else {
      const double p = tm.p;
      const double u = m > 0.0 ? m / power_integral(p, pts[i], pts[i + 1]) : 0.0;
      env.shapes[i] = {BinShape::Kind::PolyTail, u, p};
    }
  }

  for (double m : env.bin_masses) {
    if (!(m >= 0.0) || !std::isfinite(m)) {
      throw DomainError(nu.name() + ": negative or non-finite bin mass; intensity must be >= 0");
    }
  }
  detail::rebuild_cum_tail(env);
  return env;
}

inline Envelope build_envelope(const LevyIntensity& nu, const GridConfig& cfg) {
  return build_envelope(nu, cfg, build_partition(nu, cfg));
}

/// Index of the bin containing x in [x_lower, x_upper] (the upper bin on knots).
inline std::size_t find_bin(const Envelope& env, double x) {
  if (!(x >= env.x_lower() && x <= env.x_upper())) {
    throw OutOfRange("envelope: x outside [x_lower, x_upper]");
  }
  const auto& pts = env.points();
  if (x < pts.front()) {
    const LowerBlock& b = env.lower;
    // block bin j holds x when x_top c^{-j} <= x < x_top c^{-(j-1)}
    auto j = static_cast<std::size_t>(std::ceil(std::log(b.x_top / x) / b.log_c));
    j = std::clamp<std::size_t>(j, 1, b.n);
    while (j > 1 && x >= b.point(static_cast<double>(j - 1))) --j;
    while (j < b.n && x < b.point(static_cast<double>(j))) ++j;
    return b.n - j;
  }
  auto it = std::upper_bound(pts.begin(), pts.end(), x);
  std::size_t i = static_cast<std::size_t>(it - pts.begin()) - 1;
  if (i >= env.bin_masses.size()) i = env.bin_masses.size() - 1;
  return env.lower.n + i;
}

/// nu~(x) on [x_lower, x_upper].
inline double approx_intensity(const Envelope& env, double x) {
  const std::size_t i = find_bin(env, x);
  return env.shape(i).at(x, env.point(i), env.point(i + 1));
}

/// Adds geometric bins below x_lower until the tabulated mass reaches e_max.
/// The bins follow the power law fitted on the two leftmost bins; their count
/// comes from lower_extension_count.
inline void extend_lower(Envelope& env, double e_max) {
  if (!(env.total_mass() < e_max)) return;
  detail::open_lower_block(env);
  LowerBlock& b = env.lower;
  const double c = std::exp(b.log_c);
  // counting from the first block bin, whose mass is w1
  const std::size_t cap = detail::max_block_bins(b);
  std::size_t n = 0;
  try {
    n = lower_extension_count(b.p, c, b.w1, e_max - b.base);
  } catch (const FiniteActivityExhausted&) {
    // finite remaining mass: keep the bins that still carry mass, then stop
    const double keep = b.log_r < 0.0 ? std::ceil(std::log(1e-17) / b.log_r) : 0.0;
    b.n = std::max(b.n, std::min(cap, static_cast<std::size_t>(keep)));
    throw;
  }
  if (n > cap) {
    b.n = std::max(b.n, cap);
    throw RangeExhausted("extend_lower: jumps for arrival " + std::to_string(e_max) +
                         " lie below the floating-point range");
  }
  b.n = std::max(b.n, n);
  // guard the rounding of the closed-form count
  while (b.cum(static_cast<double>(b.n)) < e_max && b.n < cap) ++b.n;
  if (!(env.total_mass() >= e_max)) {
    throw FiniteActivityExhausted("extend_lower: arrival exceeds the total intensity mass");
  }
}

/// Extends below x_lower until x_target is a grid point or lies above x_lower.
inline void extend_lower_to(Envelope& env, double x_target) {
  if (!(x_target > 0.0)) throw ParameterError("extend_lower_to: target must be > 0");
  if (x_target >= env.x_lower()) return;
  detail::open_lower_block(env);
  LowerBlock& b = env.lower;
  const double steps = std::ceil(std::log(b.x_top / x_target) / b.log_c - 1e-9);
  if (steps > static_cast<double>(detail::max_block_bins(b))) {
    throw RangeExhausted("extend_lower_to: target below the floating-point floor");
  }
  b.n = std::max(b.n, static_cast<std::size_t>(steps));
}

}  // namespace crm
