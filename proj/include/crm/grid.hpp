#pragma once

// Adaptive partition x_0 < ... < x_n of the jump axis: a geometric section
// from x_lower, an optional exponential or polynomial tail section out to
// x_upper, and the bin counts needed to push x_lower down when arrivals run
// past the tabulated mass.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "crm/error.hpp"
#include "crm/intensity.hpp"
#include "crm/reference.hpp"

namespace crm {

enum class Method { Mixed, Trapezium };

inline const char* to_string(Method m) { return m == Method::Mixed ? "mixed" : "trapezium"; }

struct GridConfig {
  Method method = Method::Mixed;
  std::optional<double> x_lower;  // default 1e-10 (mixed), 1e-5 (trapezium)
  std::size_t n_points = 1000;    // points of the initial geometric section
  std::optional<double> spacing;  // geometric multiplier c; overrides n_points
  double eps_tail = 1e-10;
  std::optional<double> x_thr;  // default 1e-5 (mixed), initial x_lower (trapezium)
  double tail_search_tol = 1e-8;
  QuadratureSettings quadrature{};

  /// Config whose initial section has `bins` bins (bins + 1 points).
  static GridConfig with_bins(std::size_t bins, Method method = Method::Mixed) {
    GridConfig cfg;
    cfg.method = method;
    cfg.n_points = bins + 1;
    return cfg;
  }

  [[nodiscard]] double resolved_x_lower() const {
    return x_lower.value_or(method == Method::Mixed ? 1e-10 : 1e-5);
  }
  [[nodiscard]] double resolved_x_thr() const {
    return x_thr.value_or(method == Method::Mixed ? 1e-5 : resolved_x_lower());
  }

  void validate() const {
    const double lo = resolved_x_lower();
    if (!(lo > 0.0 && lo < 1.0)) throw ParameterError("grid: x_lower must lie in (0, 1)");
    if (!spacing && n_points < 2) throw ParameterError("grid: n_points must be >= 2");
    if (spacing && !(*spacing > 1.0 && std::isfinite(*spacing))) {
      throw ParameterError("grid: spacing c must be > 1");
    }
    if (!(eps_tail > 0.0)) throw ParameterError("grid: eps_tail must be > 0");
    if (!(tail_search_tol > 0.0)) throw ParameterError("grid: tail_search_tol must be > 0");
    if (!(resolved_x_thr() >= lo)) throw ParameterError("grid: x_thr must be >= x_lower");
    quadrature.validate();
  }
};

struct TailModel {
  enum class Kind { None, Exponential, Polynomial };
  Kind kind = Kind::None;
  double a = 0.0;   // exponential rate
  double dx = 0.0;  // exponential point spacing
  double p = 0.0;   // polynomial exponent
  double K = 0.0;   // polynomial bin-mass ratio c^{1-p}

  static TailModel none() { return {}; }
  static TailModel exponential(double a, double dx) { return {Kind::Exponential, a, dx, 0.0, 0.0}; }
  static TailModel polynomial(double p, double K) { return {Kind::Polynomial, 0.0, 0.0, p, K}; }
};

inline const char* to_string(TailModel::Kind k) {
  switch (k) {
    case TailModel::Kind::Exponential:
      return "exponential";
    case TailModel::Kind::Polynomial:
      return "polynomial";
    default:
      return "none";
  }
}

struct Partition {
  std::vector<double> points;
  double x_tail = 1.0;
  double x_upper = 1.0;
  double c = 1.0;
  TailModel tail_model;
  std::size_t tail_index = 0;       // index of x_tail in points
  std::vector<double> tail_masses;  // model masses of the bins from x_tail on
};

// --- geometric section -------------------------------------------------------

inline double geometric_ratio(double x_lo, double x_hi, std::size_t n) {
  if (!(x_lo > 0.0) || !(x_lo < x_hi)) throw ArgumentOrderError("geometric grid needs 0 < x_lo < x_hi");
  if (n < 2) throw ParameterError("geometric grid needs n >= 2");
  return std::pow(10.0, std::log10(x_hi / x_lo) / static_cast<double>(n - 1));
}

/// n points from x_lo to x_hi with constant ratio; both endpoints exact.
inline std::vector<double> geometric_points(double x_lo, double x_hi, std::size_t n) {
  const double c = geometric_ratio(x_lo, x_hi, n);
  const double log_c = std::log(c);
  std::vector<double> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i] = x_lo * std::exp(static_cast<double>(i) * log_c);
  pts.front() = x_lo;
  pts.back() = x_hi;
  return pts;
}

/// Number of initial points over [x_lo, x_hi] for the configured n_points or spacing.
inline std::size_t section_points(const GridConfig& cfg, double x_lo, double x_hi) {
  if (!cfg.spacing) return cfg.n_points;
  const double n = std::round(std::log(x_hi / x_lo) / std::log(*cfg.spacing)) + 1.0;
  return static_cast<std::size_t>(std::max(2.0, n));
}

// --- tail handling -----------------------------------------------------------

/// Smallest x (to relative 1e-3, from above) with eta(x) < eps_tail.
inline double choose_x_upper(const LevyIntensity& nu, double eps_tail,
                             const QuadratureSettings& s = {}) {
  if (nu.domain().bounded()) return nu.domain().upper;
  if (!(eps_tail > 0.0)) throw ParameterError("choose_x_upper: eps_tail must be > 0");
  constexpr double cap = 1e6;
  auto eta = [&](double x) { return exact_tail_mass(nu, x, s); };
  double lo = 1.0;
  double hi = 1.0;
  if (eta(hi) < eps_tail) {
    lo = 0.5;
    while (eta(lo) < eps_tail) {
      hi = lo;
      lo *= 0.5;
      if (lo < 1e-300) return hi;
    }
  } else {
    for (;;) {
      lo = hi;
      hi = std::min(2.0 * hi, cap);
      double v;
      try {
        v = eta(hi);
      } catch (const NonIntegrableTail&) {
        throw NonIntegrableTail(nu.name() + ": tail mass is not integrable");
      }
      if (v < eps_tail) break;
      if (hi >= cap) {
        throw NonIntegrableTail(nu.name() + ": tail mass stays above eps_tail up to x = 1e6");
      }
    }
  }
  while (hi - lo > 1e-3 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (eta(mid) < eps_tail) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

/// k(a, dx): ratio of adjacent bin masses of e^{-ax} over spacing dx.
inline double exponential_ratio(double a, double dx) {
  const double y = a * dx;
  if (y < 1e-8) return 1.0 + y + 0.5 * y * y;
  return std::expm1(y) / -std::expm1(-y);
}

/// p = 1 - log_c K.
inline double estimate_p(double K, double c) {
  if (!(K > 0.0) || !(c > 1.0)) throw ParameterError("estimate_p needs K > 0 and c > 1");
  return 1.0 - std::log(K) / std::log(c);
}

/// Least-squares rate a of log nu(x) ~ b - a x over n points of [x0, x1].
inline double fit_exponential_rate(const LevyIntensity& nu, double x0, double x1, int n = 8) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int used = 0;
  for (int i = 0; i < n; ++i) {
    const double x = x0 + (x1 - x0) * i / (n - 1);
    const double v = nu(x);
    if (!(v > 0.0) || !std::isfinite(v)) continue;
    const double y = std::log(v);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++used;
  }
  if (used < 2) return std::numeric_limits<double>::quiet_NaN();
  const double denom = used * sxx - sx * sx;
  return -(used * sxy - sx * sy) / denom;
}

struct TailExtension {
  std::vector<double> points;  // appended after x_tail
  std::vector<double> masses;  // one per bin starting at x_tail
};

/// Equally spaced points from x_tail to x_upper; masses decay geometrically
/// (ratio 1/k(a, dx)) from the quadrature mass of the first bin.
inline TailExtension extend_exponential_tail(const Partition& part, const LevyIntensity& nu, double a,
                                             const QuadratureSettings& s = {}) {
  if (!(a > 0.0)) throw ParameterError("exponential tail needs a > 0");
  TailExtension out;
  const double width = part.x_upper - part.x_tail;
  if (!(width > 0.0)) return out;
  double dx = part.tail_model.dx > 0.0 ? part.tail_model.dx : width;
  const auto m = static_cast<std::size_t>(std::max(1.0, std::ceil(width / dx * (1.0 - 1e-12))));
  dx = width / static_cast<double>(m);
  const double k = exponential_ratio(a, dx);
  double mass = mass_between(nu, part.x_tail, part.x_tail + dx, s);
  for (std::size_t j = 1; j <= m; ++j) {
    out.points.push_back(j == m ? part.x_upper : part.x_tail + dx * static_cast<double>(j));
    out.masses.push_back(mass);
    mass /= k;
  }
  return out;
}

/// Geometric points with ratio c from x_tail until the remaining model mass
/// is below eps_tail; masses follow ratio K = c^{1-p} from the first bin.
inline TailExtension extend_polynomial_tail(const Partition& part, const LevyIntensity& nu, double p,
                                            double eps_tail, const QuadratureSettings& s = {}) {
  if (!(p > 1.0)) {
    throw NonIntegrableTail(nu.name() + ": polynomial tail with p <= 1 has infinite mass");
  }
  const double c = part.c;
  const double K = std::pow(c, 1.0 - p);
  const double b1 = mass_between(nu, part.x_tail, part.x_tail * c, s);
  TailExtension out;
  if (!(b1 > 0.0)) return out;
  // remaining mass after m bins: b1 K^m / (1 - K)
  const double m_real = std::ceil(std::log(eps_tail * (1.0 - K) / b1) / std::log(K));
  const auto m = static_cast<std::size_t>(std::max(1.0, m_real));
  if (std::log(part.x_tail) + static_cast<double>(m) * std::log(c) > std::log(1e300)) {
    throw NonIntegrableTail(nu.name() + ": polynomial tail reaches past 1e300");
  }
  double mass = b1;
  const double log_c = std::log(c);
  for (std::size_t j = 1; j <= m; ++j) {
    out.points.push_back(part.x_tail * std::exp(static_cast<double>(j) * log_c));
    out.masses.push_back(mass);
    mass *= K;
  }
  return out;
}

struct TailDetection {
  double x_tail = 1.0;
  TailModel model;
};

/// Grid search over x_tail in {1, 2, 4, ..., 1024}. At each candidate the
/// exponential and polynomial extension masses are compared with quadrature of
/// the tail; the first candidate whose better model is within tail_search_tol
/// (relative to max(1, eta)) is returned.
inline TailDetection detect_tail(const LevyIntensity& nu, const GridConfig& cfg) {
  if (nu.domain().bounded()) return {nu.domain().upper, TailModel::none()};
  QuadratureSettings qs = cfg.quadrature;
  qs.abs_tol = std::min(qs.abs_tol, cfg.eps_tail / 10.0);
  const double x_lower = cfg.resolved_x_lower();
  const TailHint hint = nu.tail_hint();
  const bool try_exp = hint != TailHint::Polynomial;
  const bool try_poly = hint != TailHint::Exponential;

  for (int e = 0; e <= 10; ++e) {
    const double xt = std::ldexp(1.0, e);
    if (xt <= x_lower) continue;
    const double exact = exact_tail_mass(nu, xt, qs);
    if (exact < cfg.eps_tail) return {xt, TailModel::none()};
    const double tol = cfg.tail_search_tol * std::max(1.0, exact);

    std::optional<TailModel> best;
    double best_err = std::numeric_limits<double>::infinity();
    if (try_exp) {
      const double a = fit_exponential_rate(nu, xt, 2.0 * xt);
      if (a > 0.0 && std::isfinite(a)) {
        const double dx = 0.05 / a;
        const double b1 = mass_between(nu, xt, xt + dx, qs);
        const double model = b1 / -std::expm1(-a * dx);
        const double err = std::abs(model - exact);
        if (err < best_err) {
          best_err = err;
          best = TailModel::exponential(a, dx);
        }
      }
    }
    if (try_poly) {
      const double c = geometric_ratio(x_lower, xt, section_points(cfg, x_lower, xt));
      const double b1 = mass_between(nu, xt, c * xt, qs);
      const double b2 = mass_between(nu, c * xt, c * c * xt, qs);
      if (b1 > 0.0 && b2 > 0.0 && b2 < b1) {
        const double K = b2 / b1;
        const double p = estimate_p(K, c);
        const double model = b1 / (1.0 - K);
        const double err = std::abs(model - exact);
        if (p > 1.0 && err < best_err) {
          best_err = err;
          best = TailModel::polynomial(p, K);
        }
      }
    }
    if (best && best_err <= tol) return {xt, *best};
  }
  throw TailDetectionFailure(nu.name() + ": no tail model matched the quadrature tail mass");
}

/// Initial partition: geometric section from x_lower to the anchor (1 on the
/// unit interval, x_tail on the half line) plus the detected tail section.
inline Partition build_partition(const LevyIntensity& nu, const GridConfig& cfg) {
  cfg.validate();
  const double x_lower = cfg.resolved_x_lower();
  Partition part;
  if (nu.domain().bounded()) {
    const std::size_t n = section_points(cfg, x_lower, 1.0);
    part.points = geometric_points(x_lower, 1.0, n);
    part.c = geometric_ratio(x_lower, 1.0, n);
    part.x_tail = part.x_upper = 1.0;
    part.tail_index = part.points.size() - 1;
    return part;
  }

  std::optional<TailDetection> det;
  try {
    det = detect_tail(nu, cfg);
  } catch (const TailDetectionFailure&) {
    det.reset();
  }
  if (!det) {
    // no usable tail model: geometric grid all the way to x_upper
    const double x_upper = std::max(choose_x_upper(nu, cfg.eps_tail, cfg.quadrature), 2.0 * x_lower);
    const std::size_t n = section_points(cfg, x_lower, x_upper);
    part.points = geometric_points(x_lower, x_upper, n);
    part.c = geometric_ratio(x_lower, x_upper, n);
    part.x_tail = part.x_upper = x_upper;
    part.tail_index = part.points.size() - 1;
    return part;
  }

  const double xt = det->x_tail;
  const std::size_t n = section_points(cfg, x_lower, xt);
  part.points = geometric_points(x_lower, xt, n);
  part.c = geometric_ratio(x_lower, xt, n);
  part.x_tail = xt;
  part.x_upper = xt;
  part.tail_model = det->model;
  part.tail_index = part.points.size() - 1;

  TailExtension ext;
  if (det->model.kind == TailModel::Kind::Exponential) {
    part.x_upper = std::max(xt, choose_x_upper(nu, cfg.eps_tail, cfg.quadrature));
    ext = extend_exponential_tail(part, nu, det->model.a, cfg.quadrature);
  } else if (det->model.kind == TailModel::Kind::Polynomial) {
    // recompute K on the final c so the model mass ratio matches the points
    const double b1 = mass_between(nu, xt, part.c * xt, cfg.quadrature);
    const double b2 = mass_between(nu, part.c * xt, part.c * part.c * xt, cfg.quadrature);
    const double p = estimate_p(b2 / b1, part.c);
    part.tail_model = TailModel::polynomial(p, std::pow(part.c, 1.0 - p));
    ext = extend_polynomial_tail(part, nu, p, cfg.eps_tail, cfg.quadrature);
  }
  part.points.insert(part.points.end(), ext.points.begin(), ext.points.end());
  part.tail_masses = std::move(ext.masses);
  if (!ext.points.empty()) part.x_upper = part.points.back();
  return part;
}

/// Number of geometric bins to add below x_lower so that the added polynomial
/// model mass covers `needed`, given the leftmost bin mass w and exponent p:
///   p != 1: ceil(log_{c^{p-1}}(1 - (needed / w)(1 - c^{p-1})))
///   p == 1: ceil(needed / w)
inline std::size_t lower_extension_count(double p, double c, double w, double needed) {
  if (!(w > 0.0)) throw FiniteActivityExhausted("lower extension: leftmost bin has zero mass");
  if (!(c > 1.0)) throw ParameterError("lower extension needs c > 1");
  if (!(needed > 0.0)) return 0;
  const double r_minus_1 = std::expm1((p - 1.0) * std::log(c));
  double n;
  if (r_minus_1 == 0.0) {
    n = std::ceil(needed / w);
  } else {
    const double arg = (needed / w) * r_minus_1;  // argument minus one
    if (!(arg > -1.0)) {
      throw FiniteActivityExhausted("lower extension: needed mass exceeds the total intensity mass");
    }
    n = std::ceil(std::log1p(arg) / std::log1p(r_minus_1) * (1.0 - 1e-12));
  }
  if (!std::isfinite(n) || n > 1e9) {
    throw RangeExhausted("lower extension: required bin count is not representable");
  }
  return static_cast<std::size_t>(std::max(1.0, n));
}

}  // namespace crm
