#pragma once

// Levy intensities of completely random measures: the evaluatable jump
// intensity nu, its domain, and the optional split nu(x) = x^{-kappa} g(x)
// used by the mixed integration rule.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "crm/error.hpp"

namespace crm {

enum class DomainKind { UnitInterval, PositiveHalfLine };

struct Domain {
  DomainKind kind = DomainKind::PositiveHalfLine;
  double upper = std::numeric_limits<double>::infinity();

  static constexpr Domain unit_interval() { return {DomainKind::UnitInterval, 1.0}; }
  static constexpr Domain positive_half_line() {
    return {DomainKind::PositiveHalfLine, std::numeric_limits<double>::infinity()};
  }

  [[nodiscard]] constexpr bool bounded() const noexcept {
    return kind == DomainKind::UnitInterval;
  }
};

/// nu(x) = x^{-kappa} * g(x) with kappa >= 1.
struct Decomposition {
  double kappa = 1.0;
  std::function<double(double)> g;
};

enum class TailHint { Exponential, Polynomial, Auto };

using IntensityFunction = std::function<double(double)>;

class LevyIntensity {
 public:
  LevyIntensity(IntensityFunction fn, Domain domain, std::optional<Decomposition> decomposition,
                TailHint tail_hint, std::string name = "custom")
      : fn_(std::move(fn)),
        domain_(domain),
        decomposition_(std::move(decomposition)),
        tail_hint_(tail_hint),
        name_(std::move(name)) {}

  /// Checked evaluation. x must lie in (0, upper); x == 1 on the unit interval
  /// is accepted only where nu is finite there.
  [[nodiscard]] double evaluate(double x) const {
    if (!(x > 0.0) || !(x <= domain_.upper) || (!domain_.bounded() && !std::isfinite(x))) {
      throw DomainError(name_ + ": x = " + std::to_string(x) + " is outside the domain");
    }
    const double v = fn_(x);
    if (!std::isfinite(v)) {
      throw DomainError(name_ + ": intensity is not finite at x = " + std::to_string(x));
    }
    return v;
  }

  /// Unchecked evaluation for inner quadrature loops.
  [[nodiscard]] double operator()(double x) const { return fn_(x); }

  [[nodiscard]] const Domain& domain() const noexcept { return domain_; }
  [[nodiscard]] const std::optional<Decomposition>& decomposition() const noexcept {
    return decomposition_;
  }
  [[nodiscard]] TailHint tail_hint() const noexcept { return tail_hint_; }
  [[nodiscard]] const std::string& name() const noexcept { return name_; }

 private:
  IntensityFunction fn_;
  Domain domain_;
  std::optional<Decomposition> decomposition_;
  TailHint tail_hint_;
  std::string name_;
};

// --- parameter sets of the standard processes --------------------------------

struct GammaParams {
  double M = 1.0;
};
struct SigmaStableParams {
  double sigma = 0.5;
};
struct BetaParams {
  double M = 1.0;
  double c = 1.0;
};
struct GeneralizedGammaParams {
  double M = 1.0;
  double sigma = 0.5;
  double a = 1.0;
};
struct StableBetaParams {
  double M = 1.0;
  double sigma = 0.5;
  double c = 1.0;
};

using ProcessParams = std::variant<GammaParams, SigmaStableParams, BetaParams,
                                   GeneralizedGammaParams, StableBetaParams>;

inline std::optional<Decomposition> decompose(const LevyIntensity& intensity) {
  return intensity.decomposition();
}

/// Wraps a user intensity. When a decomposition is supplied it is checked
/// against `fn` at 16 log-spaced interior points (relative tolerance 1e-9).
inline LevyIntensity make_custom(IntensityFunction fn, Domain domain,
                                 std::optional<Decomposition> decomposition = std::nullopt,
                                 TailHint tail_hint = TailHint::Auto,
                                 std::string name = "custom") {
  if (!fn) throw ParameterError("make_custom: empty intensity function");
  if (!(domain.upper > 0.0)) throw ParameterError("make_custom: domain upper bound must be > 0");
  if (domain.bounded() && domain.upper != 1.0) {
    throw ParameterError("make_custom: unit-interval domain must have upper = 1");
  }
  if (decomposition) {
    if (!decomposition->g) throw ParameterError("make_custom: decomposition without g");
    if (!(decomposition->kappa >= 1.0)) {
      throw ParameterError("make_custom: decomposition requires kappa >= 1");
    }
    const double lo = 1e-8;
    const double hi = domain.bounded() ? 0.999 : 1e2;
    for (int i = 0; i < 16; ++i) {
      const double x = lo * std::pow(hi / lo, i / 15.0);
      const double direct = fn(x);
      const double recomposed = std::pow(x, -decomposition->kappa) * decomposition->g(x);
      const double scale = std::max(std::abs(direct), std::abs(recomposed));
      if (std::abs(direct - recomposed) > 1e-9 * scale) {
        throw DecompositionMismatch(name + ": x^-kappa g(x) disagrees with nu(x) at x = " +
                                    std::to_string(x));
      }
    }
  }
  return LevyIntensity(std::move(fn), domain, std::move(decomposition), tail_hint,
                       std::move(name));
}

namespace detail {

inline void require(bool ok, const char* process, const char* constraint) {
  if (!ok) throw ParameterError(std::string(process) + ": parameter constraint violated: " + constraint);
}

inline bool positive(double v) { return std::isfinite(v) && v > 0.0; }
inline bool open_unit(double v) { return std::isfinite(v) && v > 0.0 && v < 1.0; }

}  // namespace detail

/// Intensities of the standard processes:
///   gamma         M x^{-1} e^{-x}
///   sigma-stable  sigma / Gamma(1-sigma) x^{-1-sigma}
///   beta          M c x^{-1} (1-x)^{c-1}                          on (0,1)
///   gen. gamma    M a^{1-sigma} / Gamma(1-sigma) x^{-1-sigma} e^{-ax}
///   stable-beta   M Gamma(1+c) / (Gamma(1-sigma) Gamma(c+sigma)) x^{-1-sigma} (1-x)^{c+sigma-1}
inline LevyIntensity make_standard(const ProcessParams& params) {
  struct Visitor {
    LevyIntensity operator()(const GammaParams& p) const {
      detail::require(detail::positive(p.M), "gamma", "M > 0");
      const double M = p.M;
      return LevyIntensity([M](double x) { return M * std::exp(-x) / x; },
                           Domain::positive_half_line(),
                           Decomposition{1.0, [M](double x) { return M * std::exp(-x); }},
                           TailHint::Exponential, "gamma");
    }
    LevyIntensity operator()(const SigmaStableParams& p) const {
      detail::require(detail::open_unit(p.sigma), "sigma-stable", "0 < sigma < 1");
      const double s = p.sigma;
      const double C = s * std::exp(-std::lgamma(1.0 - s));
      return LevyIntensity([C, s](double x) { return C * std::pow(x, -1.0 - s); },
                           Domain::positive_half_line(),
                           Decomposition{1.0 + s, [C](double) { return C; }},
                           TailHint::Polynomial, "sigma-stable");
    }
    LevyIntensity operator()(const BetaParams& p) const {
      detail::require(detail::positive(p.M), "beta", "M > 0");
      detail::require(detail::positive(p.c), "beta", "c > 0");
      const double M = p.M;
      const double c = p.c;
      return LevyIntensity([M, c](double x) { return M * c * std::pow(1.0 - x, c - 1.0) / x; },
                           Domain::unit_interval(),
                           Decomposition{1.0, [M, c](double x) {
                                           return M * c * std::pow(1.0 - x, c - 1.0);
                                         }},
                           TailHint::Auto, "beta");
    }
    LevyIntensity operator()(const GeneralizedGammaParams& p) const {
      detail::require(detail::positive(p.M), "generalized gamma", "M > 0");
      detail::require(detail::open_unit(p.sigma), "generalized gamma", "0 < sigma < 1");
      detail::require(detail::positive(p.a), "generalized gamma", "a > 0");
      const double s = p.sigma;
      const double a = p.a;
      const double C = p.M * std::pow(a, 1.0 - s) * std::exp(-std::lgamma(1.0 - s));
      return LevyIntensity(
          [C, s, a](double x) { return C * std::pow(x, -1.0 - s) * std::exp(-a * x); },
          Domain::positive_half_line(),
          Decomposition{1.0 + s, [C, a](double x) { return C * std::exp(-a * x); }},
          TailHint::Exponential, "generalized gamma");
    }
    LevyIntensity operator()(const StableBetaParams& p) const {
      detail::require(detail::positive(p.M), "stable-beta", "M > 0");
      detail::require(detail::open_unit(p.sigma), "stable-beta", "0 < sigma < 1");
      detail::require(detail::positive(p.c), "stable-beta", "c > 0");
      const double s = p.sigma;
      const double e = p.c + s - 1.0;
      const double C = p.M * std::exp(std::lgamma(1.0 + p.c) - std::lgamma(1.0 - s) -
                                      std::lgamma(p.c + s));
      return LevyIntensity(
          [C, s, e](double x) { return C * std::pow(x, -1.0 - s) * std::pow(1.0 - x, e); },
          Domain::unit_interval(),
          Decomposition{1.0 + s, [C, e](double x) { return C * std::pow(1.0 - x, e); }},
          TailHint::Auto, "stable-beta");
    }
  };
  return std::visit(Visitor{}, params);
}

inline double evaluate(const LevyIntensity& intensity, double x) { return intensity.evaluate(x); }

}  // namespace crm
