#pragma once

#include <cstddef>
#include <utility>
#include <limits>
#include <variant>
#include <vector>

#include "crm/error.hpp"
#include "crm/rng.hpp"

namespace crm {

/// Realisation sum_k J_k delta_{theta_k}; jumps are non-increasing.
struct CrmSample {
  std::vector<double> jumps;
  std::vector<double> arrivals;
  std::vector<double> locations;

  [[nodiscard]] std::size_t size() const noexcept { return jumps.size(); }
  [[nodiscard]] bool empty() const noexcept { return jumps.empty(); }
};

/// Truncation rule: a fixed number of jumps, or every jump >= min_jump.
class SamplerBudget {
 public:
  static SamplerBudget jumps(std::size_t n) { return SamplerBudget(n); }
  static SamplerBudget min_jump(double x) {
    if (!(x > 0.0)) throw ParameterError("budget: min_jump must be > 0");
    return SamplerBudget(x);
  }

  [[nodiscard]] bool is_count() const noexcept { return std::holds_alternative<std::size_t>(v_); }
  [[nodiscard]] std::size_t count() const { return std::get<std::size_t>(v_); }
  [[nodiscard]] double threshold() const { return std::get<double>(v_); }

 private:
  explicit SamplerBudget(std::size_t n) : v_(n) {}
  explicit SamplerBudget(double x) : v_(x) {}
  std::variant<std::size_t, double> v_;
};

/// Partial sums E_k = T_1 + ... + T_k of the inter-arrival times produced by
/// `next_gap` (i.i.d. Exp(1) for a unit Poisson process).
template <class GapSource>
std::vector<double> arrivals_from(GapSource&& next_gap, std::size_t n) {
  std::vector<double> out;
  out.reserve(n);
  double e = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    e += next_gap();
    out.push_back(e);
  }
  return out;
}

/// Arrivals of a unit Poisson process, all <= e_max.
template <class GapSource>
std::vector<double> arrivals_until(GapSource&& next_gap, double e_max) {
  std::vector<double> out;
  double e = next_gap();
  while (e <= e_max) {
    out.push_back(e);
    e += next_gap();
  }
  return out;
}

inline std::vector<double> poisson_arrivals(Rng& rng, std::size_t n) {
  return arrivals_from([&rng] { return rng.exponential(); }, n);
}

inline std::vector<double> poisson_arrivals_until(Rng& rng, double e_max) {
  return arrivals_until([&rng] { return rng.exponential(); }, e_max);
}

/// Arrival and location streams of one sampling call. Every sampler takes its
/// streams in this order so equal seeds give paired jumps.
struct SampleStreams {
  Rng arrivals;
  Rng locations;
};

inline SampleStreams split_streams(Rng& rng) {
  Rng a = rng.split();
  Rng l = rng.split();
  return {std::move(a), std::move(l)};
}

/// Uniform locations on [0, 1], one per jump.
inline std::vector<double> uniform_locations(Rng& rng, std::size_t n) {
  std::vector<double> out(n);
  for (auto& x : out) x = rng.uniform();
  return out;
}

}  // namespace crm
