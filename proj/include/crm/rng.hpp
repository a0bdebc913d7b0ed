#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace crm {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Seedable, splittable random stream.
///
/// Every stream is identified by (seed, stream id). Children obtained through
/// split() or substream() are deterministic functions of the parent identity,
/// so a fixed seed reproduces bit-identical output on every platform. The
/// variates are derived from raw mt19937_64 output rather than the
/// implementation-defined <random> distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  /// Child stream keyed on `key`; does not advance this stream.
  [[nodiscard]] Rng substream(std::uint64_t key) const {
    return Rng(detail::splitmix64(seed_ ^ detail::splitmix64(stream_ + 0x632BE59BD9B4E019ULL)),
               key);
  }

  /// Next child stream in a fixed sequence (0, 1, 2, ...).
  Rng split() { return substream(splits_++); }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double uniform_open() {
    for (;;) {
      const double u = uniform();
      if (u > 0.0) return u;
    }
  }

  /// Standard exponential, finite and >= 0.
  double exponential() { return -std::log1p(-uniform()); }

  bool bernoulli(double p) { return uniform() < p; }

  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] std::uint64_t stream() const noexcept { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t splits_ = 0;
  std::mt19937_64 engine_;
};

}  // namespace crm
