#pragma once

// Precision, rejection-mass and timing reports comparing the grid sampler
// with the exact reference sampler.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "crm/crm_sample.hpp"
#include "crm/detail/gauss_kronrod.hpp"
#include "crm/grid.hpp"
#include "crm/quadrature.hpp"
#include "crm/reference.hpp"
#include "crm/rng.hpp"
#include "crm/sampler.hpp"

namespace crm {

/// Empirical quantile by linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// --- precision ----------------------------------------------------------------

struct PrecisionRecord {
  double arrival = 0.0;
  double jump_exact = 0.0;
  double jump_approx = 0.0;
  double rel_err = 0.0;
};

struct PrecisionReport {
  std::size_t bins = 0;
  std::vector<PrecisionRecord> records;
  double median = 0.0;
  double q90 = 0.0;
  double max = 0.0;
};

/// Paired jumps of the grid and reference samplers on a shared arrival stream.
inline PrecisionReport precision_report(const LevyIntensity& nu, const GridConfig& cfg,
                                        std::uint64_t seed, const SamplerBudget& budget,
                                        const QuadratureSettings& qs = {}) {
  Rng ra(seed);
  Rng rb(seed);
  const CrmSample approx = sample(nu, cfg, ra, budget);
  const CrmSample exact = ferguson_klass_sample(nu, rb, budget, qs);
  PrecisionReport rep;
  rep.bins = cfg.n_points - 1;
  const std::size_t n = std::min(approx.size(), exact.size());
  std::vector<double> errs;
  errs.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double je = exact.jumps[k];
    const double ja = approx.jumps[k];
    const double err = std::abs(ja - je) / je;
    rep.records.push_back({exact.arrivals[k], je, ja, err});
    errs.push_back(err);
  }
  if (!errs.empty()) {
    rep.median = quantile(errs, 0.5);
    rep.q90 = quantile(errs, 0.9);
    rep.max = *std::max_element(errs.begin(), errs.end());
  }
  return rep;
}

// --- rejection mass -------------------------------------------------------------

struct RejectionMassReport {
  std::string scenario;
  std::size_t bins = 0;
  Method method = Method::Mixed;
  double x_thr = 0.0;
  double positive_mass = 0.0;  // int max(nu~ - nu, 0)
  double negative_mass = 0.0;  // int max(nu - nu~, 0)
};

/// Signed deviation of nu~ from nu over [x_lower, x_upper], integrated bin by bin.
inline RejectionMassReport rejection_mass(const LevyIntensity& nu, const Envelope& env) {
  RejectionMassReport rep;
  rep.method = env.method;
  rep.x_thr = env.x_thr;
  rep.bins = env.bins();
  double signed_total = 0.0;
  double abs_total = 0.0;
  for (std::size_t i = 0; i < env.bins(); ++i) {
    const double x0 = env.point(i);
    const double x1 = env.point(i + 1);
    const BinShape s = env.shape(i);
    auto d = [&](double x) { return s.at(x, x0, x1) - nu(x); };
    auto ad = [&](double x) { return std::abs(s.at(x, x0, x1) - nu(x)); };
    signed_total += detail::integrate(d, x0, x1, 1e-20, 1e-9, 50).value;
    abs_total += detail::integrate(ad, x0, x1, 1e-20, 1e-9, 50).value;
  }
  rep.positive_mass = std::max(0.0, 0.5 * (abs_total + signed_total));
  rep.negative_mass = std::max(0.0, 0.5 * (abs_total - signed_total));
  return rep;
}

/// Rejection mass of the mixed method for every (bins, x_thr) pair, bins-major.
/// Scenarios run on parallel threads; the table order is fixed.
inline std::vector<RejectionMassReport> x_thr_sweep(const LevyIntensity& nu,
                                                    const std::vector<std::size_t>& bin_counts,
                                                    const std::vector<double>& thr_values,
                                                    const GridConfig& base = {},
                                                    unsigned threads = 0) {
  std::vector<RejectionMassReport> out(bin_counts.size() * thr_values.size());
  if (out.empty()) return out;
  auto run = [&](std::size_t idx) {
    const std::size_t b = bin_counts[idx / thr_values.size()];
    const double thr = thr_values[idx % thr_values.size()];
    GridConfig cfg = base;
    cfg.method = Method::Mixed;
    cfg.n_points = b + 1;
    cfg.x_thr = thr;
    const Envelope env = build_envelope(nu, cfg);
    RejectionMassReport r = rejection_mass(nu, env);
    r.bins = b;
    r.scenario = nu.name();
    out[idx] = r;
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, out.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < out.size(); ++i) run(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < out.size(); i += threads) run(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// --- timing ------------------------------------------------------------------------

struct BenchRow {
  std::string scenario;
  double build_s = 0.0;      // median envelope build
  double approx_s = 0.0;     // median grid-sampler draw
  double reference_s = 0.0;  // median reference draw
  double ratio = 0.0;        // reference_s / approx_s
};

/// Two rows: "per-trial" (envelope rebuilt for every draw) and "reuse"
/// (one envelope, draw only).
struct BenchReport {
  BenchRow per_trial;
  BenchRow reuse;
};

namespace detail {

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace detail

/// Wall-clock medians over `replicates` draws, after one discarded warm-up.
inline BenchReport speed_benchmark(const LevyIntensity& nu, const GridConfig& cfg,
                                   const SamplerBudget& budget, std::size_t replicates,
                                   const QuadratureSettings& qs = {},
                                   const std::string& scenario = "") {
  if (replicates < 1) throw ParameterError("speed_benchmark: replicates must be >= 1");
  std::vector<double> build, trial, reuse, reference;
  const Envelope shared = build_envelope(nu, cfg);
  volatile double sink = 0.0;
  for (std::size_t r = 0; r <= replicates; ++r) {
    const bool keep = r > 0;
    Rng rng_trial(1000 + r);
    Rng rng_reuse(1000 + r);
    Rng rng_ref(1000 + r);
    const double tb = detail::seconds([&] { sink = sink + build_envelope(nu, cfg).total_mass(); });
    const double tt = detail::seconds([&] { sink = sink + sample(nu, cfg, rng_trial, budget).size(); });
    const double tr = detail::seconds([&] { sink = sink + resample(shared, rng_reuse, budget).size(); });
    const double tf = detail::seconds(
        [&] { sink = sink + ferguson_klass_sample(nu, rng_ref, budget, qs).size(); });
    if (keep) {
      build.push_back(tb);
      trial.push_back(tt);
      reuse.push_back(tr);
      reference.push_back(tf);
    }
  }
  const std::string name = scenario.empty() ? nu.name() : scenario;
  BenchReport rep;
  const double ref = quantile(reference, 0.5);
  const double b = quantile(build, 0.5);
  rep.per_trial = {name + "/per-trial", b, quantile(trial, 0.5), ref, 0.0};
  rep.reuse = {name + "/reuse", b, quantile(reuse, 0.5), ref, 0.0};
  rep.per_trial.ratio = ref / rep.per_trial.approx_s;
  rep.reuse.ratio = ref / rep.reuse.approx_s;
  return rep;
}

}  // namespace crm
