#pragma once

// Species occupancy model with unknown species count. Species i occupies a
// site with probability theta_i and is detected on each visit with
// probability q_i; the theta_i are the jumps of a beta-type process with
// intensity f(theta) and q_i has prior density p(q).
//
// Discovered species become fixed points with a bivariate (theta, q) grid
// posterior. Undiscovered species form a CRM with the tilted intensity
//   p(q) f(theta) [theta (1-q)^K + 1 - theta]^n,
// sampled in theta through the grid sampler and in q from the grid
// conditional.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "crm/crm_sample.hpp"
#include "crm/error.hpp"
#include "crm/grid.hpp"
#include "crm/intensity.hpp"
#include "crm/quadrature.hpp"
#include "crm/rng.hpp"
#include "crm/sampler.hpp"

namespace crm::occupancy {

// --- data ----------------------------------------------------------------------

/// Y[i][j][k] in {0, 1}: species i detected at site j on occasion k.
class OccupancyData {
 public:
  OccupancyData(std::size_t species, std::size_t sites, std::size_t occasions)
      : p_(species), n_(sites), K_(occasions), y_(species * sites * occasions, 0) {}

  [[nodiscard]] std::size_t species() const noexcept { return p_; }
  [[nodiscard]] std::size_t sites() const noexcept { return n_; }
  [[nodiscard]] std::size_t occasions() const noexcept { return K_; }

  [[nodiscard]] int y(std::size_t i, std::size_t j, std::size_t k) const { return y_[index(i, j, k)]; }
  void set(std::size_t i, std::size_t j, std::size_t k, int value) {
    if (value != 0 && value != 1) throw ParameterError("occupancy data: detections must be 0 or 1");
    y_[index(i, j, k)] = static_cast<std::uint8_t>(value);
  }

  /// s_ij = number of detections of species i at site j.
  [[nodiscard]] int count(std::size_t i, std::size_t j) const {
    int s = 0;
    for (std::size_t k = 0; k < K_; ++k) s += y_[index(i, j, k)];
    return s;
  }
  [[nodiscard]] std::vector<int> counts(std::size_t i) const {
    std::vector<int> out(n_);
    for (std::size_t j = 0; j < n_; ++j) out[j] = count(i, j);
    return out;
  }
  /// I_ij = 1 when species i was never detected at site j.
  [[nodiscard]] int undetected_indicator(std::size_t i, std::size_t j) const { return count(i, j) == 0; }

  [[nodiscard]] bool discovered(std::size_t i) const {
    for (std::size_t j = 0; j < n_; ++j) {
      if (count(i, j) > 0) return true;
    }
    return false;
  }
  [[nodiscard]] std::size_t p_star() const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < p_; ++i) c += discovered(i);
    return c;
  }

 private:
  [[nodiscard]] std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    if (i >= p_ || j >= n_ || k >= K_) throw OutOfRange("occupancy data: index out of range");
    return (i * n_ + j) * K_ + k;
  }
  std::size_t p_, n_, K_;
  std::vector<std::uint8_t> y_;
};

/// Reads CSV with header species,site,occasion,detected (0-based integer
/// indices). Dimensions are the largest index + 1; absent cells are 0.
inline OccupancyData read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("occupancy csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "species,site,occasion,detected") {
    throw FormatError("occupancy csv: header must be species,site,occasion,detected");
  }
  struct Row {
    std::size_t i, j, k;
    int y;
  };
  std::vector<Row> rows;
  std::size_t P = 0, N = 0, K = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    long long v[4];
    for (int f = 0; f < 4; ++f) {
      if (!std::getline(ss, field, ',')) {
        throw FormatError("occupancy csv line " + std::to_string(lineno) + ": expected 4 fields");
      }
      std::size_t used = 0;
      try {
        v[f] = std::stoll(field, &used);
      } catch (const std::exception&) {
        throw FormatError("occupancy csv line " + std::to_string(lineno) + ": not an integer");
      }
      if (used != field.size() || v[f] < 0) {
        throw FormatError("occupancy csv line " + std::to_string(lineno) + ": bad field '" + field + "'");
      }
    }
    if (v[3] > 1) throw FormatError("occupancy csv line " + std::to_string(lineno) + ": detected must be 0/1");
    const Row r{static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]),
                static_cast<std::size_t>(v[2]), static_cast<int>(v[3])};
    P = std::max(P, r.i + 1);
    N = std::max(N, r.j + 1);
    K = std::max(K, r.k + 1);
    rows.push_back(r);
  }
  OccupancyData d(P, N, K);
  for (const auto& r : rows) d.set(r.i, r.j, r.k, r.y);
  return d;
}

inline OccupancyData read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("occupancy csv: cannot open " + path);
  return read_csv(in);
}

inline void write_csv(std::ostream& out, const OccupancyData& d) {
  out << "species,site,occasion,detected\n";
  for (std::size_t i = 0; i < d.species(); ++i) {
    for (std::size_t j = 0; j < d.sites(); ++j) {
      for (std::size_t k = 0; k < d.occasions(); ++k) {
        out << i << ',' << j << ',' << k << ',' << d.y(i, j, k) << '\n';
      }
    }
  }
}

// --- prior and likelihood --------------------------------------------------------

/// Beta(alpha, beta) prior for q; the default is uniform.
struct QPrior {
  double alpha = 1.0;
  double beta = 1.0;

  [[nodiscard]] double log_density(double q) const {
    if (!(q > 0.0 && q < 1.0)) return -std::numeric_limits<double>::infinity();
    const double log_b = std::lgamma(alpha) + std::lgamma(beta) - std::lgamma(alpha + beta);
    return (alpha - 1.0) * std::log(q) + (beta - 1.0) * std::log1p(-q) - log_b;
  }
  [[nodiscard]] double density(double q) const { return std::exp(log_density(q)); }
};

struct OccupancyPrior {
  LevyIntensity theta_process;  // f(theta); needs a decomposition
  QPrior q_prior{};

  static OccupancyPrior beta_process(double mass, double concentration, QPrior q = {}) {
    return {make_standard(BetaParams{mass, concentration}), q};
  }
};

/// theta q^s (1-q)^{K-s} + (1 - theta) [s = 0].
inline double site_likelihood(double theta, double q, int s, int K) {
  const double detect = theta * std::pow(q, s) * std::pow(1.0 - q, K - s);
  return detect + (s == 0 ? 1.0 - theta : 0.0);
}

inline double log_site_likelihood(double theta, double q, int s, int K) {
  if (s == 0) {
    // theta (1-q)^K + 1 - theta = 1 - theta (1 - (1-q)^K)
    const double miss = K == 0 ? 0.0 : -std::expm1(K * std::log1p(-q));
    return std::log1p(-theta * miss);
  }
  if (theta <= 0.0 || q <= 0.0) return -std::numeric_limits<double>::infinity();
  double v = std::log(theta) + s * std::log(q);
  if (K > s) v += (K - s) * std::log1p(-q);
  return v;
}

/// Marginal likelihood of one species' detection history, latent occupancy summed out.
inline double species_log_likelihood(double theta, double q, const std::vector<int>& counts, int K) {
  double v = 0.0;
  for (int s : counts) v += log_site_likelihood(theta, q, s, K);
  return v;
}

inline double tilted_intensity(const OccupancyPrior& prior, double theta, double q, int n, int K) {
  const double bracket_log = n == 0 ? 0.0 : n * log_site_likelihood(theta, q, 0, K);
  return prior.q_prior.density(q) * prior.theta_process(theta) * std::exp(bracket_log);
}

// --- posterior ---------------------------------------------------------------------

struct OccupancyConfig {
  std::size_t theta_cells = 200;  // fixed-point grids
  std::size_t q_cells = 200;
  GridConfig theta_grid = GridConfig::with_bins(1000);  // undiscovered theta axis
};

/// Normalised (theta, q) density of one discovered species on a uniform
/// midpoint grid; density is row-major in theta.
struct FixedPointGrid {
  std::size_t species = 0;
  std::vector<double> theta;
  std::vector<double> q;
  double d_theta = 0.0;
  double d_q = 0.0;
  std::vector<double> density;

  [[nodiscard]] double at(std::size_t a, std::size_t b) const { return density[a * q.size() + b]; }

  [[nodiscard]] std::vector<double> theta_marginal() const {
    std::vector<double> m(theta.size(), 0.0);
    for (std::size_t a = 0; a < theta.size(); ++a) {
      for (std::size_t b = 0; b < q.size(); ++b) m[a] += at(a, b) * d_q;
    }
    return m;
  }
  [[nodiscard]] double theta_mode() const {
    const auto m = theta_marginal();
    return theta[static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin())];
  }
  [[nodiscard]] double integral() const {
    double s = 0.0;
    for (double v : density) s += v;
    return s * d_theta * d_q;
  }

  /// Strip method: cell with probability proportional to its mass, then uniform inside it.
  [[nodiscard]] std::pair<double, double> sample(Rng& rng) const {
    double u = rng.uniform() / (d_theta * d_q);
    std::size_t cell = density.size() - 1;
    for (std::size_t c = 0; c < density.size(); ++c) {
      if (u < density[c]) {
        cell = c;
        break;
      }
      u -= density[c];
    }
    const std::size_t a = cell / q.size();
    const std::size_t b = cell % q.size();
    return {theta[a] + (rng.uniform() - 0.5) * d_theta, q[b] + (rng.uniform() - 0.5) * d_q};
  }
};

inline std::vector<double> midpoints(std::size_t cells) {
  std::vector<double> v(cells);
  for (std::size_t i = 0; i < cells; ++i) v[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(cells);
  return v;
}

/// p(theta, q | Y_i) on the grid, computed in log space with max-shift.
inline FixedPointGrid fixed_point_posterior(const OccupancyPrior& prior, const OccupancyData& data,
                                            std::size_t i, const OccupancyConfig& cfg = {}) {
  if (i >= data.species()) throw OutOfRange("fixed_point_posterior: species index out of range");
  if (!data.discovered(i)) throw ParameterError("fixed_point_posterior: species was never detected");
  FixedPointGrid g;
  g.species = i;
  g.theta = midpoints(cfg.theta_cells);
  g.q = midpoints(cfg.q_cells);
  g.d_theta = 1.0 / static_cast<double>(cfg.theta_cells);
  g.d_q = 1.0 / static_cast<double>(cfg.q_cells);
  const std::vector<int> counts = data.counts(i);
  const int K = static_cast<int>(data.occasions());
  std::vector<double> log_q(g.q.size());
  for (std::size_t b = 0; b < g.q.size(); ++b) log_q[b] = prior.q_prior.log_density(g.q[b]);
  g.density.resize(g.theta.size() * g.q.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < g.theta.size(); ++a) {
    const double t = g.theta[a];
    const double log_f = std::log(prior.theta_process(t));
    for (std::size_t b = 0; b < g.q.size(); ++b) {
      const double v = log_f + log_q[b] + species_log_likelihood(t, g.q[b], counts, K);
      g.density[a * g.q.size() + b] = v;
      top = std::max(top, v);
    }
  }
  if (!std::isfinite(top)) {
    throw UnderflowError("fixed_point_posterior: density is zero on the whole grid");
  }
  double sum = 0.0;
  for (double& v : g.density) {
    v = std::exp(v - top);
    sum += v;
  }
  const double norm = sum * g.d_theta * g.d_q;
  for (double& v : g.density) v /= norm;
  return g;
}

/// Undiscovered-species process: theta marginal of the tilted intensity
/// (q summed over the uniform q grid) and the q | theta conditional.
class UndiscoveredProcess {
 public:
  UndiscoveredProcess(const OccupancyPrior& prior, std::size_t sites, std::size_t occasions,
                      const OccupancyConfig& cfg = {})
      : n_(static_cast<int>(sites)),
        K_(static_cast<int>(occasions)),
        q_(midpoints(cfg.q_cells)),
        log_w_(q_.size()),
        marginal_(make_marginal(prior)),
        envelope_(build_envelope(marginal_, cfg.theta_grid)) {}

  [[nodiscard]] const LevyIntensity& theta_intensity() const noexcept { return marginal_; }
  [[nodiscard]] const Envelope& envelope() const noexcept { return envelope_; }
  [[nodiscard]] const std::vector<double>& q_grid() const noexcept { return q_; }

  /// log of dq p(q_l) [theta (1-q_l)^K + 1 - theta]^n.
  [[nodiscard]] std::vector<double> q_log_weights(double theta) const {
    std::vector<double> w(q_.size());
    for (std::size_t l = 0; l < q_.size(); ++l) {
      w[l] = log_w_[l] + (n_ == 0 ? 0.0 : n_ * log_site_likelihood(theta, q_[l], 0, K_));
    }
    return w;
  }

  /// Cell probabilities of q | theta.
  [[nodiscard]] std::vector<double> q_conditional(double theta) const {
    std::vector<double> w = q_log_weights(theta);
    const double top = *std::max_element(w.begin(), w.end());
    double sum = 0.0;
    for (double& v : w) {
      v = std::exp(v - top);
      sum += v;
    }
    for (double& v : w) v /= sum;
    return w;
  }

  /// CDF of the grid conditional q | theta (piecewise linear within cells).
  [[nodiscard]] double q_conditional_cdf(double theta, double q) const {
    const auto w = q_conditional(theta);
    const double dq = 1.0 / static_cast<double>(q_.size());
    double acc = 0.0;
    for (std::size_t l = 0; l < w.size(); ++l) {
      const double lo = static_cast<double>(l) * dq;
      if (q >= lo + dq) {
        acc += w[l];
      } else {
        if (q > lo) acc += w[l] * (q - lo) / dq;
        break;
      }
    }
    return std::min(acc, 1.0);
  }

  /// Strip-method draw of q | theta.
  double sample_q(double theta, Rng& rng) const {
    const auto w = q_conditional(theta);
    double u = rng.uniform();
    std::size_t cell = w.size() - 1;
    for (std::size_t l = 0; l < w.size(); ++l) {
      if (u < w[l]) {
        cell = l;
        break;
      }
      u -= w[l];
    }
    const double dq = 1.0 / static_cast<double>(q_.size());
    return (static_cast<double>(cell) + rng.uniform()) * dq;
  }

  /// Per-cell tilted masses: theta-bin mass of the marginal split over q
  /// cells by the conditional at the left bin edge; row-major in theta bin.
  [[nodiscard]] std::vector<double> cell_masses() const {
    const auto& pts = envelope_.points();
    std::vector<double> out;
    out.reserve(envelope_.bin_masses.size() * q_.size());
    for (std::size_t i = 0; i < envelope_.bin_masses.size(); ++i) {
      const auto w = q_conditional(pts[i]);
      for (double v : w) out.push_back(envelope_.bin_masses[i] * v);
    }
    return out;
  }

 private:
  LevyIntensity make_marginal(const OccupancyPrior& prior) {
    const auto& dec = prior.theta_process.decomposition();
    if (!dec) throw MissingDecomposition("occupancy: theta process needs a decomposition");
    if (!prior.theta_process.domain().bounded()) {
      throw ParameterError("occupancy: theta process must live on (0, 1)");
    }
    const double dq = 1.0 / static_cast<double>(q_.size());
    for (std::size_t l = 0; l < q_.size(); ++l) log_w_[l] = std::log(dq) + prior.q_prior.log_density(q_[l]);
    // S(theta) = sum_l dq p(q_l) [theta (1-q_l)^K + 1 - theta]^n
    const auto q = q_;
    const auto lw = log_w_;
    const int n = n_;
    const int K = K_;
    auto S = [q, lw, n, K](double theta) {
      double top = -std::numeric_limits<double>::infinity();
      std::vector<double> v(q.size());
      for (std::size_t l = 0; l < q.size(); ++l) {
        v[l] = lw[l] + (n == 0 ? 0.0 : n * log_site_likelihood(theta, q[l], 0, K));
        top = std::max(top, v[l]);
      }
      double s = 0.0;
      for (double x : v) s += std::exp(x - top);
      return std::exp(top) * s;
    };
    const auto g0 = dec->g;
    const auto f = prior.theta_process;
    const double kappa = dec->kappa;
    return LevyIntensity([f, S](double t) { return f(t) * S(t); }, Domain::unit_interval(),
                         Decomposition{kappa, [g0, S](double t) { return g0(t) * S(t); }},
                         TailHint::Auto, "tilted-theta");
  }

  int n_, K_;
  std::vector<double> q_;
  std::vector<double> log_w_;
  LevyIntensity marginal_;
  Envelope envelope_;
};

struct Feature {
  double theta = 0.0;
  double q = 0.0;
};

struct OccupancyPosterior {
  UndiscoveredProcess undiscovered;
  std::vector<FixedPointGrid> fixed_points;
};

inline OccupancyPosterior fit(const OccupancyPrior& prior, const OccupancyData& data,
                              const OccupancyConfig& cfg = {}) {
  OccupancyPosterior post{UndiscoveredProcess(prior, data.sites(), data.occasions(), cfg), {}};
  for (std::size_t i = 0; i < data.species(); ++i) {
    if (data.discovered(i)) post.fixed_points.push_back(fixed_point_posterior(prior, data, i, cfg));
  }
  return post;
}

/// One posterior draw of the undiscovered species; theta is the jump size.
inline std::vector<Feature> sample_undiscovered(const UndiscoveredProcess& proc, Rng& rng,
                                                const SamplerBudget& budget = SamplerBudget::min_jump(1e-6)) {
  const CrmSample s = resample(proc.envelope(), rng, budget);
  Rng q_rng = rng.split();
  std::vector<Feature> out;
  out.reserve(s.size());
  for (double t : s.jumps) out.push_back({t, proc.sample_q(t, q_rng)});
  return out;
}

// --- predictive ----------------------------------------------------------------------

struct PredictiveDistribution {
  std::vector<double> probabilities;  // index = number of species, 0..cap

  [[nodiscard]] double sum() const {
    double s = 0.0;
    for (double p : probabilities) s += p;
    return s;
  }
};

struct PredictiveSettings {
  int K_sub = 1;
  std::size_t n_sites = 1;
  int r = -1;  // exactly-r detections when >= 0, otherwise at least one
  std::size_t n_mc = 10000;
  std::size_t cap = 50;
  unsigned threads = 0;
};

namespace detail {

inline std::size_t count_observed(const std::vector<Feature>& feats, const PredictiveSettings& s,
                                  Rng& rng) {
  std::size_t count = 0;
  for (const Feature& f : feats) {
    int detections = 0;
    for (std::size_t j = 0; j < s.n_sites; ++j) {
      if (!rng.bernoulli(f.theta)) continue;
      for (int k = 0; k < s.K_sub; ++k) detections += rng.bernoulli(f.q);
    }
    if (s.r >= 0 ? detections == s.r : detections > 0) ++count;
  }
  return count;
}

template <class Replicate>
PredictiveDistribution predictive_histogram(const PredictiveSettings& s, const Rng& rng,
                                            Replicate&& replicate) {
  if (s.cap < 1) throw ParameterError("predictive: cap must be >= 1");
  if (s.n_mc < 1) throw ParameterError("predictive: n_mc must be >= 1");
  std::vector<std::size_t> counts(s.n_mc);
  unsigned threads = s.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : s.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, s.n_mc));
  auto work = [&](unsigned t) {
    for (std::size_t m = t; m < s.n_mc; m += threads) {
      Rng sub = rng.substream(m);
      counts[m] = std::min(replicate(sub), s.cap);
    }
  };
  if (threads <= 1) {
    work(0);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          work(t);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  PredictiveDistribution out;
  out.probabilities.assign(s.cap + 1, 0.0);
  for (std::size_t c : counts) out.probabilities[c] += 1.0;
  for (double& p : out.probabilities) p /= static_cast<double>(s.n_mc);
  return out;
}

}  // namespace detail

/// Number of currently undiscovered species detected on K_sub further visits
/// to n_sites sites; each replicate draws a fresh posterior sample of the
/// undiscovered process. Counts above cap are put in the cap bin.
inline PredictiveDistribution predictive_counts(const UndiscoveredProcess& proc,
                                                const PredictiveSettings& s, const Rng& rng,
                                                const SamplerBudget& budget = SamplerBudget::min_jump(1e-6)) {
  return detail::predictive_histogram(s, rng, [&](Rng& sub) {
    Rng draw = sub.split();
    const auto feats = sample_undiscovered(proc, draw, budget);
    Rng sim = sub.split();
    return detail::count_observed(feats, s, sim);
  });
}

/// Same histogram for a fixed feature set (presence and detection resimulated).
inline PredictiveDistribution predictive_counts(const std::vector<Feature>& features,
                                                const PredictiveSettings& s, const Rng& rng) {
  return detail::predictive_histogram(s, rng, [&](Rng& sub) {
    return detail::count_observed(features, s, sub);
  });
}

// --- synthetic data ---------------------------------------------------------------------

struct SyntheticScenario {
  std::vector<double> thetas{0.6, 0.06};
  double q = 0.2;
  std::size_t sites = 10;
  std::size_t occasions = 5;
  double background_mass = 1.0;  // beta-process species added on top (mass 0: none)
  double background_concentration = 1.0;
  double background_min_theta = 0.01;
};

/// Detection histories for the listed species followed by background species
/// drawn from a beta process (all with detection probability q).
inline OccupancyData generate_synthetic(const SyntheticScenario& sc, Rng& rng) {
  std::vector<double> thetas = sc.thetas;
  Rng bg = rng.split();
  if (sc.background_mass > 0.0) {
    const auto nu = make_standard(BetaParams{sc.background_mass, sc.background_concentration});
    const CrmSample s = sample(nu, GridConfig::with_bins(1000), bg, SamplerBudget::min_jump(sc.background_min_theta));
    thetas.insert(thetas.end(), s.jumps.begin(), s.jumps.end());
  }
  Rng sim = rng.split();
  OccupancyData d(thetas.size(), sc.sites, sc.occasions);
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    for (std::size_t j = 0; j < sc.sites; ++j) {
      const bool present = sim.bernoulli(thetas[i]);
      for (std::size_t k = 0; k < sc.occasions; ++k) {
        const bool hit = sim.bernoulli(sc.q);
        d.set(i, j, k, present && hit ? 1 : 0);
      }
    }
  }
  return d;
}

}  // namespace crm::occupancy
