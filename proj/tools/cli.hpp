#pragma once

// Command-line front end. run() parses argv, executes one subcommand and
// returns the process exit code: 0 on success, 2 on usage errors, 1 when the
// library raises an error.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crm/crm.hpp"
#include "report_io.hpp"

namespace crm::cli {

inline constexpr std::uint64_t kDefaultSeed = 20231;

struct Options {
  std::string process = "beta";
  double M = 1.0;
  double sigma = 0.5;
  double c = 1.0;
  double a = 1.0;
  std::vector<std::size_t> bins{1000};
  std::optional<double> x_lower;
  std::vector<double> x_thr;
  std::string method = "mixed";
  double eps_tail = 1e-10;
  std::uint64_t seed = kDefaultSeed;
  std::optional<std::size_t> n_jumps;
  std::optional<double> min_jump;
  std::string out;
  std::string format = "csv";
  // precision
  bool summary = false;
  // bench
  std::size_t replicates = 5;
  // corm
  double xi = 1.0;
  std::size_t d = 2;
  bool verify = false;
  std::string curve;
  // occupancy
  std::string data;
  bool synthetic = false;
  std::string write_data;
  double prior_mass = 1.0;
  double prior_c = 1.0;
  int K_sub = 1;
  std::optional<std::size_t> n_sites;
  std::optional<int> r;
  std::size_t n_mc = 10000;
  std::size_t cap = 50;
  unsigned threads = 0;
};

namespace detail {

inline LevyIntensity make_process(const Options& o) {
  if (o.process == "gamma") return make_standard(GammaParams{o.M});
  if (o.process == "sigma-stable") return make_standard(SigmaStableParams{o.sigma});
  if (o.process == "beta") return make_standard(BetaParams{o.M, o.c});
  if (o.process == "gen-gamma") return make_standard(GeneralizedGammaParams{o.M, o.sigma, o.a});
  if (o.process == "stable-beta") return make_standard(StableBetaParams{o.M, o.sigma, o.c});
  throw ParameterError("unknown process " + o.process);
}

inline GridConfig make_grid(const Options& o, std::size_t bins, std::optional<double> thr) {
  GridConfig cfg = GridConfig::with_bins(bins, o.method == "trapezium" ? Method::Trapezium : Method::Mixed);
  cfg.x_lower = o.x_lower;
  cfg.x_thr = thr;
  cfg.eps_tail = o.eps_tail;
  return cfg;
}

inline std::optional<double> single_thr(const Options& o) {
  if (o.x_thr.empty()) return std::nullopt;
  return o.x_thr.front();
}

inline SamplerBudget make_budget(const Options& o, std::size_t default_jumps) {
  if (o.min_jump) return SamplerBudget::min_jump(*o.min_jump);
  return SamplerBudget::jumps(o.n_jumps.value_or(default_jumps));
}

inline std::string scenario_name(const Options& o) {
  std::ostringstream ss;
  ss << o.process;
  if (o.process == "gamma") ss << "(M=" << o.M << ")";
  if (o.process == "sigma-stable") ss << "(sigma=" << o.sigma << ")";
  if (o.process == "beta") ss << "(M=" << o.M << ",c=" << o.c << ")";
  if (o.process == "gen-gamma") ss << "(M=" << o.M << ",sigma=" << o.sigma << ",a=" << o.a << ")";
  if (o.process == "stable-beta") ss << "(M=" << o.M << ",sigma=" << o.sigma << ",c=" << o.c << ")";
  return ss.str();
}

inline void emit(const Options& o, const Table& t, std::ostream& out) {
  const Format f = o.format == "json" ? Format::Json : Format::Csv;
  if (o.out.empty()) {
    write_table(out, t, f);
    return;
  }
  std::ofstream file(o.out, std::ios::binary);
  if (!file) throw FormatError("cannot open output file " + o.out);
  write_table(file, t, f);
}

inline Table sample_table(const CrmSample& s) {
  Table t{{"index", "arrival", "jump", "location"}, {}};
  for (std::size_t k = 0; k < s.size(); ++k) {
    t.add({static_cast<long long>(k), s.arrivals[k], s.jumps[k], s.locations[k]});
  }
  return t;
}

inline occupancy::OccupancyData load_data(const Options& o) {
  if (!o.data.empty() && o.synthetic) throw ParameterError("use either --data or --synthetic");
  occupancy::OccupancyData d = [&] {
    if (!o.data.empty()) return occupancy::read_csv_file(o.data);
    if (!o.synthetic) throw ParameterError("occupancy commands need --data <csv> or --synthetic");
    Rng rng(o.seed);
    return occupancy::generate_synthetic(occupancy::SyntheticScenario{}, rng);
  }();
  if (!o.write_data.empty()) {
    std::ofstream f(o.write_data, std::ios::binary);
    if (!f) throw FormatError("cannot open " + o.write_data);
    occupancy::write_csv(f, d);
  }
  return d;
}

// --- subcommands ---------------------------------------------------------------------

inline void cmd_sample(const Options& o, std::ostream& out) {
  const auto nu = make_process(o);
  Rng rng(o.seed);
  const CrmSample s = sample(nu, make_grid(o, o.bins.front(), single_thr(o)), rng, make_budget(o, 1000));
  emit(o, sample_table(s), out);
}

inline void cmd_precision(const Options& o, std::ostream& out, std::ostream& err) {
  const auto nu = make_process(o);
  Table per_jump{{"bins", "jump_exact", "jump_approx", "rel_err"}, {}};
  Table summary{{"bins", "median", "q90", "max"}, {}};
  for (std::size_t b : o.bins) {
    const auto rep = precision_report(nu, make_grid(o, b, single_thr(o)), o.seed, make_budget(o, 1000));
    for (const auto& r : rep.records) {
      per_jump.add({static_cast<long long>(b), r.jump_exact, r.jump_approx, r.rel_err});
    }
    summary.add({static_cast<long long>(b), rep.median, rep.q90, rep.max});
    err << "bins=" << b << " median_rel_err=" << format_double(rep.median)
        << " max_rel_err=" << format_double(rep.max) << '\n';
  }
  emit(o, o.summary ? summary : per_jump, out);
}

inline Table rejection_table(const std::vector<RejectionMassReport>& reps) {
  Table t{{"scenario", "bins", "x_thr", "pos_mass", "neg_mass"}, {}};
  for (const auto& r : reps) {
    t.add({r.scenario, static_cast<long long>(r.bins), r.x_thr, r.positive_mass, r.negative_mass});
  }
  return t;
}

inline void cmd_reject_mass(const Options& o, std::ostream& out) {
  const auto nu = make_process(o);
  std::vector<RejectionMassReport> reps;
  for (std::size_t b : o.bins) {
    const Envelope env = build_envelope(nu, make_grid(o, b, single_thr(o)));
    RejectionMassReport r = rejection_mass(nu, env);
    r.bins = b;
    r.scenario = scenario_name(o) + "/" + to_string(env.method);
    reps.push_back(r);
  }
  emit(o, rejection_table(reps), out);
}

inline void cmd_thr_sweep(const Options& o, std::ostream& out) {
  const auto nu = make_process(o);
  const std::vector<double> thr = o.x_thr.empty() ? std::vector<double>{1e-5, 1e-4, 1e-3, 1e-2} : o.x_thr;
  auto reps = x_thr_sweep(nu, o.bins, thr, make_grid(o, 1000, std::nullopt), o.threads);
  for (auto& r : reps) r.scenario = scenario_name(o);
  emit(o, rejection_table(reps), out);
}

inline void cmd_bench(const Options& o, std::ostream& out) {
  const auto nu = make_process(o);
  const auto rep = speed_benchmark(nu, make_grid(o, o.bins.front(), single_thr(o)), make_budget(o, 1000),
                                   o.replicates, QuadratureSettings{}, scenario_name(o));
  Table t{{"scenario", "build_s", "approx_s", "reference_s", "ratio"}, {}};
  for (const BenchRow* r : {&rep.per_trial, &rep.reuse}) {
    t.add({r->scenario, r->build_s, r->approx_s, r->reference_s, r->ratio});
  }
  emit(o, t, out);
}

inline void cmd_corm(const Options& o, const CLI::App& app, std::ostream& out) {
  const auto directing = directing_intensity_beta_scores(o.M, o.c, o.xi);
  const ScoreDistribution f(o.xi);
  if (o.verify) {
    const auto marginal = make_standard(BetaParams{o.M, o.c});
    const double res = verify_integral_equation(marginal, f, directing, log_spaced(1e-6, 0.99, 20));
    out << "residual " << format_double(res) << '\n';
  }
  if (!o.curve.empty()) {
    Table t{{"z", "nu_star"}, {}};
    for (double z : log_spaced(1e-6, 0.999, 200)) t.add({z, directing(z)});
    std::ofstream file(o.curve, std::ios::binary);
    if (!file) throw FormatError("cannot open " + o.curve);
    write_table(file, t, o.format == "json" ? Format::Json : Format::Csv);
  }
  const bool want_sample = !o.verify || !o.out.empty() || app.count("--n-jumps") > 0 ||
                           app.count("--min-jump") > 0;
  if (!want_sample) return;
  Rng rng(o.seed);
  const auto s = sample_corm(directing, f, o.d, make_grid(o, o.bins.front(), single_thr(o)), rng,
                             make_budget(o, 1000));
  Table t{{"index", "jump", "location"}, {}};
  for (std::size_t j = 0; j < o.d; ++j) t.columns.push_back("score_" + std::to_string(j + 1));
  for (std::size_t j = 0; j < o.d; ++j) t.columns.push_back("weight_" + std::to_string(j + 1));
  for (std::size_t i = 0; i < s.directing.size(); ++i) {
    std::vector<Cell> row{static_cast<long long>(i), s.directing.jumps[i], s.directing.locations[i]};
    for (std::size_t j = 0; j < o.d; ++j) row.emplace_back(s.scores[j][i]);
    for (std::size_t j = 0; j < o.d; ++j) row.emplace_back(s.measures[j][i]);
    t.add(std::move(row));
  }
  if (o.verify && o.out.empty()) return;
  emit(o, t, out);
}

inline occupancy::OccupancyConfig occupancy_config(const Options& o) {
  occupancy::OccupancyConfig cfg;
  cfg.theta_grid = make_grid(o, o.bins.front(), single_thr(o));
  return cfg;
}

inline void cmd_occupancy_fit(const Options& o, std::ostream& out, std::ostream& err) {
  const auto data = load_data(o);
  const auto prior = occupancy::OccupancyPrior::beta_process(o.prior_mass, o.prior_c);
  const auto post = occupancy::fit(prior, data, occupancy_config(o));
  Table t{{"kind", "species", "theta", "q", "value"}, {}};
  for (const auto& g : post.fixed_points) {
    err << "species=" << g.species << " theta_mode=" << format_double(g.theta_mode()) << '\n';
    for (std::size_t a = 0; a < g.theta.size(); ++a) {
      for (std::size_t b = 0; b < g.q.size(); ++b) {
        t.add({std::string("fixed"), static_cast<long long>(g.species), g.theta[a], g.q[b], g.at(a, b)});
      }
    }
  }
  const auto& env = post.undiscovered.envelope();
  const auto masses = post.undiscovered.cell_masses();
  const auto& qg = post.undiscovered.q_grid();
  for (std::size_t i = 0; i < env.bin_masses.size(); ++i) {
    for (std::size_t l = 0; l < qg.size(); ++l) {
      t.add({std::string("undiscovered"), -1LL, env.points()[i], qg[l], masses[i * qg.size() + l]});
    }
  }
  err << "discovered=" << data.p_star() << " undiscovered_mass(theta>=x_lower)="
      << format_double(env.total_mass()) << '\n';
  emit(o, t, out);
}

inline void cmd_occupancy_predict(const Options& o, std::ostream& out) {
  const auto data = load_data(o);
  const auto prior = occupancy::OccupancyPrior::beta_process(o.prior_mass, o.prior_c);
  const occupancy::UndiscoveredProcess proc(prior, data.sites(), data.occasions(), occupancy_config(o));
  occupancy::PredictiveSettings s;
  s.K_sub = o.K_sub;
  s.n_sites = o.n_sites.value_or(data.sites());
  s.r = o.r.value_or(-1);
  s.n_mc = o.n_mc;
  s.cap = o.cap;
  s.threads = o.threads;
  const SamplerBudget budget = o.n_jumps ? SamplerBudget::jumps(*o.n_jumps)
                                         : SamplerBudget::min_jump(o.min_jump.value_or(1e-6));
  const auto dist = occupancy::predictive_counts(proc, s, Rng(o.seed), budget);
  Table t{{"count", "probability"}, {}};
  for (std::size_t k = 0; k < dist.probabilities.size(); ++k) {
    t.add({static_cast<long long>(k), dist.probabilities[k]});
  }
  emit(o, t, out);
}

// --- option wiring ---------------------------------------------------------------------

inline void add_output(CLI::App* sub, Options& o) {
  sub->add_option("--seed", o.seed, "random seed")->capture_default_str();
  sub->add_option("--out", o.out, "output file (default: stdout)");
  sub->add_option("--format", o.format, "output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
}

inline void add_grid(CLI::App* sub, Options& o, bool bin_list) {
  if (bin_list) {
    sub->add_option("--bins", o.bins, "bin counts (comma separated)")->delimiter(',')->check(CLI::PositiveNumber);
  } else {
    sub->add_option("--bins", o.bins, "bin count")->expected(1)->check(CLI::PositiveNumber);
  }
  sub->add_option("--x-lower", o.x_lower, "lower end of the grid");
  sub->add_option("--method", o.method, "bin rule below x_thr")->check(CLI::IsMember({"mixed", "trapezium"}))->capture_default_str();
  sub->add_option("--eps-tail", o.eps_tail, "tail mass left beyond x_upper")->capture_default_str();
}

inline void add_process(CLI::App* sub, Options& o) {
  sub->add_option("--process", o.process, "process")
      ->check(CLI::IsMember({"gamma", "sigma-stable", "beta", "gen-gamma", "stable-beta"}))
      ->capture_default_str();
  sub->add_option("--M", o.M, "mass parameter")->capture_default_str();
  sub->add_option("--sigma", o.sigma, "stability parameter")->capture_default_str();
  sub->add_option("--c", o.c, "concentration parameter")->capture_default_str();
  sub->add_option("--a", o.a, "exponential tilting rate")->capture_default_str();
}

inline void add_budget(CLI::App* sub, Options& o) {
  auto* nj = sub->add_option("--n-jumps", o.n_jumps, "number of jumps");
  auto* mj = sub->add_option("--min-jump", o.min_jump, "keep every jump >= this size");
  nj->excludes(mj);
}

inline void add_occupancy(CLI::App* sub, Options& o) {
  sub->add_option("--data", o.data, "detections csv (species,site,occasion,detected)");
  sub->add_flag("--synthetic", o.synthetic, "use the built-in synthetic scenario");
  sub->add_option("--write-data", o.write_data, "also write the data set used to this csv");
  sub->add_option("--prior-mass", o.prior_mass, "beta-process mass of the theta prior")->capture_default_str();
  sub->add_option("--prior-c", o.prior_c, "beta-process concentration of the theta prior")->capture_default_str();
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  Options o;
  CLI::App app{"Completely random measure simulation"};
  app.require_subcommand(1);

  using namespace detail;
  auto* s_sample = app.add_subcommand("sample", "draw one CRM with the grid sampler");
  add_process(s_sample, o);
  add_grid(s_sample, o, false);
  s_sample->add_option("--x-thr", o.x_thr, "mixed/trapezium threshold")->expected(1);
  add_budget(s_sample, o);
  add_output(s_sample, o);

  auto* s_prec = app.add_subcommand("precision", "paired relative jump errors against the reference sampler");
  add_process(s_prec, o);
  add_grid(s_prec, o, true);
  s_prec->add_option("--x-thr", o.x_thr, "threshold")->expected(1);
  add_budget(s_prec, o);
  s_prec->add_flag("--summary", o.summary, "one quantile row per bin count");
  add_output(s_prec, o);

  auto* s_rej = app.add_subcommand("reject-mass", "positive and negative mass of nu~ - nu");
  add_process(s_rej, o);
  add_grid(s_rej, o, true);
  s_rej->add_option("--x-thr", o.x_thr, "threshold")->expected(1);
  add_output(s_rej, o);

  auto* s_sweep = app.add_subcommand("thr-sweep", "rejection mass over bin counts and thresholds");
  add_process(s_sweep, o);
  add_grid(s_sweep, o, true);
  s_sweep->add_option("--x-thr", o.x_thr, "thresholds (comma separated)")->delimiter(',');
  s_sweep->add_option("--threads", o.threads, "worker threads (0: all cores)");
  add_output(s_sweep, o);

  auto* s_bench = app.add_subcommand("bench", "timing against the reference sampler");
  add_process(s_bench, o);
  add_grid(s_bench, o, false);
  s_bench->add_option("--x-thr", o.x_thr, "threshold")->expected(1);
  add_budget(s_bench, o);
  s_bench->add_option("--replicates", o.replicates, "timed draws")->check(CLI::PositiveNumber)->capture_default_str();
  add_output(s_bench, o);

  auto* s_corm = app.add_subcommand("corm", "compound random measure with Beta(xi, 1) scores");
  s_corm->add_option("--M", o.M, "marginal mass")->capture_default_str();
  s_corm->add_option("--c", o.c, "marginal concentration")->capture_default_str();
  s_corm->add_option("--xi", o.xi, "score parameter")->capture_default_str();
  s_corm->add_option("--d", o.d, "number of measures")->check(CLI::PositiveNumber)->capture_default_str();
  s_corm->add_flag("--verify", o.verify, "print the integral-equation residual");
  s_corm->add_option("--curve", o.curve, "write the directing intensity curve to this file");
  add_grid(s_corm, o, false);
  s_corm->add_option("--x-thr", o.x_thr, "threshold")->expected(1);
  add_budget(s_corm, o);
  add_output(s_corm, o);

  auto* s_fit = app.add_subcommand("occupancy-fit", "posterior grids of the occupancy model");
  add_occupancy(s_fit, o);
  add_grid(s_fit, o, false);
  s_fit->add_option("--x-thr", o.x_thr, "threshold")->expected(1);
  add_output(s_fit, o);

  auto* s_pred = app.add_subcommand("occupancy-predict", "predictive number of newly detected species");
  add_occupancy(s_pred, o);
  add_grid(s_pred, o, false);
  s_pred->add_option("--x-thr", o.x_thr, "threshold")->expected(1);
  s_pred->add_option("--K-sub", o.K_sub, "further sampling occasions")->check(CLI::PositiveNumber)->capture_default_str();
  s_pred->add_option("--n-sites", o.n_sites, "sites visited (default: as in the data)");
  s_pred->add_option("--r", o.r, "count species detected exactly r times")->check(CLI::NonNegativeNumber);
  s_pred->add_option("--n-mc", o.n_mc, "Monte Carlo replicates")->check(CLI::PositiveNumber)->capture_default_str();
  s_pred->add_option("--cap", o.cap, "largest reported count")->check(CLI::PositiveNumber)->capture_default_str();
  s_pred->add_option("--threads", o.threads, "worker threads (0: all cores)");
  add_budget(s_pred, o);
  add_output(s_pred, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (*s_sample) cmd_sample(o, out);
    else if (*s_prec) cmd_precision(o, out, err);
    else if (*s_rej) cmd_reject_mass(o, out);
    else if (*s_sweep) cmd_thr_sweep(o, out);
    else if (*s_bench) cmd_bench(o, out);
    else if (*s_corm) cmd_corm(o, *s_corm, out);
    else if (*s_fit) cmd_occupancy_fit(o, out, err);
    else if (*s_pred) cmd_occupancy_predict(o, out);
  } catch (const crm::Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace crm::cli
