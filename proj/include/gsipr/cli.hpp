#pragma once

#include "gsipr/bench.hpp"
#include "gsipr/io.hpp"
#include "gsipr/verify.hpp"

#include "CLI11.hpp"

#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gsipr {

namespace cli_detail {

struct Flags {
  std::string config;
  std::string field;
  std::string ensemble;
  std::size_t d = 0;
  std::vector<double> ratios;
  int trials = 0;
  std::uint64_t seed = 0;
  int max_iters = 0;
  int power_iters = 0;
  std::size_t samples = 0;
  std::string out;
  std::string records;
  std::string format = "csv";
  int threads = 0;

  std::map<std::string, CLI::Option*> opts;
  bool given(const std::string& name) const {
    auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
};

inline void add_common(CLI::App* sub, Flags& f) {
  f.opts["config"] = sub->add_option("--config", f.config, "JSON experiment config; flags override its values");
  f.opts["field"] = sub->add_option("--field", f.field, "real | complex")->check(CLI::IsMember({"real", "complex"}));
  f.opts["ensemble"] = sub->add_option("--ensemble", f.ensemble, "gaussian | uniform | ternary")
                           ->check(CLI::IsMember({"gaussian", "uniform", "ternary"}));
  f.opts["d"] = sub->add_option("--d", f.d, "signal dimension")->check(CLI::PositiveNumber);
  f.opts["ratios"] = sub->add_option("--ratios", f.ratios, "comma separated N/d grid")->delimiter(',');
  f.opts["trials"] = sub->add_option("--trials", f.trials, "trials per ratio")->check(CLI::PositiveNumber);
  f.opts["seed"] = sub->add_option("--seed", f.seed, "base seed");
  f.opts["max-iters"] = sub->add_option("--max-iters", f.max_iters, "gradient iterations")->check(CLI::PositiveNumber);
  f.opts["power-iters"] =
      sub->add_option("--power-iters", f.power_iters, "power-method iterations")->check(CLI::PositiveNumber);
  f.opts["out"] = sub->add_option("--out", f.out, "output path");
  f.opts["format"] = sub->add_option("--format", f.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  f.opts["threads"] = sub->add_option("--threads", f.threads, "worker threads (default: GSIPR_THREADS or all cores)")
                          ->check(CLI::PositiveNumber);
}

inline ExperimentConfig resolve_config(const Flags& f, ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  if (!f.config.empty()) {
    apply_config_json(read_json_file(f.config), c);
    c.kind = kind;  // the subcommand decides the protocol
  }
  if (f.given("field")) c.ensemble.field = parse_field(f.field);
  if (f.given("ensemble")) c.ensemble.entry = parse_entry(f.ensemble);
  if (f.given("d")) c.d = f.d;
  if (f.given("ratios")) c.ratio_grid = f.ratios;
  if (f.given("trials")) c.trials = f.trials;
  if (f.given("seed")) c.base_seed = f.seed;
  if (f.given("max-iters")) c.max_iters = f.max_iters;
  if (f.given("power-iters")) c.power_iters = f.power_iters;
  validate(c);
  return c;
}

inline RunOptions resolve_run(const Flags& f) {
  RunOptions o;
  o.threads = f.given("threads") ? f.threads : default_thread_count();
  return o;
}

inline void print_table(std::ostream& out, const ResultTable& t) {
  out << std::setw(8) << "N/d" << std::setw(8) << "N" << std::setw(8) << "trials" << std::setw(16) << "GSI err"
      << std::setw(16) << "SI err" << std::setw(14) << "success" << "\n";
  for (const auto& r : t.rows) {
    out << std::setw(8) << r.ratio << std::setw(8) << r.n << std::setw(8) << r.trials << std::setw(16)
        << r.gsi_init_error << std::setw(16) << (r.si_init_error ? std::to_string(*r.si_init_error) : "-")
        << std::setw(14) << (r.success_rate ? std::to_string(*r.success_rate) : "-") << "\n";
  }
}

inline int run_bench(const Flags& f, ExperimentKind kind, std::ostream& out) {
  const ExperimentConfig cfg = resolve_config(f, kind);
  const RunOptions run = resolve_run(f);
  const ExperimentResult res =
      kind == ExperimentKind::InitError ? run_init_experiment(cfg, run) : run_recovery_experiment(cfg, run);
  print_table(out, res.table);
  if (!f.out.empty()) export_table(res.table, cfg, f.out, parse_format(f.format));
  if (!f.records.empty()) write_text_file(f.records, records_to_csv(res.records));
  return 0;
}

inline int run_verify(const Flags& f, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(f, ExperimentKind::MomentVerify);
  const std::size_t d = f.given("d") ? f.d : 3;
  const std::size_t n = f.samples;
  require(n >= 10000, "--samples must be at least 10000");
  const MomentProfile p = moment_profile(cfg.ensemble);
  const DerivedConstants dc = derived_constants(p);
  out << "ensemble " << describe(cfg.ensemble) << ": tau = (" << p.tau1 << ", " << p.tau2 << ", " << p.tau3 << ", "
      << p.tau4 << "), alpha = " << dc.alpha << ", beta = " << dc.beta << ", alpha_hat = " << dc.alpha_hat
      << ", epsilon0 = " << dc.epsilon0 << "\n";

  std::vector<ResidualReport> reports = dispatch_field(cfg.ensemble.field, [&]<class S>() {
    std::vector<ResidualReport> r;
    const Vec<S> x = generate_signal<S>(d, derive_seed(cfg.base_seed, {1}), 1.0);
    const Vec<S> h = generate_signal<S>(d, derive_seed(cfg.base_seed, {2}), 1.0);
    r.push_back(mc_condition_residual<S>(cfg.ensemble, x, n, derive_seed(cfg.base_seed, {3})));
    if constexpr (std::is_same_v<S, cdouble>)
      r.push_back(mc_F_residual(cfg.ensemble, x, n, derive_seed(cfg.base_seed, {4})));
    r.push_back(mc_scalar_identities<S>(cfg.ensemble, x, h, n, derive_seed(cfg.base_seed, {5})));
    return r;
  });
  bool all = true;
  for (const auto& r : reports) {
    all = all && r.pass;
    for (const auto& c : r.components)
      out << (c.pass ? "PASS " : "FAIL ") << r.estimator << " " << c.name << ": residual " << c.residual
          << " tolerance " << c.tolerance << " (n=" << r.sample_count << ")\n";
  }
  if (!f.out.empty()) {
    if (parse_format(f.format) == Format::Csv) {
      write_text_file(f.out, reports_to_csv(reports));
    } else {
      json arr = json::array();
      for (const auto& r : reports) arr.push_back(report_to_json(r));
      json meta = config_to_json(cfg);
      meta["d"] = d;
      meta["samples"] = n;
      write_text_file(f.out, json{{"metadata", meta}, {"reports", arr}}.dump(2) + "\n");
    }
  }
  return all ? 0 : 1;
}

inline int run_solve(const Flags& f, std::ostream& out) {
  ExperimentConfig cfg = resolve_config(f, ExperimentKind::SingleSolve);
  if (!f.given("ratios") && f.config.empty()) cfg.ratio_grid = {6};
  const double ratio = cfg.ratio_grid.front();
  const std::size_t n = measurement_count(ratio, cfg.d);
  const MomentProfile p = moment_profile(cfg.ensemble);
  const std::uint64_t seed = trial_seed(cfg.base_seed, ratio, 0);

  return dispatch_field(cfg.ensemble.field, [&]<class S>() {
    const Vec<S> x = generate_signal<S>(cfg.d, stream_seed(seed, Stream::Signal), cfg.spike_factor);
    const auto set = sample_measurements<S>(cfg.ensemble, n, cfg.d, stream_seed(seed, Stream::Measurements));
    const RealVec y = measure<S>(set, x);
    const InitResult<S> init = gsi<S>(set, y, p, stream_seed(seed, Stream::PowerStart), cfg.power_iters);
    SolverConfig sc;
    sc.max_iters = cfg.max_iters;
    sc.trace = true;
    const SolveReport<S> rep = solve<S>(set, y, init.z0, sc, &x);
    const double init_err = relative_error<S>(init.z0, x);
    const double final_err = relative_error<S>(rep.final_z, x);
    out << "ensemble " << describe(cfg.ensemble) << " d=" << cfg.d << " N=" << n << "\n"
        << "init relative error  " << init_err << " (rho " << init.rho << ", lambda " << init.lambda
        << ", power residual " << init.residual << ")\n"
        << "final relative error " << final_err << " after " << rep.iterations << " iterations ("
        << to_string(rep.status) << ")\n"
        << (final_err < cfg.success_threshold ? "success" : "failure") << "\n";
    if (!f.out.empty()) {
      if (parse_format(f.format) == Format::Csv) {
        std::ostringstream os;
        os << "iteration,objective,grad_norm,rel_error\n";
        for (std::size_t k = 0; k < rep.trace.objective.size(); ++k)
          os << k << ',' << fmt_double(rep.trace.objective[k]) << ',' << fmt_double(rep.trace.grad_norm[k]) << ','
             << fmt_double(rep.trace.rel_error[k]) << "\n";
        write_text_file(f.out, os.str());
      } else {
        json meta = config_to_json(cfg);
        json j{{"metadata", meta},
               {"n", n},
               {"init_rel_error", init_err},
               {"final_rel_error", final_err},
               {"iterations", rep.iterations},
               {"status", to_string(rep.status)},
               {"trace",
                {{"objective", rep.trace.objective},
                 {"grad_norm", rep.trace.grad_norm},
                 {"rel_error", rep.trace.rel_error}}}};
        write_text_file(f.out, j.dump(2) + "\n");
      }
    }
    return 0;
  });
}

}  // namespace cli_detail

/// Entry point of the gsipr command-line tool. Returns the process exit status:
/// 0 on success, 1 when a verification check fails, 2 on invalid input.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Generalized spectral initialization and Wirtinger-flow phase retrieval benchmarks"};
  app.require_subcommand(1);

  cli_detail::Flags init_f, rec_f, ver_f, solve_f;
  auto* init_cmd = app.add_subcommand("init-bench", "initialization error vs N/d (GSI and classical SI)");
  auto* rec_cmd = app.add_subcommand("recover-bench", "success rate vs N/d (GSI + Barzilai-Borwein descent)");
  auto* ver_cmd = app.add_subcommand("verify-moments", "Monte-Carlo check of the ensemble moment identities");
  auto* solve_cmd = app.add_subcommand("solve", "single seeded recovery with a full trace");
  cli_detail::add_common(init_cmd, init_f);
  cli_detail::add_common(rec_cmd, rec_f);
  cli_detail::add_common(ver_cmd, ver_f);
  cli_detail::add_common(solve_cmd, solve_f);
  init_f.opts["records"] = init_cmd->add_option("--records", init_f.records, "per-trial CSV (includes wall time)");
  rec_f.opts["records"] = rec_cmd->add_option("--records", rec_f.records, "per-trial CSV (includes wall time)");
  ver_f.samples = 1000000;
  ver_cmd->add_option("--samples", ver_f.samples, "Monte-Carlo sample count")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (init_cmd->parsed()) return cli_detail::run_bench(init_f, ExperimentKind::InitError, out);
    if (rec_cmd->parsed()) return cli_detail::run_bench(rec_f, ExperimentKind::SuccessRate, out);
    if (ver_cmd->parsed()) return cli_detail::run_verify(ver_f, out);
    if (solve_cmd->parsed()) return cli_detail::run_solve(solve_f, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace gsipr
