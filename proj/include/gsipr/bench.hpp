#pragma once

#include "gsipr/ensemble.hpp"
#include "gsipr/rng.hpp"
#include "gsipr/solver.hpp"
#include "gsipr/spectral.hpp"
#include "gsipr/types.hpp"
#include "gsipr/verify.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace gsipr {

enum class ExperimentKind { InitError, SuccessRate, MomentVerify, SingleSolve };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::InitError: return "init_error";
    case ExperimentKind::SuccessRate: return "success_rate";
    case ExperimentKind::MomentVerify: return "moment_verify";
    case ExperimentKind::SingleSolve: return "single_solve";
  }
  return "unknown";
}

inline ExperimentKind parse_kind(const std::string& s) {
  if (s == "init_error") return ExperimentKind::InitError;
  if (s == "success_rate") return ExperimentKind::SuccessRate;
  if (s == "moment_verify") return ExperimentKind::MomentVerify;
  if (s == "single_solve") return ExperimentKind::SingleSolve;
  throw std::invalid_argument("unknown experiment kind '" + s + "'");
}

inline std::vector<double> default_ratio_grid() { return {2, 4, 6, 8, 10, 12, 14, 16, 18, 20}; }

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::InitError;
  Ensemble ensemble{Field::Real, Ternary{}};
  std::size_t d = 128;
  std::vector<double> ratio_grid = default_ratio_grid();
  std::optional<int> trials;  ///< 50 for InitError, 100 otherwise
  double success_threshold = 1e-5;
  int max_iters = 2000;
  int power_iters = 50;
  double spike_factor = 200.0;
  std::uint64_t base_seed = 0;

  int trial_count() const { return trials.value_or(kind == ExperimentKind::InitError ? 50 : 100); }
};

inline void validate(const ExperimentConfig& c) {
  require(c.d >= 2, "config: d must be >= 2");
  require(!c.ratio_grid.empty(), "config: ratio grid is empty");
  for (double r : c.ratio_grid) require(std::isfinite(r) && r >= 1.0, "config: ratio values must be >= 1");
  require(c.trial_count() >= 1, "config: trials must be >= 1");
  require(c.max_iters >= 1, "config: max_iters must be >= 1");
  require(c.power_iters >= 1, "config: power_iters must be >= 1");
  require(c.success_threshold > 0.0, "config: success threshold must be positive");
  require(std::isfinite(c.spike_factor), "config: spike factor must be finite");
}

struct TrialRecord {
  double ratio = 0.0;
  int trial_index = 0;
  std::uint64_t seed = 0;
  double init_rel_error = 0.0;
  std::optional<double> si_rel_error;
  std::optional<double> final_rel_error;
  int iterations = 0;
  bool success = false;
  double wall_time = 0.0;  ///< seconds; not part of any deterministic output
};

struct ResultRow {
  double ratio = 0.0;
  std::size_t n = 0;
  int trials = 0;
  double gsi_init_error = 0.0;
  std::optional<double> si_init_error;
  std::optional<double> success_rate;
};

struct ResultTable {
  std::vector<ResultRow> rows;
};

struct ExperimentResult {
  ResultTable table;
  std::vector<TrialRecord> records;  ///< ordered by (ratio index, trial index)
};

struct RunOptions {
  int threads = 1;
};

/// Thread count from the environment (GSIPR_THREADS), else hardware concurrency.
inline int default_thread_count() {
  if (const char* env = std::getenv("GSIPR_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on `threads` workers. Results must be
/// written to pre-indexed slots; the first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::clamp<long>(threads, 1, static_cast<long>(std::max<std::size_t>(count, 1))));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lk(err_mu);
        if (!first_error) first_error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

/// Gaussian vector with the last two coordinates multiplied by spike_factor.
template <FieldScalar S>
Vec<S> generate_signal(std::size_t d, std::uint64_t seed, double spike_factor = 200.0) {
  require(d >= 2, "generate_signal: d must be >= 2");
  Rng rng = make_rng(seed);
  Vec<S> x(static_cast<Eigen::Index>(d));
  draw_vector<S>(Gaussian{}, rng, x);
  x[static_cast<Eigen::Index>(d) - 2] *= spike_factor;
  x[static_cast<Eigen::Index>(d) - 1] *= spike_factor;
  return x;
}

inline std::uint64_t trial_seed(std::uint64_t base, double ratio, int trial) {
  return derive_seed(base, {double_bits(ratio), static_cast<std::uint64_t>(trial)});
}

inline std::size_t measurement_count(double ratio, std::size_t d) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(d))));
}

/// Custom ensembles must reproduce their declared moment profile before use.
inline void certify_ensemble(const Ensemble& e, std::uint64_t seed = 0xce27ULL) {
  moment_profile(e);
  if (is_builtin(e.entry)) return;
  const bool ok = dispatch_field(e.field, [&]<class S>() {
    Vec<S> x = Vec<S>::Zero(3);
    x[0] = S(1.0);
    x[1] = S(-0.5);
    x[2] = S(0.25);
    return mc_condition_residual<S>(e, x, 100000, seed).pass;
  });
  if (!ok) throw ProfileError("custom ensemble failed the Monte-Carlo moment condition check");
}

namespace detail {

template <FieldScalar S>
TrialRecord run_trial(const ExperimentConfig& cfg, const MomentProfile& profile, double ratio, int t) {
  const auto start = std::chrono::steady_clock::now();
  TrialRecord rec;
  rec.ratio = ratio;
  rec.trial_index = t;
  rec.seed = trial_seed(cfg.base_seed, ratio, t);
  const std::size_t n = measurement_count(ratio, cfg.d);

  const Vec<S> x = generate_signal<S>(cfg.d, stream_seed(rec.seed, Stream::Signal), cfg.spike_factor);
  const auto set = sample_measurements<S>(cfg.ensemble, n, cfg.d, stream_seed(rec.seed, Stream::Measurements));
  const RealVec y = measure<S>(set, x);
  const std::uint64_t power_seed = stream_seed(rec.seed, Stream::PowerStart);
  const InitResult<S> init = gsi<S>(set, y, profile, power_seed, cfg.power_iters);
  rec.init_rel_error = relative_error<S>(init.z0, x);

  if (cfg.kind == ExperimentKind::InitError) {
    // Paired comparison: the baseline sees the same measurements and start vector.
    const InitResult<S> si = baseline_si<S>(set, y, power_seed, cfg.power_iters);
    rec.si_rel_error = relative_error<S>(si.z0, x);
  } else {
    SolverConfig sc;
    sc.step = BarzilaiBorwein{};
    sc.max_iters = cfg.max_iters;
    const SolveReport<S> rep = solve<S>(set, y, init.z0, sc);
    rec.iterations = rep.iterations;
    rec.final_rel_error = relative_error<S>(rep.final_z, x);
    rec.success = *rec.final_rel_error < cfg.success_threshold;
  }
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

inline ResultTable aggregate(const ExperimentConfig& cfg, const std::vector<TrialRecord>& recs) {
  ResultTable table;
  const int trials = cfg.trial_count();
  for (std::size_t r = 0; r < cfg.ratio_grid.size(); ++r) {
    ResultRow row;
    row.ratio = cfg.ratio_grid[r];
    row.n = measurement_count(row.ratio, cfg.d);
    row.trials = trials;
    double gsi_sum = 0.0, si_sum = 0.0;
    int successes = 0;
    for (int t = 0; t < trials; ++t) {
      const TrialRecord& rec = recs[r * static_cast<std::size_t>(trials) + static_cast<std::size_t>(t)];
      gsi_sum += rec.init_rel_error;
      if (rec.si_rel_error) si_sum += *rec.si_rel_error;
      if (rec.success) ++successes;
    }
    row.gsi_init_error = gsi_sum / trials;
    if (cfg.kind == ExperimentKind::InitError) {
      row.si_init_error = si_sum / trials;
    } else {
      row.success_rate = static_cast<double>(successes) / trials;
    }
    table.rows.push_back(row);
  }
  return table;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  validate(cfg);
  certify_ensemble(cfg.ensemble);
  const MomentProfile profile = moment_profile(cfg.ensemble);
  const int trials = cfg.trial_count();
  const std::size_t total = cfg.ratio_grid.size() * static_cast<std::size_t>(trials);
  std::vector<TrialRecord> recs(total);
  parallel_for(total, opts.threads, [&](std::size_t i) {
    const double ratio = cfg.ratio_grid[i / static_cast<std::size_t>(trials)];
    const int t = static_cast<int>(i % static_cast<std::size_t>(trials));
    recs[i] = dispatch_field(cfg.ensemble.field,
                             [&]<class S>() { return run_trial<S>(cfg, profile, ratio, t); });
  });
  ExperimentResult out;
  out.table = aggregate(cfg, recs);
  out.records = std::move(recs);
  return out;
}

}  // namespace detail

/// Mean GSI and SI relative initialization errors per N/d.
inline ExperimentResult run_init_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  require(cfg.kind == ExperimentKind::InitError, "run_init_experiment: config kind must be InitError");
  return detail::run_experiment(cfg, opts);
}

/// GSI followed by Barzilai-Borwein gradient descent; success rate per N/d.
inline ExperimentResult run_recovery_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  require(cfg.kind == ExperimentKind::SuccessRate, "run_recovery_experiment: config kind must be SuccessRate");
  return detail::run_experiment(cfg, opts);
}

}  // namespace gsipr
