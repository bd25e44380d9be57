// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "gsipr/gsipr.hpp"
#include "gsipr/io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace gsipr;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

const std::vector<Ensemble>& builtins() {
  static const std::vector<Ensemble> all = {
      {Field::Real, Gaussian{}}, {Field::Complex, Gaussian{}}, {Field::Real, Uniform{}},
      {Field::Complex, Uniform{}}, {Field::Real, Ternary{}},   {Field::Complex, Ternary{}}};
  return all;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

void note(Outcome& o, bool ok, const std::string& what) {
  o.pass = o.pass && ok;
  if (!ok || o.detail.empty()) {
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += what;
  }
}

Outcome moment_oracle() {
  Outcome o;
  double worst = 0.0, slowest = 0.0;
  for (const Ensemble& e : builtins()) {
    Stopwatch sw;
    const ResidualReport r = dispatch_field(e.field, [&]<class S>() {
      const Vec<S> x = generate_signal<S>(3, derive_seed(11, {1}), 1.0);
      return mc_condition_residual<S>(e, x, 1000000, derive_seed(11, {2}));
    });
    const double t = sw.seconds();
    slowest = std::max(slowest, t);
    worst = std::max(worst, r.residual / r.tolerance);
    if (!r.pass) note(o, false, describe(e) + " residual " + num(r.residual) + " > tol " + num(r.tolerance));
    if (t > 60.0) note(o, false, describe(e) + " took " + num(t) + " s");
  }
  if (o.pass) o.detail = "6 ensembles, worst residual/tolerance " + num(worst) + ", slowest " + num(slowest) + " s";
  return o;
}

template <FieldScalar S>
double fd_worst(const Ensemble& e, std::uint64_t seed) {
  const int d = 16, n = 64;
  const auto set = sample_measurements<S>(e, n, d, derive_seed(seed, {0}));
  Vec<S> x = generate_signal<S>(d, derive_seed(seed, {1}), 1.0);
  Vec<S> z = generate_signal<S>(d, derive_seed(seed, {2}), 1.0);
  x.normalize();
  z.normalize();
  const RealVec y = measure<S>(set, x);
  const Vec<S> g = gradient<S>(z, set, y);
  const double t = 1e-6;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    Vec<S> u = generate_signal<S>(d, derive_seed(seed, {3, static_cast<std::uint64_t>(k)}), 1.0);
    u.normalize();
    const double fd = (objective<S>(Vec<S>(z + t * u), set, y) - objective<S>(Vec<S>(z - t * u), set, y)) / (2 * t);
    const double an = 2.0 * real_part(u.dot(g));
    worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(an), 1.0));
  }
  return worst;
}

Outcome gradient_check() {
  Outcome o;
  Stopwatch sw;
  const double wr = fd_worst<double>({Field::Real, Gaussian{}}, 21);
  const double wc = fd_worst<cdouble>({Field::Complex, Ternary{}}, 22);
  const double t = sw.seconds();
  note(o, wr <= 1e-5, "real worst relative mismatch " + num(wr));
  note(o, wc <= 1e-5, "complex worst relative mismatch " + num(wc));
  note(o, t <= 5.0, "runtime " + num(t) + " s");
  if (o.pass) o.detail = "worst relative mismatch real " + num(wr) + ", complex " + num(wc) + ", " + num(t) + " s";
  return o;
}

double circular_gap(double a, double b) {
  const double d = std::remainder(a - b, 2.0 * std::numbers::pi);
  return std::abs(d);
}

template <FieldScalar S>
double alignment_worst(std::uint64_t seed) {
  const int d = 8, points = 4096;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Vec<S> z = generate_signal<S>(d, derive_seed(seed, {0, static_cast<std::uint64_t>(k)}), 1.0);
    const Vec<S> x = generate_signal<S>(d, derive_seed(seed, {1, static_cast<std::uint64_t>(k)}), 1.0);
    const double theta = phase_align<S>(z, x).theta;
    double best = std::numeric_limits<double>::infinity(), best_theta = 0.0;
    for (int j = 0; j < points; ++j) {
      const double th = 2.0 * std::numbers::pi * j / points;
      if constexpr (std::is_same_v<S, double>) {
        if (j != 0 && j != points / 2) continue;
      }
      double v;
      if constexpr (std::is_same_v<S, double>)
        v = (z - x * std::cos(th)).norm();
      else
        v = (z - x * std::polar(1.0, th)).norm();
      if (v < best) {
        best = v;
        best_theta = th;
      }
    }
    worst = std::max(worst, circular_gap(theta, best_theta));
  }
  return worst;
}

Outcome phase_alignment() {
  Outcome o;
  const double wr = alignment_worst<double>(31);
  const double wc = alignment_worst<cdouble>(32);
  note(o, wr <= 1e-3, "real worst angle gap " + num(wr));
  note(o, wc <= 1e-3, "complex worst angle gap " + num(wc));
  if (o.pass) o.detail = "worst angle gap real " + num(wr) + ", complex " + num(wc);
  return o;
}

Outcome init_comparison() {
  Outcome o;
  Stopwatch sw;
  ExperimentConfig c;
  c.kind = ExperimentKind::InitError;
  c.ensemble = {Field::Real, Ternary{}};
  c.d = 128;
  c.ratio_grid = {8, 10, 12, 14, 16, 18, 20};
  c.trials = 50;
  const ResultTable t = run_init_experiment(c, {default_thread_count()}).table;
  std::string summary;
  for (const auto& r : t.rows) {
    const bool ok = r.gsi_init_error < *r.si_init_error;
    if (!ok) note(o, false, "ratio " + num(r.ratio) + ": GSI " + num(r.gsi_init_error) + " >= SI " + num(*r.si_init_error));
    summary += (summary.empty() ? "" : ", ") + num(r.ratio) + ":" + num(r.gsi_init_error) + "<" + num(*r.si_init_error);
  }
  const double secs = sw.seconds();
  note(o, secs <= 600.0, "runtime " + num(secs) + " s");
  if (o.pass) o.detail = "GSI<SI at ratio " + summary + " (" + num(secs) + " s)";
  return o;
}

Outcome recovery_thresholds() {
  Outcome o;
  Stopwatch sw;
  struct Case {
    Ensemble e;
    double ratio;
    bool high;
  };
  const std::vector<Case> cases = {
      {{Field::Real, Uniform{}}, 4, true},   {{Field::Real, Ternary{}}, 4, true},
      {{Field::Complex, Uniform{}}, 6, true}, {{Field::Complex, Ternary{}}, 8, true},
      {{Field::Real, Uniform{}}, 2, false},  {{Field::Real, Ternary{}}, 2, false},
  };
  std::string summary;
  for (const Case& k : cases) {
    ExperimentConfig c;
    c.kind = ExperimentKind::SuccessRate;
    c.ensemble = k.e;
    c.d = 128;
    c.ratio_grid = {k.ratio};
    c.trials = 100;
    c.max_iters = 2000;
    const double rate = *run_recovery_experiment(c, {default_thread_count()}).table.rows[0].success_rate;
    const std::string label = describe(k.e) + " N=" + num(k.ratio) + "d rate " + num(rate);
    const bool ok = k.high ? rate >= 0.90 : rate <= 0.10;
    if (!ok) note(o, false, label + (k.high ? " < 0.90" : " > 0.10"));
    summary += (summary.empty() ? "" : ", ") + label;
  }
  const double secs = sw.seconds();
  note(o, secs <= 1800.0, "runtime " + num(secs) + " s");
  o.detail = (o.pass ? "" : o.detail + " | ") + summary + " (" + num(secs) + " s)";
  return o;
}

Outcome linear_convergence() {
  Outcome o;
  const Ensemble e{Field::Real, Ternary{}};
  const MomentProfile p = moment_profile(e);
  const std::size_t d = 32, n = 6 * d;
  int successes = 0, attempts = 0;
  double worst_r2 = 1.0, worst_slope = -std::numeric_limits<double>::infinity();
  for (; attempts < 100 && successes < 25; ++attempts) {
    const std::uint64_t ts = trial_seed(61, 6.0, attempts);
    const Vec<double> x = generate_signal<double>(d, stream_seed(ts, Stream::Signal));
    const auto set = sample_measurements<double>(e, n, d, stream_seed(ts, Stream::Measurements));
    const RealVec y = measure<double>(set, x);
    const auto init = gsi<double>(set, y, p, stream_seed(ts, Stream::PowerStart));
    SolverConfig sc;
    sc.trace = true;
    const auto rep = solve<double>(set, y, init.z0, sc, &x);
    if (!(relative_error<double>(rep.final_z, x) < 1e-5)) continue;
    ++successes;
    const RateFit f = convergence_rate_fit(rep.trace.rel_error, 1e-12);
    worst_r2 = std::min(worst_r2, f.r_squared);
    worst_slope = std::max(worst_slope, f.slope);
    if (!(f.slope < 0.0 && f.r_squared >= 0.95))
      note(o, false, "trial " + std::to_string(attempts) + " slope " + num(f.slope) + " R2 " + num(f.r_squared));
  }
  note(o, successes >= 20, "only " + std::to_string(successes) + " successful solves");
  if (o.pass)
    o.detail = std::to_string(successes) + " solves, worst slope " + num(worst_slope) + ", worst R2 " + num(worst_r2);
  return o;
}

Outcome concentration_trends() {
  Outcome o;
  double worst = 0.0;
  for (const Ensemble& e : builtins()) {
    const auto rows = dispatch_field(e.field, [&]<class S>() {
      const Vec<S> x = generate_signal<S>(16, derive_seed(71, {1}), 1.0);
      return concentration_curve<S>(e, x, {256, 1024, 4096}, 50, derive_seed(71, {2}));
    });
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double ry = rows[i].y_median / rows[i - 1].y_median;
      const double rm = rows[i].m_median / rows[i - 1].m_median;
      const double rr = rows[i].rho_median / rows[i - 1].rho_median;
      worst = std::max({worst, ry, rm, rr});
      const std::string at = describe(e) + " N " + std::to_string(rows[i - 1].n) + "->" + std::to_string(rows[i].n);
      if (ry > 0.75) note(o, false, at + " Y ratio " + num(ry));
      if (rm > 0.75) note(o, false, at + " M ratio " + num(rm));
      if (rr > 0.75) note(o, false, at + " rho ratio " + num(rr));
    }
  }
  if (o.pass) o.detail = "6 ensembles, worst median ratio per quadrupling " + num(worst);
  return o;
}

std::string deterministic_dump(ExperimentResult r) {
  for (auto& rec : r.records) rec.wall_time = 0.0;
  return table_to_csv(r.table) + records_to_csv(r.records);
}

Outcome invariants() {
  Outcome o;
  const double eps_cap = std::sqrt(10.0 / 27.0);
  double worst_asym = 0.0, worst_psd = 0.0, worst_ulps = 0.0;
  for (const Ensemble& e : builtins()) {
    const MomentProfile p = moment_profile(e);
    const DerivedConstants dc = derived_constants(p);
    note(o, dc.epsilon0 > 0.0 && dc.epsilon0 <= eps_cap, describe(e) + " epsilon0 " + num(dc.epsilon0));
    note(o, dc.alpha > 0.0 && dc.beta > 0.0 && p.tau3 + p.tau4 > 0.0,
         describe(e) + " positivity alpha " + num(dc.alpha) + " beta " + num(dc.beta));
    for (std::uint64_t s = 0; s < 5; ++s) {
      dispatch_field(e.field, [&]<class S>() {
        const std::size_t d = 24;
        const Vec<S> x = generate_signal<S>(d, derive_seed(81, {s, 1}));
        const auto set = sample_measurements<S>(e, 5 * d, d, derive_seed(81, {s, 2}));
        const RealVec y = measure<S>(set, x);
        const Mat<S> ym = build_Y<S>(set, y);
        const double rho = rho_from_intensities(y, p.tau1);
        const Mat<S> mm = build_M<S>(ym, rho, p);
        const double asym = max_asymmetry<S>(mm);
        const double ynorm = hermitian_op_norm<S>(ym);
        const double psd = -min_eigenvalue<S>(ym) / ynorm;
        const auto init = gsi<S>(set, y, p, derive_seed(81, {s, 3}));
        const double ulps = std::abs(init.z0.norm() - rho) / (rho * std::numeric_limits<double>::epsilon());
        worst_asym = std::max(worst_asym, asym);
        worst_psd = std::max(worst_psd, psd);
        worst_ulps = std::max(worst_ulps, ulps);
        if (asym > 1e-12) note(o, false, describe(e) + " M asymmetry " + num(asym));
        if (psd > 1e-10) note(o, false, describe(e) + " Y min eigenvalue " + num(-psd) + "*|Y|");
        if (ulps > 8.0) note(o, false, describe(e) + " |z0| off rho by " + num(ulps) + " ulps");
      });
    }
  }
  for (const ExperimentKind kind : {ExperimentKind::InitError, ExperimentKind::SuccessRate}) {
    ExperimentConfig c;
    c.kind = kind;
    c.ensemble = kind == ExperimentKind::InitError ? Ensemble{Field::Complex, Uniform{}} : Ensemble{Field::Real, Ternary{}};
    c.d = 24;
    c.ratio_grid = {3, 6};
    c.trials = 8;
    c.base_seed = 91;
    const std::string one = deterministic_dump(detail::run_experiment(c, {1}));
    const std::string four = deterministic_dump(detail::run_experiment(c, {4}));
    const std::string again = deterministic_dump(detail::run_experiment(c, {1}));
    note(o, one == four && one == again, to_string(kind) + " output differs across reruns/thread counts");
  }
  if (o.pass)
    o.detail = "max asymmetry " + num(worst_asym) + ", worst -lambda_min/|Y| " + num(worst_psd) + ", worst |z0|-rho " +
               num(worst_ulps) + " ulps, reruns byte-identical";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"moment-identity oracle", moment_oracle},
      {"gradient finite differences", gradient_check},
      {"phase alignment vs grid search", phase_alignment},
      {"GSI beats SI (ternary real, d=128)", init_comparison},
      {"recovery thresholds (d=128)", recovery_thresholds},
      {"linear convergence", linear_convergence},
      {"concentration trends", concentration_trends},
      {"invariants", invariants},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
