#pragma once

#include "gsipr/ensemble.hpp"
#include "gsipr/types.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <variant>
#include <vector>

namespace gsipr {

/// E(z) = 1/(2N) sum_j (|<a_j, z>|^2 - y_j)^2.
template <FieldScalar S>
double objective(const Vec<S>& z, const MeasurementSet<S>& set, const RealVec& y) {
  require(static_cast<std::size_t>(z.size()) == set.dim(), "objective: dimension mismatch");
  require(static_cast<std::size_t>(y.size()) == set.count(), "objective: intensity length mismatch");
  const RealVec r = (set.rows.conjugate() * z).cwiseAbs2() - y;
  return r.squaredNorm() / (2.0 * static_cast<double>(set.count()));
}

/// g = 1/N sum_j (|<a_j,z>|^2 - y_j) <a_j,z> a_j.
/// The directional derivative of objective() along u is 2 Re<u, g>.
template <FieldScalar S>
Vec<S> gradient(const Vec<S>& z, const MeasurementSet<S>& set, const RealVec& y) {
  require(static_cast<std::size_t>(z.size()) == set.dim(), "gradient: dimension mismatch");
  require(static_cast<std::size_t>(y.size()) == set.count(), "gradient: intensity length mismatch");
  Vec<S> az = set.rows.conjugate() * z;
  for (Eigen::Index j = 0; j < az.size(); ++j) az[j] *= (abs2(az[j]) - y[j]);
  Vec<S> g = set.rows.transpose() * az;
  g /= static_cast<double>(set.count());
  return g;
}

struct AlignedDistance {
  double theta;  ///< in [0, 2pi)
  double value;  ///< ||z - x e^{i theta}||
};

/// Global phase (sign, in the real field) that best aligns x to z.
template <FieldScalar S>
AlignedDistance phase_align(const Vec<S>& z, const Vec<S>& x) {
  require(z.size() == x.size(), "phase_align: dimension mismatch");
  const S inner = x.dot(z);  // x* z
  const double zz = z.squaredNorm();
  const double xx = x.squaredNorm();
  double theta = 0.0;
  double abs_inner = 0.0;
  if constexpr (std::is_same_v<S, double>) {
    if (inner < 0.0) theta = std::numbers::pi;
    abs_inner = std::abs(inner);
  } else {
    if (inner != cdouble(0.0, 0.0)) {
      theta = std::arg(inner);
      if (theta < 0.0) theta += 2.0 * std::numbers::pi;
      if (theta >= 2.0 * std::numbers::pi) theta = 0.0;
    }
    abs_inner = std::abs(inner);
  }
  // ||z - x e^{i theta}||^2 = |z|^2 + |x|^2 - 2|x*z|; recompute directly when
  // cancellation would lose accuracy.
  double value2 = zz + xx - 2.0 * abs_inner;
  if (value2 < 1e-8 * (zz + xx)) {
    if constexpr (std::is_same_v<S, double>) {
      value2 = (z - x * (theta == 0.0 ? 1.0 : -1.0)).squaredNorm();
    } else {
      value2 = (z - x * std::polar(1.0, theta)).squaredNorm();
    }
  }
  return {theta, std::sqrt(std::max(value2, 0.0))};
}

template <FieldScalar S>
double relative_error(const Vec<S>& z, const Vec<S>& x) {
  const double xn = x.norm();
  require(xn > 0.0, "relative_error: ground truth is zero");
  return phase_align<S>(z, x).value / xn;
}

/// |Re<s, g>| / ||g||^2, or fallback when that quantity is degenerate.
template <FieldScalar S>
double bb_step(const Vec<S>& s, const Vec<S>& g, double fallback) {
  require(s.size() == g.size(), "bb_step: dimension mismatch");
  const double gg = g.squaredNorm();
  const double sg = real_part(g.dot(s));
  if (gg == 0.0 || sg == 0.0) return fallback;
  const double xi = std::abs(sg) / gg;
  if (!std::isfinite(xi) || xi <= 0.0) return fallback;
  return xi;
}

struct FixedStep {
  double xi;
};
/// Barzilai-Borwein stepping. Unset steps default to 0.1/||gradient(z0)||.
struct BarzilaiBorwein {
  std::optional<double> first_step;
  std::optional<double> fallback_step;
};
using StepMode = std::variant<FixedStep, BarzilaiBorwein>;

struct SolverConfig {
  StepMode step = BarzilaiBorwein{};
  int max_iters = 2000;
  double grad_norm_tol = 1e-16;
  bool trace = false;
};

enum class SolveStatus { GradToleranceMet, MaxIters, NonFinite };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::GradToleranceMet: return "grad_tolerance_met";
    case SolveStatus::MaxIters: return "max_iters";
    case SolveStatus::NonFinite: return "non_finite";
  }
  return "unknown";
}

struct SolveTrace {
  std::vector<double> objective;
  std::vector<double> grad_norm;
  std::vector<double> rel_error;  ///< empty without ground truth
};

template <FieldScalar S>
struct SolveReport {
  Vec<S> final_z;
  int iterations = 0;
  SolveStatus status = SolveStatus::MaxIters;
  double final_grad_norm = 0.0;
  SolveTrace trace;
};

/// Gradient descent z_{k+1} = z_k - xi_k gradient(z_k).
template <FieldScalar S>
SolveReport<S> solve(const MeasurementSet<S>& set, const RealVec& y, const Vec<S>& z0, const SolverConfig& cfg,
                     const Vec<S>* ground_truth = nullptr) {
  require(static_cast<std::size_t>(z0.size()) == set.dim(), "solve: dimension mismatch");
  require(static_cast<std::size_t>(y.size()) == set.count(), "solve: intensity length mismatch");
  require(cfg.max_iters >= 1, "solve: max_iters must be >= 1");
  require(all_finite<S>(z0), "solve: initial point is not finite");
  if (ground_truth) require(ground_truth->size() == z0.size(), "solve: ground truth dimension mismatch");
  if (const auto* f = std::get_if<FixedStep>(&cfg.step)) require(f->xi > 0.0, "solve: fixed step must be positive");

  SolveReport<S> rep;
  Vec<S> z = z0;
  Vec<S> g = gradient<S>(z, set, y);
  double gnorm = g.norm();

  auto record = [&] {
    if (!cfg.trace) return;
    rep.trace.objective.push_back(objective<S>(z, set, y));
    rep.trace.grad_norm.push_back(gnorm);
    if (ground_truth) rep.trace.rel_error.push_back(relative_error<S>(z, *ground_truth));
  };
  record();

  double first = 0.0, fallback = 0.0;
  if (const auto* bb = std::get_if<BarzilaiBorwein>(&cfg.step)) {
    const double boot = gnorm > 0.0 ? 0.1 / gnorm : 1.0;
    first = bb->first_step.value_or(boot);
    fallback = bb->fallback_step.value_or(boot);
    require(first > 0.0 && fallback > 0.0, "solve: BB steps must be positive");
  }

  Vec<S> z_prev, g_prev;
  rep.status = SolveStatus::MaxIters;
  for (int k = 0; k < cfg.max_iters; ++k) {
    if (gnorm < cfg.grad_norm_tol) {
      rep.status = SolveStatus::GradToleranceMet;
      break;
    }
    double xi = 0.0;
    if (const auto* f = std::get_if<FixedStep>(&cfg.step)) {
      xi = f->xi;
    } else {
      xi = k == 0 ? first : bb_step<S>(Vec<S>(z - z_prev), Vec<S>(g - g_prev), fallback);
    }
    Vec<S> z_next = z - xi * g;
    Vec<S> g_next = gradient<S>(z_next, set, y);
    const double gn = g_next.norm();
    if (!all_finite<S>(z_next) || !std::isfinite(gn)) {
      rep.status = SolveStatus::NonFinite;
      break;
    }
    z_prev = std::move(z);
    g_prev = std::move(g);
    z = std::move(z_next);
    g = std::move(g_next);
    gnorm = gn;
    ++rep.iterations;
    record();
  }
  if (rep.status == SolveStatus::MaxIters && gnorm < cfg.grad_norm_tol) rep.status = SolveStatus::GradToleranceMet;
  rep.final_z = std::move(z);
  rep.final_grad_norm = gnorm;
  return rep;
}

}  // namespace gsipr
