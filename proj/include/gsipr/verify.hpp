#pragma once

#include "gsipr/ensemble.hpp"
#include "gsipr/rng.hpp"
#include "gsipr/solver.hpp"
#include "gsipr/spectral.hpp"
#include "gsipr/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gsipr {

// ---------------------------------------------------------------------------
// Linear algebra helpers
// ---------------------------------------------------------------------------

/// Largest |eigenvalue| of a Hermitian matrix. Dense eigensolve up to
/// dense_limit, power iteration on H^2 beyond it.
template <FieldScalar S>
double hermitian_op_norm(const Mat<S>& h, Eigen::Index dense_limit = 64) {
  if (h.size() == 0) return 0.0;
  const double fro = h.norm();
  if (fro == 0.0) return 0.0;
  if (h.rows() <= dense_limit) {
    Eigen::SelfAdjointEigenSolver<Mat<S>> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  Vec<S> v = random_unit<S>(static_cast<std::size_t>(h.rows()), 0x5eedULL);
  double mu = 0.0;
  for (int k = 0; k < 20000; ++k) {
    Vec<S> w = h * (h * v);
    mu = real_part(v.dot(w));
    const double res = (w - mu * v).norm();
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    if (res <= 1e-8 * fro * fro) break;
  }
  return std::sqrt(std::max(mu, 0.0));
}

template <FieldScalar S>
double max_asymmetry(const Mat<S>& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

template <FieldScalar S>
double min_eigenvalue(const Mat<S>& m) {
  Eigen::SelfAdjointEigenSolver<Mat<S>> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// tau2 |x|^2 I + tau3 xx* + tau4 diag(|x_i|^2).
template <FieldScalar S>
Mat<S> expected_Y(const MomentProfile& p, const Vec<S>& x) {
  const auto d = x.size();
  Mat<S> e = (p.tau3 * x) * x.adjoint();
  const double xx = x.squaredNorm();
  for (Eigen::Index i = 0; i < d; ++i) e(i, i) += S(p.tau2 * xx + p.tau4 * abs2(x[i]));
  return e;
}

/// tau2 |x|^2 I + tau3 xx*; the diagonal correction removes the tau4 term.
template <FieldScalar S>
Mat<S> expected_M(const MomentProfile& p, const Vec<S>& x) {
  Mat<S> e = (p.tau3 * x) * x.adjoint();
  e.diagonal().array() += S(p.tau2 * x.squaredNorm());
  return e;
}

// ---------------------------------------------------------------------------
// Residual reports
// ---------------------------------------------------------------------------

struct ResidualComponent {
  std::string name;
  double residual = 0.0;
  double std_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Top-level residual/tolerance are those of the component closest to (or
/// furthest past) its tolerance, so pass == (residual <= tolerance) holds.
struct ResidualReport {
  std::string estimator;
  std::size_t sample_count = 0;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::vector<ResidualComponent> components;
};

inline constexpr double kStdErrMultiplier = 5.0;
inline constexpr int kJackknifeChunks = 20;

namespace detail {

inline ResidualComponent make_component(std::string name, double residual, double se, double scale) {
  ResidualComponent c;
  c.name = std::move(name);
  c.residual = residual;
  c.std_error = se;
  // Floor keeps exact-zero cases (x = 0) from failing on rounding.
  c.tolerance = kStdErrMultiplier * se + 1e-12 * std::max(scale, 1.0);
  c.pass = residual <= c.tolerance;
  return c;
}

inline ResidualReport finalize(std::string estimator, std::size_t n, std::vector<ResidualComponent> comps) {
  ResidualReport r;
  r.estimator = std::move(estimator);
  r.sample_count = n;
  r.components = std::move(comps);
  r.pass = true;
  double worst = -1.0;
  for (const auto& c : r.components) {
    r.pass = r.pass && c.pass;
    const double ratio = c.tolerance > 0.0 ? c.residual / c.tolerance : (c.residual > 0.0 ? INFINITY : 0.0);
    if (ratio > worst) {
      worst = ratio;
      r.residual = c.residual;
      r.tolerance = c.tolerance;
    }
  }
  return r;
}

inline std::vector<std::size_t> chunk_sizes(std::size_t n, int chunks) {
  std::vector<std::size_t> out(static_cast<std::size_t>(chunks), n / static_cast<std::size_t>(chunks));
  for (std::size_t i = 0; i < n % static_cast<std::size_t>(chunks); ++i) ++out[i];
  return out;
}

/// Pooled mean of chunk means plus a jackknife standard error measured with
/// norm(). Each chunk estimate is a sum over its samples.
template <class T, class Norm>
std::pair<T, double> jackknife(const std::vector<T>& chunk_sums, const std::vector<std::size_t>& sizes, Norm norm) {
  const std::size_t k = chunk_sums.size();
  T total = chunk_sums[0];
  std::size_t n = sizes[0];
  for (std::size_t i = 1; i < k; ++i) {
    total = total + chunk_sums[i];
    n += sizes[i];
  }
  T mean = total / static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    T loo = (total - chunk_sums[i]) / static_cast<double>(n - sizes[i]);
    const double dev = norm(T(loo - mean));
    acc += dev * dev;
  }
  const double se = std::sqrt(static_cast<double>(k - 1) / static_cast<double>(k) * acc);
  return {mean, se};
}

}  // namespace detail

/// Monte-Carlo check of E(A) = tau1 I and
/// E((x*Ax)A) = tau2|x|^2 I + tau3 xx* + tau4 diag(|x_i|^2).
/// `profile` defaults to the ensemble's closed-form profile.
template <FieldScalar S>
ResidualReport mc_condition_residual(const Ensemble& e, const Vec<S>& x, std::size_t n_samples, std::uint64_t seed,
                                     std::optional<MomentProfile> profile = std::nullopt) {
  require(e.field == field_of<S>, "mc_condition_residual: field mismatch");
  require(x.size() >= 1 && x.norm() > 0.0, "mc_condition_residual: x must be non-zero");
  require(n_samples >= 10000, "mc_condition_residual: need at least 1e4 samples");
  const MomentProfile p = profile.value_or(moment_profile(e));
  check_profile(p);

  const auto d = x.size();
  const auto sizes = detail::chunk_sizes(n_samples, kJackknifeChunks);
  std::vector<Mat<S>> sum_a, sum_ya;
  Vec<S> a(d);
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    Rng rng = make_rng(derive_seed(seed, {c}));
    Mat<S> sa = Mat<S>::Zero(d, d), sy = Mat<S>::Zero(d, d);
    for (std::size_t s = 0; s < sizes[c]; ++s) {
      draw_vector<S>(e.entry, rng, a);
      const double yv = abs2(a.dot(x));
      sa.template selfadjointView<Eigen::Lower>().rankUpdate(a, 1.0);
      sy.template selfadjointView<Eigen::Lower>().rankUpdate(a, yv);
    }
    sa = sa.template selfadjointView<Eigen::Lower>();
    sy = sy.template selfadjointView<Eigen::Lower>();
    sum_a.push_back(std::move(sa));
    sum_ya.push_back(std::move(sy));
  }
  auto opn = [](const Mat<S>& m) { return hermitian_op_norm<S>(m); };
  auto [mean_a, se_a] = detail::jackknife(sum_a, sizes, opn);
  auto [mean_ya, se_ya] = detail::jackknife(sum_ya, sizes, opn);

  const Mat<S> exp_a = p.tau1 * Mat<S>::Identity(d, d);
  const Mat<S> exp_ya = expected_Y<S>(p, x);
  const double scale = x.squaredNorm();
  std::vector<ResidualComponent> comps;
  comps.push_back(detail::make_component("E(A)", hermitian_op_norm<S>(Mat<S>(mean_a - exp_a)), se_a, 1.0));
  comps.push_back(detail::make_component("E((x*Ax)A)", hermitian_op_norm<S>(Mat<S>(mean_ya - exp_ya)), se_ya, scale));
  return detail::finalize("mc_condition_residual", n_samples, std::move(comps));
}

/// Expected block matrix of (A x)(A x)* / (A x)(A x)^T products.
inline Mat<cdouble> expected_F(const MomentProfile& p, const Vec<cdouble>& x) {
  const auto d = x.size();
  const double xx = x.squaredNorm();
  Mat<cdouble> e(2 * d, 2 * d);
  Mat<cdouble> p11 = (p.tau2 * x) * x.adjoint();
  Mat<cdouble> p12 = ((p.tau2 + p.tau3) * x) * x.transpose();
  for (Eigen::Index i = 0; i < d; ++i) {
    p11(i, i) += p.tau3 * xx + p.tau4 * std::norm(x[i]);
    p12(i, i) += p.tau4 * x[i] * x[i];
  }
  e.topLeftCorner(d, d) = p11;
  e.topRightCorner(d, d) = p12;
  e.bottomLeftCorner(d, d) = p12.conjugate();
  e.bottomRightCorner(d, d) = p11.conjugate();
  return e;
}

/// Monte-Carlo check of the 2d x 2d block expectation of F(x). Complex field only.
inline ResidualReport mc_F_residual(const Ensemble& e, const Vec<cdouble>& x, std::size_t n_samples,
                                    std::uint64_t seed, std::optional<MomentProfile> profile = std::nullopt) {
  require(e.field == Field::Complex, "mc_F_residual: complex field only; use mc_condition_residual for real");
  require(x.size() >= 1, "mc_F_residual: empty x");
  require(n_samples >= 1000, "mc_F_residual: need at least 1e3 samples");
  const MomentProfile p = profile.value_or(moment_profile(e));
  check_profile(p);

  const auto d = x.size();
  const auto sizes = detail::chunk_sizes(n_samples, kJackknifeChunks);
  std::vector<Mat<cdouble>> sums;
  Vec<cdouble> a(d), w(2 * d);
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    Rng rng = make_rng(derive_seed(seed, {c}));
    Mat<cdouble> acc = Mat<cdouble>::Zero(2 * d, 2 * d);
    for (std::size_t s = 0; s < sizes[c]; ++s) {
      draw_vector<cdouble>(e.entry, rng, a);
      const cdouble ax = a.dot(x);  // a* x
      w.head(d) = a * ax;
      w.tail(d) = w.head(d).conjugate();
      acc.selfadjointView<Eigen::Lower>().rankUpdate(w, 1.0);
    }
    acc = acc.selfadjointView<Eigen::Lower>();
    sums.push_back(std::move(acc));
  }
  auto [mean, se] = detail::jackknife(sums, sizes, [](const Mat<cdouble>& m) { return hermitian_op_norm<cdouble>(m); });
  const double r = hermitian_op_norm<cdouble>(Mat<cdouble>(mean - expected_F(p, x)));
  std::vector<ResidualComponent> comps;
  comps.push_back(detail::make_component("E(F(x))", r, se, x.squaredNorm()));
  return detail::finalize("mc_F_residual", n_samples, std::move(comps));
}

struct ScalarIdentityTargets {
  double re2;      ///< E(Re^2(h*Ax))
  double re_abs;   ///< E(Re(h*Ax)|h*Ah|)
  double abs2;     ///< E(|h*Ah|^2)
};

/// Closed forms for unit x, h with Im(h*x) = 0.
template <FieldScalar S>
ScalarIdentityTargets scalar_identity_targets(const MomentProfile& p, const Vec<S>& x, const Vec<S>& h) {
  const double re_xh = real_part(x.dot(h));
  double hdx = 0.0, sum_h4 = 0.0;
  S hdx2 = S(0.0), xdh = S(0.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    hdx += abs2(h[i]) * abs2(x[i]);
    if constexpr (std::is_same_v<S, double>) {
      hdx2 += h[i] * h[i] * x[i] * x[i];
      xdh += x[i] * abs2(h[i]) * h[i];
    } else {
      hdx2 += std::conj(h[i]) * std::conj(h[i]) * x[i] * x[i];
      xdh += std::conj(x[i]) * abs2(h[i]) * h[i];
    }
    sum_h4 += abs2(h[i]) * abs2(h[i]);
  }
  ScalarIdentityTargets t{};
  t.re2 = p.tau3 / 2.0 + (p.tau2 + p.tau3 / 2.0) * re_xh * re_xh + p.tau4 / 2.0 * (hdx + real_part(hdx2));
  t.re_abs = (p.tau2 + p.tau3) * re_xh + p.tau4 * real_part(xdh);
  t.abs2 = (p.tau2 + p.tau3) + p.tau4 * sum_h4;
  return t;
}

/// Normalizes x and h and rotates h's phase so that h*x is real and >= 0.
template <FieldScalar S>
std::pair<Vec<S>, Vec<S>> admissible_pair(const Vec<S>& x, const Vec<S>& h) {
  require(x.size() == h.size() && x.size() >= 1, "admissible_pair: dimension mismatch");
  const double xn = x.norm(), hn = h.norm();
  require(xn > 0.0 && hn > 0.0 && std::isfinite(xn) && std::isfinite(hn), "admissible_pair: x and h must be non-zero");
  Vec<S> xu = x / xn;
  Vec<S> hu = h / hn;
  if constexpr (std::is_same_v<S, cdouble>) {
    const cdouble c = hu.dot(xu);  // h* x
    if (std::abs(c) > 0.0) hu *= std::polar(1.0, std::arg(c));
    require(std::abs(hu.dot(xu).imag()) <= 1e-12, "admissible_pair: Im(h*x) != 0 after projection");
  }
  return {xu, hu};
}

/// Monte-Carlo check of the three scalar expectations used in the basin
/// radius derivation.
template <FieldScalar S>
ResidualReport mc_scalar_identities(const Ensemble& e, const Vec<S>& x, const Vec<S>& h, std::size_t n_samples,
                                    std::uint64_t seed, std::optional<MomentProfile> profile = std::nullopt) {
  require(e.field == field_of<S>, "mc_scalar_identities: field mismatch");
  require(n_samples >= 1000, "mc_scalar_identities: need at least 1e3 samples");
  const MomentProfile p = profile.value_or(moment_profile(e));
  check_profile(p);
  const auto [xu, hu] = admissible_pair<S>(x, h);
  const auto d = xu.size();

  const auto sizes = detail::chunk_sizes(n_samples, kJackknifeChunks);
  std::vector<Eigen::Vector3d> sums;
  Vec<S> a(d);
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    Rng rng = make_rng(derive_seed(seed, {c}));
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    for (std::size_t s = 0; s < sizes[c]; ++s) {
      draw_vector<S>(e.entry, rng, a);
      const S ha = hu.dot(a);  // h* a
      const S ax = a.dot(xu);  // a* x
      const double re = real_part(ha * ax);
      const double hah = abs2(ha);
      acc += Eigen::Vector3d(re * re, re * hah, hah * hah);
    }
    sums.push_back(acc);
  }
  const ScalarIdentityTargets t = scalar_identity_targets<S>(p, xu, hu);
  const Eigen::Vector3d target(t.re2, t.re_abs, t.abs2);
  const char* names[3] = {"E(Re^2(h*Ax))", "E(Re(h*Ax)|h*Ah|)", "E(|h*Ah|^2)"};
  std::vector<ResidualComponent> comps;
  for (int i = 0; i < 3; ++i) {
    std::vector<double> s_i;
    for (const auto& v : sums) s_i.push_back(v[i]);
    auto [mean, se] = detail::jackknife(s_i, sizes, [](double v) { return std::abs(v); });
    comps.push_back(detail::make_component(names[i], std::abs(mean - target[i]), se, 1.0));
  }
  return detail::finalize("mc_scalar_identities", n_samples, std::move(comps));
}

// ---------------------------------------------------------------------------
// Concentration
// ---------------------------------------------------------------------------

/// Linear-interpolation quantile (q in [0, 1]).
inline double quantile(std::vector<double> v, double q) {
  require(!v.empty(), "quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct ConcentrationRow {
  std::size_t n;
  double y_median, y_p95;
  double m_median, m_p95;
  double rho_median, rho_p95;  ///< |rho^2 - |x|^2| / |x|^2
};

/// Per-N empirical deviations ||Y - E(Y)||, ||M - E(M)|| and the relative
/// deviation of rho^2, over `trials` independent measurement sets.
template <FieldScalar S>
std::vector<ConcentrationRow> concentration_curve(const Ensemble& e, const Vec<S>& x,
                                                  const std::vector<std::size_t>& n_grid, int trials,
                                                  std::uint64_t seed) {
  require(e.field == field_of<S>, "concentration_curve: field mismatch");
  require(trials >= 20, "concentration_curve: need at least 20 trials");
  require(x.size() >= 1, "concentration_curve: empty x");
  const MomentProfile p = moment_profile(e);
  const auto d = static_cast<std::size_t>(x.size());
  const Mat<S> ey = expected_Y<S>(p, x);
  const Mat<S> em = expected_M<S>(p, x);
  const double xx = x.squaredNorm();

  std::vector<ConcentrationRow> rows;
  for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
    const std::size_t n = n_grid[gi];
    require(n >= 1, "concentration_curve: N must be >= 1");
    std::vector<double> dy, dm, dr;
    for (int t = 0; t < trials; ++t) {
      const auto set = sample_measurements<S>(e, n, d, derive_seed(seed, {n, static_cast<std::uint64_t>(t)}));
      const RealVec y = measure<S>(set, x);
      const Mat<S> ymat = build_Y<S>(set, y);
      const double rho = rho_from_intensities(y, p.tau1);
      const Mat<S> mmat = build_M<S>(ymat, rho, p);
      dy.push_back(hermitian_op_norm<S>(Mat<S>(ymat - ey)));
      dm.push_back(hermitian_op_norm<S>(Mat<S>(mmat - em)));
      dr.push_back(xx > 0.0 ? std::abs(rho * rho - xx) / xx : rho * rho);
    }
    rows.push_back({n, quantile(dy, 0.5), quantile(dy, 0.95), quantile(dm, 0.5), quantile(dm, 0.95),
                    quantile(dr, 0.5), quantile(dr, 0.95)});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Convergence-rate diagnostics
// ---------------------------------------------------------------------------

struct RateFit {
  double slope;      ///< d log(error) / d iteration
  double intercept;
  double r_squared;  ///< 0 when the fitted points have no variance
  std::size_t points;
};

/// Least-squares fit of log(error) against iteration index over the leading
/// segment of the trace that stays above `floor`.
inline RateFit convergence_rate_fit(const std::vector<double>& trace, double floor = 1e-12) {
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    if (!(trace[k] > floor) || !std::isfinite(trace[k])) break;
    xs.push_back(static_cast<double>(k));
    ys.push_back(std::log(trace[k]));
  }
  require(xs.size() >= 10, "convergence_rate_fit: fewer than 10 points above the floor");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  RateFit f{};
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.points = xs.size();
  f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 0.0;
  return f;
}

}  // namespace gsipr
