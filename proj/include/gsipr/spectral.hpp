#pragma once

#include "gsipr/ensemble.hpp"
#include "gsipr/rng.hpp"
#include "gsipr/types.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace gsipr {

/// y_j = |<a_j, x>|^2, without forming a_j a_j*.
template <FieldScalar S>
RealVec measure(const MeasurementSet<S>& set, const Vec<S>& x) {
  require(static_cast<std::size_t>(x.size()) == set.dim(), "measure: dimension mismatch");
  return (set.rows.conjugate() * x).cwiseAbs2();
}

/// rho^2 = sum(y) / (tau1 N).
inline double rho_from_intensities(const RealVec& y, double tau1) {
  require(tau1 > 0.0, "rho_from_intensities: tau1 must be positive");
  require(y.size() >= 1, "rho_from_intensities: empty intensity vector");
  return std::sqrt(y.sum() / (tau1 * static_cast<double>(y.size())));
}

/// Y = (1/N) sum_j y_j a_j a_j*.
template <FieldScalar S>
Mat<S> build_Y(const MeasurementSet<S>& set, const RealVec& y) {
  require(static_cast<std::size_t>(y.size()) == set.count(), "build_Y: intensity/measurement length mismatch");
  const auto n = static_cast<double>(set.count());
  Mat<S> weighted = y.cast<S>().asDiagonal() * set.rows.conjugate();
  Mat<S> out = set.rows.transpose() * weighted;
  out /= n;
  // Exact Hermitian symmetry; the product only guarantees it up to rounding.
  Mat<S> sym = (out + out.adjoint()) * 0.5;
  return sym;
}

/// Diagonal coefficient tau4 / (tau3 + tau4) of the correction term.
inline double diagonal_correction(const MomentProfile& p) {
  check_profile(p);
  return p.tau4 / (p.tau3 + p.tau4);
}

/// M = Y - tau4/(tau3+tau4) * D(Y - tau2 rho^2 I). Only the diagonal changes.
template <FieldScalar S>
Mat<S> build_M(const Mat<S>& y_mat, double rho, const MomentProfile& profile) {
  require(y_mat.rows() == y_mat.cols(), "build_M: Y must be square");
  const double c = diagonal_correction(profile);
  const double shift = profile.tau2 * rho * rho;
  Mat<S> m = y_mat;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double yii = real_part(y_mat(i, i));
    m(i, i) = S(yii - c * (yii - shift));
  }
  return m;
}

template <FieldScalar S>
struct PowerResult {
  double lambda;
  Vec<S> v;
  double residual;
  int iterations;
};

/// Random unit start vector in field S (Gaussian direction).
template <FieldScalar S>
Vec<S> random_unit(std::size_t d, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Vec<S> v(static_cast<Eigen::Index>(d));
  draw_vector<S>(Gaussian{}, rng, v);
  double nrm = v.norm();
  while (nrm == 0.0) {  // measure-zero; redraw
    draw_vector<S>(Gaussian{}, rng, v);
    nrm = v.norm();
  }
  return v / nrm;
}

/// Fixed-count power iteration on a Hermitian matrix. residual_tol > 0 allows
/// early exit once ||Mv - lambda v|| <= residual_tol.
template <FieldScalar S>
PowerResult<S> power_method(const Mat<S>& m, int iters, std::uint64_t seed, double residual_tol = 0.0) {
  require(iters >= 1, "power_method: iters must be >= 1");
  require(m.rows() == m.cols() && m.rows() >= 1, "power_method: matrix must be square and non-empty");
  require(m.cwiseAbs().maxCoeff() > 0.0, "power_method: zero matrix has no dominant direction");

  Vec<S> v = random_unit<S>(static_cast<std::size_t>(m.rows()), seed);
  Vec<S> mv(m.rows());
  int k = 0;
  for (; k < iters; ++k) {
    mv.noalias() = m * v;
    const double nrm = mv.norm();
    if (nrm == 0.0) throw std::domain_error("power_method: iterate fell into the null space");
    v = mv / nrm;
    if (residual_tol > 0.0) {
      mv.noalias() = m * v;
      const double lam = real_part(v.dot(mv));
      if ((mv - lam * v).norm() <= residual_tol) {
        ++k;
        break;
      }
    }
  }
  mv.noalias() = m * v;
  const double lambda = real_part(v.dot(mv));  // Eigen's dot conjugates the first argument
  const double residual = (mv - lambda * v).norm();
  return {lambda, std::move(v), residual, k};
}

template <FieldScalar S>
struct InitResult {
  Vec<S> z0;
  double rho;
  double lambda;
  double residual;
};

/// Generalized spectral initialization: leading eigenvector of M scaled to rho.
template <FieldScalar S>
InitResult<S> gsi(const MeasurementSet<S>& set, const RealVec& y, const MomentProfile& profile, std::uint64_t seed,
                  int power_iters = 50) {
  const double rho = rho_from_intensities(y, profile.tau1);
  const Mat<S> m = build_M<S>(build_Y<S>(set, y), rho, profile);
  PowerResult<S> pr = power_method<S>(m, power_iters, seed);
  return {pr.v * rho, rho, pr.lambda, pr.residual};
}

/// Classical spectral initialization: leading eigenvector of Y scaled to
/// sqrt(d * sum(y) / sum ||a_j||^2).
template <FieldScalar S>
InitResult<S> baseline_si(const MeasurementSet<S>& set, const RealVec& y, std::uint64_t seed, int power_iters = 50) {
  require(static_cast<std::size_t>(y.size()) == set.count(), "baseline_si: intensity/measurement length mismatch");
  const Mat<S> ymat = build_Y<S>(set, y);
  PowerResult<S> pr = power_method<S>(ymat, power_iters, seed);
  const double frame = set.rows.cwiseAbs2().sum();
  require(frame > 0.0, "baseline_si: all measurement vectors are zero");
  const double scale = std::sqrt(static_cast<double>(set.dim()) * y.sum() / frame);
  return {pr.v * scale, scale, pr.lambda, pr.residual};
}

}  // namespace gsipr
