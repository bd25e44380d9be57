#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace gsipr {

using cdouble = std::complex<double>;

enum class Field { Real, Complex };

template <class T>
struct is_complex : std::false_type {};
template <class T>
struct is_complex<std::complex<T>> : std::true_type {};

/// Scalar type carrying the field: double for the real field,
/// std::complex<double> for the complex field.
template <class S>
concept FieldScalar = std::is_same_v<S, double> || std::is_same_v<S, cdouble>;

template <FieldScalar S>
inline constexpr Field field_of = is_complex<S>::value ? Field::Complex : Field::Real;

template <FieldScalar S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <FieldScalar S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
/// N x d, row j holds the measurement vector a_j (not conjugated).
template <FieldScalar S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using RealVec = Eigen::VectorXd;

/// Invokes fn.template operator()<S>() with S matching the runtime field.
template <class Fn>
decltype(auto) dispatch_field(Field f, Fn&& fn) {
  if (f == Field::Real) return fn.template operator()<double>();
  return fn.template operator()<cdouble>();
}

inline std::string to_string(Field f) { return f == Field::Real ? "real" : "complex"; }

inline Field parse_field(const std::string& s) {
  if (s == "real") return Field::Real;
  if (s == "complex") return Field::Complex;
  throw std::invalid_argument("unknown field '" + s + "' (expected real|complex)");
}

inline double abs2(double v) { return v * v; }
inline double abs2(const cdouble& v) { return std::norm(v); }

inline double real_part(double v) { return v; }
inline double real_part(const cdouble& v) { return v.real(); }

template <FieldScalar S>
bool all_finite(const Vec<S>& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if constexpr (std::is_same_v<S, double>) {
      if (!std::isfinite(v[i])) return false;
    } else {
      if (!std::isfinite(v[i].real()) || !std::isfinite(v[i].imag())) return false;
    }
  }
  return true;
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace gsipr
