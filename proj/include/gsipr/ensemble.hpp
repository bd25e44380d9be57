#pragma once

#include "gsipr/rng.hpp"
#include "gsipr/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

namespace gsipr {

// ---------------------------------------------------------------------------
// Entry distributions
// ---------------------------------------------------------------------------

struct Gaussian {};
/// U[-1, 1].
struct Uniform {};
/// Atoms -1, 0, 1 with probability 1/3 each.
struct Ternary {};
/// User supplied symmetric, mean-zero real sampler with declared absolute
/// moments. Must be certified with the Monte-Carlo condition check before an
/// experiment accepts it.
struct Custom {
  std::function<double(Rng&)> sampler;
  double m2 = 0.0;
  double m4 = 0.0;
  std::string name = "custom";
};

using EntryDistribution = std::variant<Gaussian, Uniform, Ternary, Custom>;

struct Ensemble {
  Field field = Field::Real;
  EntryDistribution entry = Gaussian{};
};

struct EntryMoments {
  double m2;
  double m4;
};

inline std::string entry_name(const EntryDistribution& e) {
  return std::visit(
      [](const auto& d) -> std::string {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Gaussian>) return "gaussian";
        else if constexpr (std::is_same_v<T, Uniform>) return "uniform";
        else if constexpr (std::is_same_v<T, Ternary>) return "ternary";
        else return d.name;
      },
      e);
}

inline EntryDistribution parse_entry(const std::string& s) {
  if (s == "gaussian") return Gaussian{};
  if (s == "uniform") return Uniform{};
  if (s == "ternary") return Ternary{};
  throw std::invalid_argument("unknown ensemble '" + s + "' (expected gaussian|uniform|ternary)");
}

inline bool is_builtin(const EntryDistribution& e) { return !std::holds_alternative<Custom>(e); }

inline std::string describe(const Ensemble& e) { return to_string(e.field) + "/" + entry_name(e.entry); }

/// Exact second and fourth absolute moments of one real entry draw.
inline EntryMoments entry_moments(const EntryDistribution& entry) {
  return std::visit(
      [](const auto& d) -> EntryMoments {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          return {1.0, 3.0};
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return {1.0 / 3.0, 1.0 / 5.0};
        } else if constexpr (std::is_same_v<T, Ternary>) {
          return {2.0 / 3.0, 2.0 / 3.0};
        } else {
          if (!d.sampler) throw std::invalid_argument("custom distribution has no sampler");
          if (!std::isfinite(d.m2) || !std::isfinite(d.m4) || d.m2 <= 0.0)
            throw std::invalid_argument("custom distribution: m2 must be finite and positive");
          if (d.m4 < d.m2 * d.m2)
            throw std::invalid_argument("custom distribution: m4 < m2^2 is inconsistent");
          return {d.m2, d.m4};
        }
      },
      entry);
}

// ---------------------------------------------------------------------------
// Moment profile and derived constants
// ---------------------------------------------------------------------------

/// E(A) = tau1 I and E((x*Ax)A) = tau2 |x|^2 I + tau3 xx* + tau4 diag(|x_i|^2).
struct MomentProfile {
  double tau1 = 0.0;
  double tau2 = 0.0;
  double tau3 = 0.0;
  double tau4 = 0.0;
};

class ProfileError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Throws ProfileError naming the first violated positivity inequality.
inline void check_profile(const MomentProfile& p) {
  auto fail = [](const char* what) { throw ProfileError(std::string("moment profile violates ") + what); };
  if (!(std::isfinite(p.tau1) && std::isfinite(p.tau2) && std::isfinite(p.tau3) && std::isfinite(p.tau4)))
    fail("finiteness");
  if (!(p.tau1 > 0.0)) fail("tau1 > 0");
  if (!(p.tau2 > 0.0)) fail("tau2 > 0");
  if (!(p.tau3 > 0.0)) fail("tau3 > 0");
  if (!(p.tau3 + p.tau4 > 0.0)) fail("tau3 + tau4 > 0");
}

/// Closed forms for i.i.d. symmetric entries. Complex entries are
/// (u + iv)/sqrt(2) with u, v independent copies of the real entry.
inline MomentProfile moment_profile(const Ensemble& e) {
  const auto [m2, m4] = entry_moments(e.entry);
  MomentProfile p;
  if (e.field == Field::Real) {
    p = {m2, m2 * m2, 2.0 * m2 * m2, m4 - 3.0 * m2 * m2};
  } else {
    p = {m2, m2 * m2, m2 * m2, 0.5 * (m4 - 3.0 * m2 * m2)};
  }
  check_profile(p);
  return p;
}

struct DerivedConstants {
  double alpha;      ///< tau2 + tau3 - (tau4)_-
  double beta;       ///< tau3 - (tau4)_-
  double alpha_hat;  ///< tau2 + tau3 + |tau4|
  double epsilon0;   ///< radius of the basin of linear convergence (relative)
};

inline double negative_part(double t) { return std::max(-t, 0.0); }

inline DerivedConstants derived_constants(const MomentProfile& p) {
  check_profile(p);
  DerivedConstants c{};
  c.alpha = p.tau2 + p.tau3 - negative_part(p.tau4);
  c.beta = p.tau3 - negative_part(p.tau4);
  c.alpha_hat = p.tau2 + p.tau3 + std::abs(p.tau4);
  const double t4 = std::abs(p.tau4);
  c.epsilon0 = 10.0 / (27.0 * c.alpha) * (std::sqrt(36.0 * t4 * t4 + 27.0 * c.alpha * c.beta / 10.0) - 6.0 * t4);
  return c;
}

/// Smoothness constant of the step-size bound xi <= 2/R. Two variants exist
/// for the last term: with and without the log N factor. Both are reported.
struct TheoreticalR {
  double delta;
  double with_log_n;
  double without_log_n;
};

inline TheoreticalR theoretical_R(const MomentProfile& p, std::size_t d, std::size_t n,
                                  std::optional<double> delta = std::nullopt) {
  const DerivedConstants c = derived_constants(p);
  const double del = delta.value_or(c.beta / 10.0);
  if (!(del > 0.0) || !(del < c.beta))
    throw std::invalid_argument("theoretical_R requires 0 < delta < beta");
  require(d >= 1 && n >= 1, "theoretical_R requires d >= 1 and N >= 1");
  const double ah = c.alpha_hat;
  const double first = 96.0 * ah * ah * (1.0 + del * del) / (c.beta - del);
  const double tail = 60.0 * static_cast<double>(d) * p.tau1 * (1.0 + del) * c.epsilon0 * c.epsilon0;
  const double base = 270.0 * ah * (1.0 + del);
  return {del, std::max(first, base + tail * std::log(static_cast<double>(n))), std::max(first, base + tail)};
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

template <FieldScalar S>
struct MeasurementSet {
  RowMat<S> rows;  ///< N x d; row j is a_j

  std::size_t count() const { return static_cast<std::size_t>(rows.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(rows.cols()); }
};

namespace detail {

inline double draw_real(const EntryDistribution& entry, Rng& rng) {
  return std::visit(
      [&rng](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Gaussian>) {
          return std::normal_distribution<double>(0.0, 1.0)(rng);
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
        } else if constexpr (std::is_same_v<T, Ternary>) {
          return static_cast<double>(std::uniform_int_distribution<int>(-1, 1)(rng));
        } else {
          return d.sampler(rng);
        }
      },
      entry);
}

}  // namespace detail

/// One scalar draw in field S.
template <FieldScalar S>
S draw_entry(const EntryDistribution& entry, Rng& rng) {
  if constexpr (std::is_same_v<S, double>) {
    return detail::draw_real(entry, rng);
  } else {
    const double u = detail::draw_real(entry, rng);
    const double v = detail::draw_real(entry, rng);
    return cdouble(u, v) * M_SQRT1_2;
  }
}

/// Fills a length-d vector with i.i.d. entries.
template <FieldScalar S>
void draw_vector(const EntryDistribution& entry, Rng& rng, Eigen::Ref<Vec<S>> out) {
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = draw_entry<S>(entry, rng);
}

template <FieldScalar S>
MeasurementSet<S> sample_measurements(const Ensemble& e, std::size_t n, std::size_t d, std::uint64_t seed) {
  require(n >= 1 && d >= 1, "sample_measurements requires N >= 1 and d >= 1");
  require(e.field == field_of<S>, "sample_measurements: ensemble field does not match scalar type");
  entry_moments(e.entry);  // validates Custom
  Rng rng = make_rng(seed);
  MeasurementSet<S> set;
  set.rows.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  S* data = set.rows.data();
  for (std::size_t k = 0; k < n * d; ++k) data[k] = draw_entry<S>(e.entry, rng);
  return set;
}

}  // namespace gsipr
