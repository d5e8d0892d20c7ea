#pragma once

// Explicit image model: a weighted sum of anisotropic 2D Gaussian elements
//
//   F(x) = sum_i w_i * exp(-(x - mu_i)^T A_i (x - mu_i))
//
// evaluated at normalized image coordinates. Elements are optimized in an
// unconstrained raw space (6 reals per element) and decoded through squashing
// functions so that every decoded element is well formed.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gaussmix/errors.hpp"

namespace gaussmix {

struct Vec2 {
  double x1 = 0.0;
  double x2 = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x1 + b.x1, a.x2 + b.x2}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x1 - b.x1, a.x2 - b.x2}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x1, s * a.x2}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

/// Row-major 2x2 matrix [[a11, a12], [a21, a22]].
struct Mat2 {
  double a11 = 0.0;
  double a12 = 0.0;
  double a21 = 0.0;
  double a22 = 0.0;

  static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }

  constexpr double determinant() const { return a11 * a22 - a21 * a12; }
  constexpr bool symmetric() const { return a12 == a21; }
  constexpr Mat2 transposed() const { return {a11, a21, a12, a22}; }

  friend constexpr Vec2 operator*(const Mat2& m, Vec2 v) {
    return {m.a11 * v.x1 + m.a12 * v.x2, m.a21 * v.x1 + m.a22 * v.x2};
  }
  friend constexpr Mat2 operator*(const Mat2& a, const Mat2& b) {
    return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
            a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
  }
  friend constexpr Mat2 operator*(double s, const Mat2& m) {
    return {s * m.a11, s * m.a12, s * m.a21, s * m.a22};
  }
  friend constexpr bool operator==(const Mat2&, const Mat2&) = default;
};

/// d^T A d, evaluated the same way everywhere so render and fit agree bit for bit.
inline double quadratic_form(const Mat2& a, double d1, double d2) {
  return d1 * (a.a11 * d1 + a.a12 * d2) + d2 * (a.a21 * d1 + a.a22 * d2);
}

/// Eigenvalues of a symmetric 2x2 matrix, ascending. The eigenvalue nearer zero
/// comes from det / (other eigenvalue), which avoids cancellation.
inline std::pair<double, double> symmetric_eigenvalues(const Mat2& a) {
  const double mean = 0.5 * (a.a11 + a.a22);
  const double half_diff = 0.5 * (a.a11 - a.a22);
  const double radius = std::hypot(half_diff, a.a12);
  const double det = a.a11 * a.a22 - a.a12 * a.a21;
  if (mean >= 0.0) {
    const double big = mean + radius;
    return {big == 0.0 ? 0.0 : det / big, big};
  }
  const double small = mean - radius;
  return {small, det / small};
}

struct GaussianElement {
  double weight = 0.0;
  Vec2 center;
  Mat2 precision;

  friend bool operator==(const GaussianElement&, const GaussianElement&) = default;
};

struct ImageDims {
  std::size_t height = 0;
  std::size_t width = 0;

  friend bool operator==(ImageDims, ImageDims) = default;
};

struct MixtureModel {
  std::vector<GaussianElement> elements;
  std::optional<ImageDims> source_dims;

  std::size_t n_elements() const { return elements.size(); }

  friend bool operator==(const MixtureModel&, const MixtureModel&) = default;
};

/// Elements of `a` followed by elements of `b`; provenance is taken from `a`.
inline MixtureModel concat(const MixtureModel& a, const MixtureModel& b) {
  MixtureModel out = a;
  out.elements.insert(out.elements.end(), b.elements.begin(), b.elements.end());
  return out;
}

// ---------------------------------------------------------------------------
// Squashing functions
// ---------------------------------------------------------------------------

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

namespace detail {

inline constexpr double kBelowOne = 1.0 - std::numeric_limits<double>::epsilon() / 2;

// tanh and sigmoid round to exactly +-1 / 0 / 1 for large arguments; keep the
// decoded values inside the open intervals the model needs.
inline double open_signed_unit(double v) {
  if (v >= 1.0) return kBelowOne;
  if (v <= -1.0) return -kBelowOne;
  return v;
}

inline double open_unit(double v) {
  if (v >= 1.0) return kBelowOne;
  if (v <= 0.0) return std::numeric_limits<double>::denorm_min();
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Precision construction
// ---------------------------------------------------------------------------

struct Precision {
  Mat2 matrix;
  /// True when t1 * t2 == 0: the matrix is only positive semidefinite.
  bool degenerate = false;
};

/// A = [[t1^2, rho t1 t2], [rho t1 t2, t2^2]]. Positive definite for t1, t2 != 0.
inline Precision build_precision(Vec2 t, double rho) {
  if (!(std::abs(rho) < 1.0)) {
    throw ConstraintError("build_precision: |rho| must be < 1, got " + std::to_string(rho));
  }
  const double off = rho * t.x1 * t.x2;
  return {Mat2{t.x1 * t.x1, off, off, t.x2 * t.x2}, t.x1 * t.x2 == 0.0};
}

// ---------------------------------------------------------------------------
// Raw parameters
// ---------------------------------------------------------------------------

inline constexpr std::size_t kParamsPerElement = 6;

/// Offsets of each raw entry inside one element's block of six.
enum RawSlot : std::size_t {
  kCenter1 = 0,  // pre-sigmoid mu1
  kCenter2 = 1,  // pre-sigmoid mu2
  kScale1 = 2,   // t1
  kScale2 = 3,   // t2
  kCorr = 4,     // pre-tanh rho
  kWeight = 5,   // pre-tanh w
};

/// The unconstrained optimization variable: 6N reals.
class RawParameters {
 public:
  RawParameters() = default;
  explicit RawParameters(std::vector<double> theta) : theta_(std::move(theta)) {
    if (theta_.empty() || theta_.size() % kParamsPerElement != 0) {
      throw ShapeError("raw parameter length must be a positive multiple of 6, got " +
                       std::to_string(theta_.size()));
    }
  }

  std::size_t n_elements() const { return theta_.size() / kParamsPerElement; }
  std::size_t size() const { return theta_.size(); }

  std::span<const double> values() const { return theta_; }
  std::span<double> values() { return theta_; }
  std::span<const double> element(std::size_t i) const {
    return std::span<const double>(theta_).subspan(i * kParamsPerElement, kParamsPerElement);
  }

  double operator[](std::size_t j) const { return theta_[j]; }
  double& operator[](std::size_t j) { return theta_[j]; }

  friend bool operator==(const RawParameters&, const RawParameters&) = default;

 private:
  std::vector<double> theta_;
};

/// Intermediate decoded quantities for one element, kept by the gradient code.
struct DecodedElement {
  Vec2 center;
  Vec2 t;
  double rho = 0.0;
  double weight = 0.0;
  Precision precision;
};

inline DecodedElement decode_element(std::span<const double> block) {
  DecodedElement d;
  d.center = {detail::open_unit(sigmoid(block[kCenter1])),
              detail::open_unit(sigmoid(block[kCenter2]))};
  d.t = {block[kScale1], block[kScale2]};
  d.rho = detail::open_signed_unit(std::tanh(block[kCorr]));
  d.weight = detail::open_signed_unit(std::tanh(block[kWeight]));
  d.precision = build_precision(d.t, d.rho);
  return d;
}

inline MixtureModel decode(const RawParameters& raw) {
  if (raw.size() == 0 || raw.size() % kParamsPerElement != 0) {
    throw ShapeError("decode: raw parameter length must be a positive multiple of 6");
  }
  MixtureModel model;
  model.elements.reserve(raw.n_elements());
  for (std::size_t i = 0; i < raw.n_elements(); ++i) {
    const DecodedElement d = decode_element(raw.element(i));
    model.elements.push_back({d.weight, d.center, d.precision.matrix});
  }
  return model;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

inline double eval_element(const GaussianElement& e, Vec2 x) {
  return std::exp(-quadratic_form(e.precision, x.x1 - e.center.x1, x.x2 - e.center.x2));
}

inline double eval_mixture(const MixtureModel& model, Vec2 x) {
  double sum = 0.0;
  for (const auto& e : model.elements) {
    sum += e.weight * eval_element(e, x);
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct ModelReport {
  std::vector<std::size_t> non_finite;
  std::vector<std::size_t> asymmetric;
  /// Elements whose precision is not positive definite (flat or indefinite).
  std::vector<std::size_t> degenerate;

  bool ok() const { return non_finite.empty() && asymmetric.empty() && degenerate.empty(); }
};

inline ModelReport validate_model(const MixtureModel& model) {
  ModelReport report;
  for (std::size_t i = 0; i < model.elements.size(); ++i) {
    const auto& e = model.elements[i];
    const Mat2& a = e.precision;
    const bool finite = std::isfinite(e.weight) && std::isfinite(e.center.x1) &&
                        std::isfinite(e.center.x2) && std::isfinite(a.a11) &&
                        std::isfinite(a.a12) && std::isfinite(a.a21) && std::isfinite(a.a22);
    if (!finite) {
      report.non_finite.push_back(i);
      continue;
    }
    if (!a.symmetric()) report.asymmetric.push_back(i);
    if (!(a.a11 > 0.0 && a.a22 > 0.0 && a.determinant() > 0.0)) report.degenerate.push_back(i);
  }
  return report;
}

}  // namespace gaussmix
