#pragma once

// Geometric transforms computed on element parameters alone; no pixels are
// touched. Each function returns a model `out` with
//
//   translate:  out(x) == in(x - offset)
//   scale:      out(x) == in(k * x)
//   rotate:     out(x) == in(R (x - center) + center),  R = [[cos, sin], [-sin, cos]]
//
// Angles are in radians.

#include <cmath>
#include <string>

#include "gaussmix/errors.hpp"
#include "gaussmix/model.hpp"

namespace gaussmix {

inline MixtureModel translate(const MixtureModel& model, Vec2 offset) {
  MixtureModel out = model;
  for (auto& e : out.elements) e.center = e.center + offset;
  return out;
}

inline MixtureModel scale(const MixtureModel& model, double k) {
  if (k == 0.0 || !std::isfinite(k)) {
    throw InvalidArgumentError("scale: factor must be finite and non-zero, got " + std::to_string(k));
  }
  MixtureModel out = model;
  const double k2 = k * k;
  for (auto& e : out.elements) {
    e.center = {e.center.x1 / k, e.center.x2 / k};
    e.precision = k2 * e.precision;
  }
  return out;
}

inline Mat2 rotation_matrix(double radians) {
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  return {c, s, -s, c};
}

inline MixtureModel rotate(const MixtureModel& model, double radians, Vec2 center) {
  const Mat2 rot = rotation_matrix(radians);
  const Mat2 inv = rot.transposed();
  const Vec2 shift = rot * center - center;
  MixtureModel out = model;
  for (auto& e : out.elements) {
    e.center = inv * (e.center + shift);
    const Mat2 a = inv * (e.precision * rot);
    // Congruence keeps A symmetric; mirror one off-diagonal so rounding cannot break that.
    e.precision = {a.a11, a.a12, a.a12, a.a22};
  }
  return out;
}

}  // namespace gaussmix
