#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gaussmix/errors.hpp"
#include "gaussmix/grid.hpp"
#include "gaussmix/mask.hpp"

namespace gaussmix {

inline double mse(const Grid<double>& a, const Grid<double>& b, const Mask& mask) {
  require_same_shape(a, b, "mse");
  require_same_shape(a, mask, "mse");
  if (!mask.any()) throw EmptyMaskError("mse: mask has no observed pixels");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!mask[i]) continue;
    const double d = a[i] - b[i];
    sum += d * d;
    ++n;
  }
  return sum / static_cast<double>(n);
}

inline double mse(const Grid<double>& a, const Grid<double>& b) {
  return mse(a, b, Mask::full(a.height(), a.width()));
}

/// Peak absolute error.
inline double pae(const Grid<double>& a, const Grid<double>& b, const Mask& mask) {
  require_same_shape(a, b, "pae");
  require_same_shape(a, mask, "pae");
  if (!mask.any()) throw EmptyMaskError("pae: mask has no observed pixels");
  double peak = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (mask[i]) peak = std::max(peak, std::abs(a[i] - b[i]));
  }
  return peak;
}

inline double pae(const Grid<double>& a, const Grid<double>& b) {
  return pae(a, b, Mask::full(a.height(), a.width()));
}

inline double mse_ratio(double baseline_mse, double ours_mse) {
  if (!(ours_mse > 0.0)) {
    throw InvalidArgumentError("mse_ratio: denominator must be > 0, got " + std::to_string(ours_mse));
  }
  return baseline_mse / ours_mse;
}

/// Peak signal-to-noise ratio in dB for unit peak; +infinity when the inputs agree.
inline double psnr_from_mse(double m) {
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / m);
}

inline double psnr(const Grid<double>& a, const Grid<double>& b) { return psnr_from_mse(mse(a, b)); }

inline double psnr(const Grid<double>& a, const Grid<double>& b, const Mask& mask) {
  return psnr_from_mse(mse(a, b, mask));
}

}  // namespace gaussmix
