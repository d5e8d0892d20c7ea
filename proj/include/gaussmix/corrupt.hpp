#pragma once

// Seeded corruption generators. Each returns the corrupted surface together
// with an observation mask (true = pixel still carries clean information).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "gaussmix/errors.hpp"
#include "gaussmix/mask.hpp"
#include "gaussmix/random.hpp"
#include "gaussmix/raster.hpp"

namespace gaussmix {

enum class CorruptionKind { occlusion, awgn, salt_pepper };

inline const char* to_string(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::occlusion: return "occlusion";
    case CorruptionKind::awgn: return "awgn";
    case CorruptionKind::salt_pepper: return "salt-pepper";
  }
  return "unknown";
}

struct CorruptionReport {
  CorruptionKind kind = CorruptionKind::occlusion;
  std::vector<std::pair<std::string, double>> parameters;
  std::uint64_t seed = 0;
  Mask mask;
};

struct Corrupted {
  Surface surface;
  CorruptionReport report;
};

/// One axis-aligned patch at a uniformly random position, filled with `fill`.
inline Corrupted occlude(const Surface& surface, std::size_t patch_h, std::size_t patch_w,
                         std::uint64_t seed, double fill = 0.0) {
  const std::size_t h = surface.height();
  const std::size_t w = surface.width();
  if (patch_h == 0 || patch_w == 0 || patch_h > h || patch_w > w) {
    throw InvalidArgumentError("occlude: patch " + std::to_string(patch_h) + "x" +
                               std::to_string(patch_w) + " does not fit a " + std::to_string(h) +
                               "x" + std::to_string(w) + " image");
  }
  if (!(fill >= 0.0 && fill <= 1.0)) throw InvalidArgumentError("occlude: fill must be in [0, 1]");

  Xoshiro256 rng(seed);
  const std::size_t top = rng.below(h - patch_h + 1);
  const std::size_t left = rng.below(w - patch_w + 1);

  Grid<double> values = surface.grid();
  Mask mask = Mask::full(h, w);
  for (std::size_t r = top; r < top + patch_h; ++r) {
    for (std::size_t c = left; c < left + patch_w; ++c) {
      values(r, c) = fill;
      mask.set(r, c, false);
    }
  }
  CorruptionReport report{CorruptionKind::occlusion,
                          {{"patch_h", static_cast<double>(patch_h)},
                           {"patch_w", static_cast<double>(patch_w)},
                           {"top", static_cast<double>(top)},
                           {"left", static_cast<double>(left)},
                           {"fill", fill}},
                          seed,
                          std::move(mask)};
  return {Surface(std::move(values)), std::move(report)};
}

/// Additive white Gaussian noise; `sigma_8bit` is on the 0..255 scale. Output is clamped.
inline Corrupted awgn(const Surface& surface, double sigma_8bit, std::uint64_t seed) {
  if (!(sigma_8bit >= 0.0) || !std::isfinite(sigma_8bit)) {
    throw InvalidArgumentError("awgn: sigma must be >= 0");
  }
  Grid<double> values = surface.grid();
  if (sigma_8bit > 0.0) {
    Xoshiro256 rng(seed);
    const double sigma = sigma_8bit / 255.0;
    for (double& v : values) v = std::clamp(v + sigma * rng.normal(), 0.0, 1.0);
  }
  CorruptionReport report{CorruptionKind::awgn,
                          {{"sigma", sigma_8bit}},
                          seed,
                          Mask::full(surface.height(), surface.width())};
  return {Surface(std::move(values)), std::move(report)};
}

/// Exactly round(ratio * H * W) pixels, chosen by a shuffled index prefix, set to 0 or 1.
inline Corrupted salt_pepper(const Surface& surface, double drop_ratio, std::uint64_t seed) {
  if (!(drop_ratio >= 0.0 && drop_ratio <= 1.0)) {
    throw InvalidArgumentError("salt_pepper: ratio must be in [0, 1]");
  }
  const std::size_t total = surface.grid().size();
  const auto dropped = static_cast<std::size_t>(std::round(drop_ratio * static_cast<double>(total)));

  Xoshiro256 rng(seed);
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Partial Fisher-Yates: only the first `dropped` slots are needed.
  for (std::size_t i = 0; i < dropped; ++i) {
    const std::size_t j = i + rng.below(total - i);
    std::swap(order[i], order[j]);
  }

  Grid<double> values = surface.grid();
  Mask mask = Mask::full(surface.height(), surface.width());
  for (std::size_t i = 0; i < dropped; ++i) {
    values[order[i]] = rng.coin() ? 1.0 : 0.0;
    mask.set(order[i], false);
  }
  CorruptionReport report{CorruptionKind::salt_pepper, {{"ratio", drop_ratio}}, seed, std::move(mask)};
  return {Surface(std::move(values)), std::move(report)};
}

/// Observation mask that drops pixels sitting exactly at 0 or 1, i.e. likely impulse noise.
inline Mask mask_excluding_extremes(const Surface& surface) {
  Mask mask = Mask::full(surface.height(), surface.width());
  for (std::size_t i = 0; i < surface.grid().size(); ++i) {
    const double v = surface.grid()[i];
    if (v == 0.0 || v == 1.0) mask.set(i, false);
  }
  return mask;
}

}  // namespace gaussmix
