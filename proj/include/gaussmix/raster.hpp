#pragma once

// Pixel grids <-> continuous coordinates.
//
// Pixel (r, c), 1-based, sits at normalized coordinate (r / H, c / W); with
// 0-based indices that is ((r + 1) / H, (c + 1) / W). Coordinates therefore
// start at 1/H rather than 0 and end exactly at 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gaussmix/errors.hpp"
#include "gaussmix/grid.hpp"
#include "gaussmix/model.hpp"

namespace gaussmix {

inline Vec2 pixel_coordinate(std::size_t r, std::size_t c, std::size_t height, std::size_t width) {
  return {static_cast<double>(r + 1) / static_cast<double>(height),
          static_cast<double>(c + 1) / static_cast<double>(width)};
}

/// All H*W sample coordinates in row-major order.
inline std::vector<Vec2> coordinate_grid(std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) {
    throw ShapeError("coordinate_grid: dimensions must be positive");
  }
  std::vector<Vec2> out;
  out.reserve(height * width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      out.push_back(pixel_coordinate(r, c, height, width));
    }
  }
  return out;
}

/// Evaluates the model on an H x W grid. Values are not clamped.
inline Grid<double> render(const MixtureModel& model, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) {
    throw ShapeError("render: dimensions must be positive");
  }
  Grid<double> out(height, width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      out(r, c) = eval_mixture(model, pixel_coordinate(r, c, height, width));
    }
  }
  return out;
}

/// Grayscale intensities in [0, 1].
class Surface {
 public:
  Surface() = default;
  explicit Surface(Grid<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw ShapeError("surface must be non-empty");
    for (double v : values_) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ConstraintError("surface value " + std::to_string(v) + " outside [0, 1]");
      }
    }
  }

  /// Clamps arbitrary reals into [0, 1] (NaN becomes 0).
  static Surface clamped(const Grid<double>& values) {
    Grid<double> out = values;
    for (double& v : out) v = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
    return Surface(std::move(out));
  }

  static Surface constant(std::size_t height, std::size_t width, double value) {
    return Surface(Grid<double>(height, width, value));
  }

  const Grid<double>& grid() const { return values_; }
  std::size_t height() const { return values_.height(); }
  std::size_t width() const { return values_.width(); }
  double operator()(std::size_t r, std::size_t c) const { return values_(r, c); }
  ImageDims dims() const { return {height(), width()}; }

  friend bool operator==(const Surface&, const Surface&) = default;

 private:
  Grid<double> values_;
};

/// Integer raster as read from disk: 1 (gray) or 3 (RGB) interleaved channels.
struct PixelImage {
  std::size_t height = 0;
  std::size_t width = 0;
  int channels = 1;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;

  std::uint32_t max_value() const { return (1u << bit_depth) - 1u; }

  friend bool operator==(const PixelImage&, const PixelImage&) = default;
};

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

/// Scales integer samples to [0, 1]; RGB is first reduced with Rec. 601 luma weights.
inline Surface image_to_surface(const PixelImage& image) {
  if (image.bit_depth < 1 || image.bit_depth > 16) {
    throw FormatError("unsupported bit depth " + std::to_string(image.bit_depth));
  }
  if (image.channels != 1 && image.channels != 3) {
    throw FormatError("unsupported channel count " + std::to_string(image.channels));
  }
  if (image.height == 0 || image.width == 0 ||
      image.samples.size() != image.height * image.width * image.channels) {
    throw FormatError("pixel buffer does not match image dimensions");
  }
  const std::uint32_t max_value = image.max_value();
  for (std::uint16_t s : image.samples) {
    if (s > max_value) {
      throw FormatError("sample " + std::to_string(s) + " exceeds " +
                        std::to_string(image.bit_depth) + "-bit range");
    }
  }
  const double scale = static_cast<double>(max_value);
  Grid<double> out(image.height, image.width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (image.channels == 1) {
      out[i] = image.samples[i] / scale;
    } else {
      const double luma = kLumaR * image.samples[3 * i] + kLumaG * image.samples[3 * i + 1] +
                          kLumaB * image.samples[3 * i + 2];
      out[i] = std::min(luma / scale, 1.0);
    }
  }
  return Surface(std::move(out));
}

/// Clamp to [0, 1], scale to the integer range, round half away from zero.
inline PixelImage surface_to_image(const Grid<double>& values, int bit_depth = 8) {
  if (bit_depth < 1 || bit_depth > 16) {
    throw FormatError("unsupported bit depth " + std::to_string(bit_depth));
  }
  PixelImage image;
  image.height = values.height();
  image.width = values.width();
  image.channels = 1;
  image.bit_depth = bit_depth;
  image.samples.resize(values.size());
  const double scale = static_cast<double>(image.max_value());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::isnan(values[i]) ? 0.0 : std::clamp(values[i], 0.0, 1.0);
    image.samples[i] = static_cast<std::uint16_t>(std::round(v * scale));
  }
  return image;
}

inline PixelImage surface_to_image(const Surface& surface, int bit_depth = 8) {
  return surface_to_image(surface.grid(), bit_depth);
}

}  // namespace gaussmix
