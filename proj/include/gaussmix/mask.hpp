#pragma once

#include <cstddef>
#include <cstdint>

#include "gaussmix/grid.hpp"

namespace gaussmix {

/// Observation mask: true marks a pixel that participates in losses and metrics.
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t height, std::size_t width, bool observed = true)
      : bits_(height, width, observed ? 1 : 0) {}

  static Mask full(std::size_t height, std::size_t width) { return Mask(height, width, true); }

  std::size_t height() const { return bits_.height(); }
  std::size_t width() const { return bits_.width(); }
  std::size_t size() const { return bits_.size(); }

  bool operator()(std::size_t r, std::size_t c) const { return bits_(r, c) != 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t r, std::size_t c, bool observed) { bits_(r, c) = observed ? 1 : 0; }
  void set(std::size_t i, bool observed) { bits_[i] = observed ? 1 : 0; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
  }
  bool any() const { return count() > 0; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  Grid<std::uint8_t> bits_;
};

}  // namespace gaussmix
