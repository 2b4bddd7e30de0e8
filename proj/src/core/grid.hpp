#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace geco {

// Dense row-major raster with interleaved channels and an optional validity
// mask. An empty mask means every pixel is valid.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(uint32_t width, uint32_t height, uint32_t channels = 1, T fill = T{})
      : width_(width),
        height_(height),
        channels_(channels),
        data_(static_cast<size_t>(width) * height * channels, fill) {
    if (channels == 0) throw ShapeError("raster channel count must be positive");
  }
  Grid(uint32_t width, uint32_t height, uint32_t channels, std::vector<T> data,
       std::vector<uint8_t> mask = {})
      : width_(width),
        height_(height),
        channels_(channels),
        data_(std::move(data)),
        mask_(std::move(mask)) {
    if (channels == 0) throw ShapeError("raster channel count must be positive");
    if (data_.size() != static_cast<size_t>(width) * height * channels)
      throw ShapeError("raster data length " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(width) + "x" +
                       std::to_string(height) + "x" + std::to_string(channels));
    if (!mask_.empty() && mask_.size() != pixel_count())
      throw ShapeError("raster mask length does not match pixel count");
  }

  uint32_t width() const noexcept { return width_; }
  uint32_t height() const noexcept { return height_; }
  uint32_t channels() const noexcept { return channels_; }
  size_t pixel_count() const noexcept { return static_cast<size_t>(width_) * height_; }
  bool empty() const noexcept { return data_.empty(); }

  size_t index(uint32_t x, uint32_t y) const noexcept {
    return static_cast<size_t>(y) * width_ + x;
  }

  T& at(uint32_t x, uint32_t y, uint32_t c = 0) noexcept {
    return data_[index(x, y) * channels_ + c];
  }
  const T& at(uint32_t x, uint32_t y, uint32_t c = 0) const noexcept {
    return data_[index(x, y) * channels_ + c];
  }
  T& at(size_t pixel, uint32_t c = 0) noexcept { return data_[pixel * channels_ + c]; }
  const T& at(size_t pixel, uint32_t c = 0) const noexcept {
    return data_[pixel * channels_ + c];
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  bool has_mask() const noexcept { return !mask_.empty(); }
  const std::vector<uint8_t>& mask() const noexcept { return mask_; }
  std::vector<uint8_t>& mask() noexcept { return mask_; }

  bool valid(size_t pixel) const noexcept { return mask_.empty() || mask_[pixel] != 0; }
  bool valid(uint32_t x, uint32_t y) const noexcept { return valid(index(x, y)); }

  void set_valid(size_t pixel, bool v) {
    if (mask_.empty()) {
      if (v) return;
      mask_.assign(pixel_count(), 1);
    }
    mask_[pixel] = v ? 1 : 0;
  }
  void set_valid(uint32_t x, uint32_t y, bool v) { set_valid(index(x, y), v); }

  // Materializes an all-true mask so that later writes do not reallocate.
  void ensure_mask() {
    if (mask_.empty()) mask_.assign(pixel_count(), 1);
  }

  bool same_shape(uint32_t w, uint32_t h) const noexcept { return w == width_ && h == height_; }
  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return other.width() == width_ && other.height() == height_;
  }

  size_t valid_count() const noexcept {
    if (mask_.empty()) return pixel_count();
    size_t n = 0;
    for (uint8_t m : mask_) n += m != 0;
    return n;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  uint32_t width_ = 0;
  uint32_t height_ = 0;
  uint32_t channels_ = 1;
  std::vector<T> data_;
  std::vector<uint8_t> mask_;
};

// The on-disk element type.
using Raster = Grid<float>;
// Working precision for geometry and metrics.
using Field = Grid<double>;

// Boolean raster (one byte per pixel, 0 or 1).
class Mask {
 public:
  Mask() = default;
  Mask(uint32_t width, uint32_t height, bool fill = false)
      : width_(width), height_(height), bits_(static_cast<size_t>(width) * height, fill) {}

  uint32_t width() const noexcept { return width_; }
  uint32_t height() const noexcept { return height_; }
  size_t pixel_count() const noexcept { return bits_.size(); }
  size_t index(uint32_t x, uint32_t y) const noexcept {
    return static_cast<size_t>(y) * width_ + x;
  }

  bool operator[](size_t i) const noexcept { return bits_[i] != 0; }
  bool operator()(uint32_t x, uint32_t y) const noexcept { return bits_[index(x, y)] != 0; }
  void set(size_t i, bool v) noexcept { bits_[i] = v ? 1 : 0; }
  void set(uint32_t x, uint32_t y, bool v) noexcept { bits_[index(x, y)] = v ? 1 : 0; }

  size_t count() const noexcept {
    size_t n = 0;
    for (uint8_t b : bits_) n += b != 0;
    return n;
  }
  const std::vector<uint8_t>& bytes() const noexcept { return bits_; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  uint32_t width_ = 0;
  uint32_t height_ = 0;
  std::vector<uint8_t> bits_;
};

template <typename To, typename From>
Grid<To> grid_cast(const Grid<From>& src) {
  std::vector<To> out(src.values().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<To>(src.values()[i]);
  return Grid<To>(src.width(), src.height(), src.channels(), std::move(out), src.mask());
}

inline Mask validity_of(const auto& grid) {
  Mask m(grid.width(), grid.height(), true);
  if (grid.has_mask())
    for (size_t i = 0; i < m.pixel_count(); ++i) m.set(i, grid.valid(i));
  return m;
}

}  // namespace geco
