#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "geoscore/error.hpp"

namespace geoscore {

// Dense row-major raster with interleaved channels.
template <typename T, int Channels>
class Image {
 public:
  using value_type = T;
  static constexpr int kChannels = Channels;

  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height * Channels, fill) {
    require(width >= 0 && height >= 0, ErrorCode::kInvalidInput, "negative image size");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  const T& operator()(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  bool same_size(int width, int height) const noexcept {
    return width_ == width && height_ == height;
  }
  template <typename U, int C>
  bool same_size(const Image<U, C>& other) const noexcept {
    return same_size(other.width(), other.height());
  }

  friend bool operator==(const Image& a, const Image& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * Channels + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Color frame, channels in [0, 1].
using RgbImage = Image<float, 3>;
/// Per-pixel depth along the optical axis; values <= 0 mark invalid pixels.
using DepthMap = Image<float, 1>;
/// Nonzero where at least one point landed.
using CoverageMask = Image<std::uint8_t, 1>;
/// Winning depth per pixel, +inf where nothing landed.
using DepthBuffer = Image<float, 1>;

inline void validate_rgb(const RgbImage& img, const std::string& what = "image") {
  for (float v : img.data()) {
    require(std::isfinite(v) && v >= 0.0f && v <= 1.0f, ErrorCode::kInvalidInput,
            what + ": channel value outside [0,1]");
  }
}

inline std::size_t count_covered(const CoverageMask& mask) {
  std::size_t n = 0;
  for (auto v : mask.data()) n += v != 0;
  return n;
}

// Rounds every channel to the nearest 8-bit level, v = k / 255.
inline void quantize_8bit(RgbImage& img) {
  for (float& v : img.data()) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    v = static_cast<float>(std::lround(c * 255.0) / 255.0);
  }
}

}  // namespace geoscore
