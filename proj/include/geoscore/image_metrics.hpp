#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "geoscore/error.hpp"
#include "geoscore/image.hpp"

namespace geoscore {

/// Returned by mse() when the mask selects no pixel. Any real masked MSE on
/// [0,1] images is at most 1, so an empty reconstruction always ranks worst.
inline constexpr double kEmptyMaskMse = 4.0;
inline constexpr double kPsnrCapDb = 100.0;

inline double mse(const RgbImage& a, const RgbImage& b, const CoverageMask* mask = nullptr) {
  require(a.same_size(b), ErrorCode::kDimensionMismatch, "mse: image sizes differ");
  require(mask == nullptr || mask->same_size(a), ErrorCode::kDimensionMismatch,
          "mse: mask size differs from images");
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (mask && (*mask)(x, y) == 0) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = static_cast<double>(a(x, y, c)) - static_cast<double>(b(x, y, c));
        sum += d * d;
      }
      ++count;
    }
  }
  if (count == 0) return kEmptyMaskMse;
  return sum / (3.0 * static_cast<double>(count));
}

inline double psnr_from_mse(double m) {
  if (m <= 0.0) return kPsnrCapDb;
  return std::min(10.0 * std::log10(1.0 / m), kPsnrCapDb);
}

inline double psnr(const RgbImage& a, const RgbImage& b, const CoverageMask* mask = nullptr) {
  return psnr_from_mse(mse(a, b, mask));
}

namespace detail {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

inline std::array<double, kSsimWindow> ssim_kernel() {
  std::array<double, kSsimWindow> w{};
  double total = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

// Separable Gaussian filter over the valid region: output is
// (W - 10) x (H - 10), row-major.
inline std::vector<double> filter_valid(const std::vector<double>& src, int w, int h) {
  const auto kernel = ssim_kernel();
  const int ow = w - kSsimWindow + 1;
  const int oh = h - kSsimWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) acc += kernel[i] * src[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) acc += kernel[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace detail

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean SSIM over all fully-contained 11x11 Gaussian windows (sigma 1.5),
/// averaged over the three channels.
inline double ssim(const RgbImage& a, const RgbImage& b) {
  require(a.same_size(b), ErrorCode::kDimensionMismatch, "ssim: image sizes differ");
  require(a.width() >= detail::kSsimWindow && a.height() >= detail::kSsimWindow,
          ErrorCode::kInvalidInput, "ssim: images must be at least 11x11");
  const int w = a.width();
  const int h = a.height();
  const std::size_t n = a.pixel_count();

  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> pa(n), pb(n), aa(n), bb(n), ab(n);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        pa[i] = a(x, y, c);
        pb[i] = b(x, y, c);
        aa[i] = pa[i] * pa[i];
        bb[i] = pb[i] * pb[i];
        ab[i] = pa[i] * pb[i];
      }
    }
    const auto mu_a = detail::filter_valid(pa, w, h);
    const auto mu_b = detail::filter_valid(pb, w, h);
    const auto e_aa = detail::filter_valid(aa, w, h);
    const auto e_bb = detail::filter_valid(bb, w, h);
    const auto e_ab = detail::filter_valid(ab, w, h);
    double channel_sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
      const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      const double num = (2.0 * mu_a[i] * mu_b[i] + kSsimC1) * (2.0 * cov + kSsimC2);
      const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kSsimC1) * (var_a + var_b + kSsimC2);
      channel_sum += num / den;
    }
    total += channel_sum / static_cast<double>(mu_a.size());
  }
  return total / 3.0;
}

/// Perceptual term of the reconstruction error. The learned metric is not
/// evaluated here: either the SSIM-based surrogate is used or distances
/// computed elsewhere are looked up by frame index.
struct PerceptualMetric {
  enum class Kind { kStructuralSurrogate, kPrecomputedExternal };

  Kind kind = Kind::kStructuralSurrogate;
  std::map<int, double> table;

  static PerceptualMetric structural() { return {}; }
  static PerceptualMetric precomputed(std::map<int, double> table) {
    for (const auto& [frame, value] : table) {
      require(std::isfinite(value) && value >= 0.0, ErrorCode::kInvalidInput,
              "perceptual distance for frame " + std::to_string(frame) + " must be >= 0");
    }
    return {Kind::kPrecomputedExternal, std::move(table)};
  }
};

inline double perceptual_distance(const PerceptualMetric& metric, const RgbImage& a,
                                  const RgbImage& b, int frame_index) {
  switch (metric.kind) {
    case PerceptualMetric::Kind::kStructuralSurrogate:
      return std::clamp((1.0 - ssim(a, b)) / 2.0, 0.0, 1.0);
    case PerceptualMetric::Kind::kPrecomputedExternal: {
      const auto it = metric.table.find(frame_index);
      require(it != metric.table.end(), ErrorCode::kInvalidInput,
              "no precomputed perceptual distance for frame " + std::to_string(frame_index));
      return it->second;
    }
  }
  return 0.0;
}

/// Parses `frame_index<TAB>distance` lines. Blank lines and lines starting
/// with '#' are ignored.
inline std::map<int, double> parse_perceptual_table(std::istream& in) {
  std::map<int, double> table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    require(tab != std::string::npos, ErrorCode::kParse,
            "perceptual table line " + std::to_string(line_no) + ": expected a TAB separator");
    std::istringstream idx_in(line.substr(0, tab));
    std::istringstream val_in(line.substr(tab + 1));
    int frame = 0;
    double value = 0.0;
    idx_in >> frame;
    val_in >> value;
    require(!idx_in.fail() && !val_in.fail() && (idx_in >> std::ws).eof() && (val_in >> std::ws).eof(),
            ErrorCode::kParse, "perceptual table line " + std::to_string(line_no) + ": malformed entry");
    require(std::isfinite(value) && value >= 0.0, ErrorCode::kParse,
            "perceptual table line " + std::to_string(line_no) + ": distance must be >= 0");
    require(table.emplace(frame, value).second, ErrorCode::kParse,
            "perceptual table line " + std::to_string(line_no) + ": duplicate frame " +
                std::to_string(frame));
  }
  return table;
}

}  // namespace geoscore
