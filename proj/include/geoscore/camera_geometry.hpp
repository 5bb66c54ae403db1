#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "geoscore/error.hpp"
#include "geoscore/image.hpp"

namespace geoscore {

/// Zero-skew pinhole intrinsics. Pixel (u, v) is column u, row v; integer
/// coordinates address pixel centers.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  Eigen::Matrix3d inverse_matrix() const {
    Eigen::Matrix3d k;
    k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
    return k;
  }

  void validate() const {
    require(std::isfinite(fx) && fx > 0.0 && std::isfinite(fy) && fy > 0.0,
            ErrorCode::kInvalidInput, "focal lengths must be positive");
    require(width > 0 && height > 0, ErrorCode::kInvalidInput, "image size must be positive");
    require(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height, ErrorCode::kInvalidInput,
            "principal point outside the image");
  }

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

inline constexpr double kRotationTolerance = 1e-6;

inline bool is_rotation(const Eigen::Matrix3d& r, double tol = kRotationTolerance) {
  if (!r.allFinite()) return false;
  const Eigen::Matrix3d gram = r.transpose() * r;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

/// Camera-to-world rigid transform: X_world = R * x_cam + t.
struct CameraPose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  Eigen::Vector3d to_world(const Eigen::Vector3d& x_cam) const { return R * x_cam + t; }
  Eigen::Vector3d to_camera(const Eigen::Vector3d& x_world) const {
    return R.transpose() * (x_world - t);
  }

  void validate() const {
    require(t.allFinite(), ErrorCode::kInvalidInput, "pose translation is not finite");
    require(is_rotation(R), ErrorCode::kNonRotation, "pose rotation is not in SO(3)");
  }

  friend bool operator==(const CameraPose& a, const CameraPose& b) {
    return a.R == b.R && a.t == b.t;
  }
};

/// Fused world-frame points with colors and the frame each came from.
struct ColoredPointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3f> colors;
  std::vector<int> source_frame;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }

  void append(const ColoredPointCloud& other) {
    points.insert(points.end(), other.points.begin(), other.points.end());
    colors.insert(colors.end(), other.colors.begin(), other.colors.end());
    source_frame.insert(source_frame.end(), other.source_frame.begin(), other.source_frame.end());
  }
};

/// Lifts every valid pixel (depth > 0) of a frame into world coordinates.
/// `stride` > 1 keeps only pixels whose row and column are multiples of it.
inline ColoredPointCloud backproject(const DepthMap& depth, const Intrinsics& k,
                                     const CameraPose& pose, const RgbImage& frame,
                                     int frame_index, int stride = 1) {
  require(depth.same_size(k.width, k.height) && frame.same_size(k.width, k.height),
          ErrorCode::kDimensionMismatch, "depth, frame and intrinsics sizes differ");
  require(stride >= 1, ErrorCode::kInvalidInput, "stride must be >= 1");

  ColoredPointCloud cloud;
  const std::size_t expected =
      static_cast<std::size_t>((k.width + stride - 1) / stride) * ((k.height + stride - 1) / stride);
  cloud.points.reserve(expected);
  cloud.colors.reserve(expected);
  cloud.source_frame.reserve(expected);

  for (int v = 0; v < k.height; v += stride) {
    for (int u = 0; u < k.width; u += stride) {
      const double d = depth(u, v);
      if (!(d > 0.0)) continue;
      const Eigen::Vector3d x_cam(d * (u - k.cx) / k.fx, d * (v - k.cy) / k.fy, d);
      cloud.points.push_back(pose.to_world(x_cam));
      cloud.colors.emplace_back(frame(u, v, 0), frame(u, v, 1), frame(u, v, 2));
      cloud.source_frame.push_back(frame_index);
    }
  }
  return cloud;
}

struct RenderOptions {
  double z_near = 1e-6;
  // Points originating from this frame are skipped (leave-one-out rendering).
  std::optional<int> exclude_frame;
};

struct RenderResult {
  RgbImage image;
  CoverageMask coverage;
  DepthBuffer depth;
};

/// Relative depth difference below which two splats count as equally near.
inline constexpr double kDepthTieTolerance = 1e-12;

/// Splats each point into one pixel of the target view; the nearest point wins
/// and equal depths (within kDepthTieTolerance) keep the lower point index.
inline RenderResult reproject(const ColoredPointCloud& cloud, const Intrinsics& k,
                              const CameraPose& pose, const RenderOptions& options = {}) {
  require(!cloud.empty(), ErrorCode::kInvalidInput, "cannot reproject an empty point cloud");

  const int w = k.width;
  const int h = k.height;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> zbuf(static_cast<std::size_t>(w) * h, kInf);
  std::vector<std::int64_t> winner(zbuf.size(), -1);

  const Eigen::Matrix3d rt = pose.R.transpose();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (options.exclude_frame && cloud.source_frame[i] == *options.exclude_frame) continue;
    const Eigen::Vector3d x_cam = rt * (cloud.points[i] - pose.t);
    const double z = x_cam.z();
    if (!(z > options.z_near)) continue;
    const double u = k.fx * x_cam.x() / z + k.cx;
    const double v = k.fy * x_cam.y() / z + k.cy;
    const double pu = std::floor(u + 0.5);
    const double pv = std::floor(v + 0.5);
    if (!(pu >= 0.0 && pu < w && pv >= 0.0 && pv < h)) continue;
    const std::size_t idx = static_cast<std::size_t>(pv) * w + static_cast<std::size_t>(pu);
    if (z < zbuf[idx] * (1.0 - kDepthTieTolerance)) {
      zbuf[idx] = z;
      winner[idx] = static_cast<std::int64_t>(i);
    }
  }

  RenderResult out{RgbImage(w, h, 0.0f), CoverageMask(w, h, 0),
                   DepthBuffer(w, h, std::numeric_limits<float>::infinity())};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (winner[idx] < 0) continue;
      const auto& c = cloud.colors[static_cast<std::size_t>(winner[idx])];
      out.image(x, y, 0) = c.x();
      out.image(x, y, 1) = c.y();
      out.image(x, y, 2) = c.z();
      out.coverage(x, y) = 1;
      out.depth(x, y) = static_cast<float>(zbuf[idx]);
    }
  }
  return out;
}

/// Geodesic angle between two rotations, in [0, pi].
inline double rotation_angle(const Eigen::Matrix3d& r1, const Eigen::Matrix3d& r2) {
  const double c = ((r2 * r1.transpose()).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

inline Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace geoscore
