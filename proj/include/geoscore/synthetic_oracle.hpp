#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geoscore/camera_geometry.hpp"
#include "geoscore/consistency_score.hpp"
#include "geoscore/error.hpp"
#include "geoscore/image.hpp"
#include "geoscore/random.hpp"

// Ground-truth scenes built from textured infinite planes. Depth is the
// analytic ray/plane distance along the optical axis, so every rendered
// sequence is a perfectly consistent reference for the scoring pipeline.

namespace geoscore::oracle {

enum class TextureKind { kValueNoise, kCheckerboard };

struct Texture {
  TextureKind kind = TextureKind::kValueNoise;
  double cell = 0.5;  // lattice / checker size in world units
  int octaves = 2;
  std::uint64_t seed = 0;
  Eigen::Vector3d base{0.5, 0.5, 0.5};
  Eigen::Vector3d amplitude{0.35, 0.35, 0.35};
};

struct Plane {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  Texture texture;
};

enum class Trajectory { kOrbit, kDolly, kLateral, kStatic };

inline std::string_view to_string(Trajectory t) {
  switch (t) {
    case Trajectory::kOrbit: return "orbit";
    case Trajectory::kDolly: return "dolly";
    case Trajectory::kLateral: return "lateral";
    case Trajectory::kStatic: return "static";
  }
  return "static";
}

inline Trajectory parse_trajectory(std::string_view s) {
  if (s == "orbit") return Trajectory::kOrbit;
  if (s == "dolly") return Trajectory::kDolly;
  if (s == "lateral") return Trajectory::kLateral;
  if (s == "static") return Trajectory::kStatic;
  fail(ErrorCode::kInvalidInput, "unknown trajectory '" + std::string(s) + "'");
}

struct OracleScene {
  std::vector<Plane> planes;
  Trajectory trajectory = Trajectory::kDolly;
  int frame_count = 10;
  int width = 64;
  int height = 64;
  double focal = 58.0;  // pixels, fx = fy
  // Per-frame step: world units for dolly/lateral, radians for orbit.
  double step = 0.1;
  // Sideways drift per frame added to a dolly, world units.
  double drift = 0.0;
  // Orbit pivot distance along +z from the start camera.
  double orbit_radius = 5.0;
  std::uint64_t seed = 0;
  std::string scene_id = "oracle";

  Intrinsics intrinsics() const {
    return Intrinsics{focal, focal, (width - 1) / 2.0, (height - 1) / 2.0, width, height};
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double lattice(std::int64_t ix, std::int64_t iy, std::uint64_t seed) {
  std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(ix) * 0x632be59bd9b4e019ULL +
                                                 static_cast<std::uint64_t>(iy)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double smooth(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

// Smoothly interpolated lattice noise in [0, 1].
inline double value_noise(double x, double y, std::uint64_t seed) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double sx = smooth(x - fx);
  const double sy = smooth(y - fy);
  const double a = lattice(ix, iy, seed);
  const double b = lattice(ix + 1, iy, seed);
  const double c = lattice(ix, iy + 1, seed);
  const double d = lattice(ix + 1, iy + 1, seed);
  return (a + (b - a) * sx) + ((c + (d - c) * sx) - (a + (b - a) * sx)) * sy;
}

inline void plane_basis(const Eigen::Vector3d& n, Eigen::Vector3d& e1, Eigen::Vector3d& e2) {
  const Eigen::Vector3d helper = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  e1 = n.cross(helper).normalized();
  e2 = n.cross(e1).normalized();
}

}  // namespace detail

inline Eigen::Vector3d shade(const Plane& plane, const Eigen::Vector3d& x) {
  Eigen::Vector3d e1, e2;
  detail::plane_basis(plane.normal.normalized(), e1, e2);
  const Eigen::Vector3d rel = x - plane.point;
  const double s = rel.dot(e1) / plane.texture.cell;
  const double t = rel.dot(e2) / plane.texture.cell;
  const Texture& tex = plane.texture;
  Eigen::Vector3d rgb;
  if (tex.kind == TextureKind::kCheckerboard) {
    const auto parity = (static_cast<std::int64_t>(std::floor(s)) + static_cast<std::int64_t>(std::floor(t))) & 1;
    const double sign = parity ? 1.0 : -1.0;
    rgb = tex.base + sign * tex.amplitude;
  } else {
    for (int c = 0; c < 3; ++c) {
      double acc = 0.0;
      double weight = 1.0;
      double norm = 0.0;
      double freq = 1.0;
      for (int o = 0; o < std::max(1, tex.octaves); ++o) {
        acc += weight * detail::value_noise(s * freq, t * freq, tex.seed * 131 + c * 17 + o);
        norm += weight;
        weight *= 0.5;
        freq *= 2.0;
      }
      rgb[c] = tex.base[c] + tex.amplitude[c] * (2.0 * acc / norm - 1.0);
    }
  }
  return rgb.cwiseMax(0.0).cwiseMin(1.0);
}

/// Camera-to-world pose of frame `i` along the scene's trajectory.
inline CameraPose trajectory_pose(const OracleScene& scene, int i) {
  CameraPose pose;
  const double centered = i - (scene.frame_count - 1) / 2.0;
  switch (scene.trajectory) {
    case Trajectory::kStatic:
      break;
    case Trajectory::kDolly:
      pose.t = Eigen::Vector3d(scene.drift * i, 0.0, scene.step * i);
      break;
    case Trajectory::kLateral:
      pose.t = Eigen::Vector3d(scene.step * centered, 0.0, 0.0);
      break;
    case Trajectory::kOrbit: {
      const double theta = scene.step * centered;
      const Eigen::Vector3d pivot(0.0, 0.0, scene.orbit_radius);
      pose.R = axis_angle(Eigen::Vector3d::UnitY(), -theta);
      pose.t = pivot - pose.R * Eigen::Vector3d(0.0, 0.0, scene.orbit_radius);
      break;
    }
  }
  return pose;
}

/// Nearest positive ray parameter along `dir` (camera-z component 1 in the
/// camera frame, so the parameter is the z-depth) and the plane it hits.
inline std::optional<std::pair<double, std::size_t>> cast_ray(const OracleScene& scene,
                                                              const Eigen::Vector3d& origin,
                                                              const Eigen::Vector3d& dir) {
  std::optional<std::pair<double, std::size_t>> best;
  for (std::size_t p = 0; p < scene.planes.size(); ++p) {
    const Eigen::Vector3d n = scene.planes[p].normal.normalized();
    const double denom = n.dot(dir);
    if (std::abs(denom) < 1e-12) continue;
    const double lambda = n.dot(scene.planes[p].point - origin) / denom;
    if (lambda > 1e-9 && (!best || lambda < best->first)) best = {lambda, p};
  }
  return best;
}

inline SceneSequence render_scene(const OracleScene& scene) {
  require(scene.frame_count >= 2, ErrorCode::kInvalidInput, "oracle scene needs >= 2 frames");
  require(!scene.planes.empty(), ErrorCode::kInvalidInput, "oracle scene has no planes");
  const Intrinsics k = scene.intrinsics();
  k.validate();

  SceneSequence seq;
  seq.intrinsics = k;
  seq.scene_id = scene.scene_id;
  for (int i = 0; i < scene.frame_count; ++i) {
    const CameraPose pose = trajectory_pose(scene, i);
    RgbImage frame(k.width, k.height);
    DepthMap depth(k.width, k.height);
    for (int v = 0; v < k.height; ++v) {
      for (int u = 0; u < k.width; ++u) {
        const Eigen::Vector3d dir = pose.R * Eigen::Vector3d((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        const auto hit = cast_ray(scene, pose.t, dir);
        if (!hit) {
          fail(ErrorCode::kDegenerateScene, "frame " + std::to_string(i) + " pixel (" + std::to_string(u) +
                                                "," + std::to_string(v) + ") sees no plane");
        }
        const Eigen::Vector3d rgb = shade(scene.planes[hit->second], pose.t + hit->first * dir);
        for (int c = 0; c < 3; ++c) frame(u, v, c) = static_cast<float>(rgb[c]);
        depth(u, v) = static_cast<float>(hit->first);
      }
    }
    quantize_8bit(frame);
    seq.frames.push_back(std::move(frame));
    seq.depths.push_back(std::move(depth));
    seq.poses.push_back(pose);
  }
  return seq;
}

// Sideways drift of the room dolly relative to its forward step.
inline constexpr double kDollyDrift = 1.0;
/// A room-like layout: a textured back wall, a floor and a slanted side wall,
/// with seeded jitter in placement and texture.
inline OracleScene make_room_scene(std::uint64_t seed, Trajectory trajectory, int width = 96,
                                   int height = 96, int frames = 10) {
  Rng rng(seed);
  OracleScene scene;
  scene.seed = seed;
  scene.trajectory = trajectory;
  scene.frame_count = frames;
  scene.width = width;
  scene.height = height;
  scene.focal = 0.9 * width;
  scene.scene_id = std::string(to_string(trajectory)) + "_" + std::to_string(seed);

  auto texture = [&](double cell) {
    Texture t;
    t.cell = cell;
    t.seed = rng.next_u64();
    for (int c = 0; c < 3; ++c) {
      t.base[c] = rng.uniform(0.35, 0.65);
      t.amplitude[c] = rng.uniform(0.2, 0.3);
    }
    return t;
  };

  const double wall_z = rng.uniform(2.75, 3.5);
  Plane back;
  back.point = Eigen::Vector3d(0.0, 0.0, wall_z);
  back.normal = Eigen::Vector3d(rng.uniform(-0.15, 0.15), rng.uniform(-0.1, 0.1), -1.0).normalized();
  back.texture = texture(rng.uniform(1.05, 1.5));

  Plane floor;
  floor.point = Eigen::Vector3d(0.0, rng.uniform(0.65, 0.9), 0.0);
  floor.normal = Eigen::Vector3d(0.0, -1.0, rng.uniform(-0.05, 0.05)).normalized();
  floor.texture = texture(rng.uniform(0.75, 1.2));

  Plane side;
  const double side_x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(1.0, 1.3);
  side.point = Eigen::Vector3d(side_x, 0.0, 0.0);
  side.normal = Eigen::Vector3d(-side_x, 0.0, rng.uniform(-0.4, -0.1)).normalized();
  side.texture = texture(rng.uniform(0.75, 1.2));

  scene.planes = {back, floor, side};

  // Total travel stays well short of the back wall so every view keeps it in
  // front of the camera.
  switch (trajectory) {
    case Trajectory::kOrbit:
      scene.step = rng.uniform(0.06, 0.1);
      scene.orbit_radius = wall_z - 0.5;
      break;
    case Trajectory::kDolly:
      scene.step = wall_z * rng.uniform(0.03, 0.045);
      scene.drift = (rng.uniform() < 0.5 ? -1.0 : 1.0) * kDollyDrift * scene.step;
      break;
    case Trajectory::kLateral:
      scene.step = rng.uniform(0.18, 0.3);
      break;
    case Trajectory::kStatic:
      scene.step = 0.0;
      break;
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Corruptors

enum class CorruptionKind { kDepthNoise, kPoseJitter, kFrameWarp, kBrightnessFlicker, kFrozenFrame };

inline constexpr std::array<CorruptionKind, 5> kAllCorruptions = {
    CorruptionKind::kDepthNoise, CorruptionKind::kPoseJitter, CorruptionKind::kFrameWarp,
    CorruptionKind::kBrightnessFlicker, CorruptionKind::kFrozenFrame};

inline std::string_view to_string(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::kDepthNoise: return "depth_noise";
    case CorruptionKind::kPoseJitter: return "pose_jitter";
    case CorruptionKind::kFrameWarp: return "frame_warp";
    case CorruptionKind::kBrightnessFlicker: return "brightness_flicker";
    case CorruptionKind::kFrozenFrame: return "frozen_frame";
  }
  return "depth_noise";
}

inline CorruptionKind parse_corruption(std::string_view s) {
  for (auto k : kAllCorruptions) {
    if (s == to_string(k)) return k;
  }
  fail(ErrorCode::kInvalidInput, "unknown corruptor '" + std::string(s) + "'");
}

struct Corruptor {
  CorruptionKind kind = CorruptionKind::kDepthNoise;
  double magnitude = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr double kWarpPixelsPerUnit = 5.0;
inline constexpr double kJitterRadiansPerUnit = 0.05;

/// First frame repeated by the frozen_frame corruptor.
inline int frozen_anchor(int frame_count) { return std::max(0, (frame_count - 3) / 2); }

/// Number of frames after the anchor replaced by it; magnitude 1 freezes two.
inline int frozen_span(double magnitude) {
  return magnitude <= 0.0 ? 0 : static_cast<int>(std::ceil(2.0 * magnitude - 1e-12));
}

namespace detail {

inline double mean_valid_depth(const SceneSequence& seq) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& d : seq.depths) {
    for (float v : d.data()) {
      if (v > 0.0f) {
        sum += v;
        ++n;
      }
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

inline double mean_translation_step(const SceneSequence& seq) {
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < seq.poses.size(); ++i) sum += (seq.poses[i + 1].t - seq.poses[i].t).norm();
  return seq.poses.size() > 1 ? sum / static_cast<double>(seq.poses.size() - 1) : 0.0;
}

inline Eigen::Vector3d random_unit(Rng& rng) {
  Eigen::Vector3d v;
  do {
    v = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
  } while (v.norm() < 1e-9);
  return v.normalized();
}

inline float sample_bilinear(const RgbImage& img, double x, double y, int c) {
  x = std::clamp(x, 0.0, img.width() - 1.0);
  y = std::clamp(y, 0.0, img.height() - 1.0);
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double ax = x - x0;
  const double ay = y - y0;
  const double top = img(x0, y0, c) * (1.0 - ax) + img(x1, y0, c) * ax;
  const double bottom = img(x0, y1, c) * (1.0 - ax) + img(x1, y1, c) * ax;
  return static_cast<float>(top * (1.0 - ay) + bottom * ay);
}

}  // namespace detail

inline SceneSequence corrupt(const SceneSequence& seq, const Corruptor& c) {
  require(std::isfinite(c.magnitude) && c.magnitude >= 0.0, ErrorCode::kInvalidInput,
          "corruption magnitude must be >= 0");
  if (c.magnitude == 0.0) return seq;

  SceneSequence out = seq;
  Rng rng(c.seed);
  const int n = static_cast<int>(seq.size());

  switch (c.kind) {
    case CorruptionKind::kDepthNoise: {
      const double sigma = c.magnitude * detail::mean_valid_depth(seq);
      for (auto& depth : out.depths) {
        for (float& d : depth.data()) {
          const double z = rng.normal();
          if (d > 0.0f) d = static_cast<float>(d + sigma * z);
        }
      }
      break;
    }
    case CorruptionKind::kPoseJitter: {
      const double sigma_t = c.magnitude * detail::mean_translation_step(seq);
      const double angle = c.magnitude * kJitterRadiansPerUnit;
      for (auto& pose : out.poses) {
        const Eigen::Vector3d dt(rng.normal(), rng.normal(), rng.normal());
        const Eigen::Vector3d axis = detail::random_unit(rng);
        pose.t += sigma_t * dt;
        pose.R = axis_angle(axis, angle) * pose.R;
      }
      break;
    }
    case CorruptionKind::kFrameWarp: {
      const auto m = static_cast<std::size_t>(n / 2);
      const RgbImage& src = seq.frames[m];
      Eigen::Matrix2d a;
      a << rng.normal(), rng.normal(), rng.normal(), rng.normal();
      const Eigen::Vector2d b(rng.normal(), rng.normal());
      const Eigen::Vector2d center((src.width() - 1) / 2.0, (src.height() - 1) / 2.0);
      double max_disp = 0.0;
      for (double cx : {0.0, src.width() - 1.0}) {
        for (double cy : {0.0, src.height() - 1.0}) {
          max_disp = std::max(max_disp, (a * (Eigen::Vector2d(cx, cy) - center) + b).norm());
        }
      }
      const double scale = max_disp > 0.0 ? c.magnitude * kWarpPixelsPerUnit / max_disp : 0.0;
      RgbImage warped(src.width(), src.height());
      for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) {
          const Eigen::Vector2d p(x, y);
          const Eigen::Vector2d q = p + scale * (a * (p - center) + b);
          for (int ch = 0; ch < 3; ++ch) warped(x, y, ch) = detail::sample_bilinear(src, q.x(), q.y(), ch);
        }
      }
      quantize_8bit(warped);
      out.frames[m] = std::move(warped);
      break;
    }
    case CorruptionKind::kBrightnessFlicker: {
      const double first = rng.uniform() < 0.5 ? -1.0 : 1.0;
      for (int i = 0; i < n; ++i) {
        const double offset = c.magnitude * ((i % 2 == 0) ? first : -first);
        for (float& v : out.frames[static_cast<std::size_t>(i)].data()) v = static_cast<float>(v + offset);
        quantize_8bit(out.frames[static_cast<std::size_t>(i)]);
      }
      break;
    }
    case CorruptionKind::kFrozenFrame: {
      const int k = frozen_anchor(n);
      const int last = std::min(n - 1, k + frozen_span(c.magnitude));
      for (int i = k + 1; i <= last; ++i) out.frames[static_cast<std::size_t>(i)] = seq.frames[static_cast<std::size_t>(k)];
      break;
    }
  }
  return out;
}

/// Four ascending magnitudes starting at 0. On room scenes the score rises
/// strictly along each ladder; the second rung is the kind's detectability
/// floor. Found with samples/corruption_sweep.cpp.
inline std::array<double, 4> magnitude_ladder(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::kDepthNoise: return {0.0, 0.02, 0.05, 0.1};
    case CorruptionKind::kPoseJitter: return {0.0, 0.25, 0.5, 1.0};
    case CorruptionKind::kFrameWarp: return {0.0, 0.5, 1.0, 2.0};
    case CorruptionKind::kBrightnessFlicker: return {0.0, 0.02, 0.05, 0.1};
    case CorruptionKind::kFrozenFrame: return {0.0, 0.5, 1.0, 1.5};
  }
  return {0.0, 0.0, 0.0, 0.0};
}

inline double detectability_floor(CorruptionKind k) { return magnitude_ladder(k)[1]; }

}  // namespace geoscore::oracle
