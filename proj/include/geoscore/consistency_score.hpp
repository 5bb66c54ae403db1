#pragma once

#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "geoscore/camera_geometry.hpp"
#include "geoscore/error.hpp"
#include "geoscore/image.hpp"
#include "geoscore/image_metrics.hpp"

namespace geoscore {

/// Frames, depth maps and camera-to-world poses of one video, sharing a
/// single set of intrinsics.
struct SceneSequence {
  std::vector<RgbImage> frames;
  std::vector<DepthMap> depths;
  std::vector<CameraPose> poses;
  Intrinsics intrinsics;
  std::string scene_id;

  std::size_t size() const noexcept { return frames.size(); }

  void validate() const {
    intrinsics.validate();
    require(frames.size() == depths.size() && frames.size() == poses.size(),
            ErrorCode::kDimensionMismatch, "frame, depth and pose counts differ");
    require(frames.size() >= 2, ErrorCode::kInvalidInput, "a sequence needs at least two frames");
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const std::string tag = "frame " + std::to_string(i);
      require(frames[i].same_size(intrinsics.width, intrinsics.height) &&
                  depths[i].same_size(intrinsics.width, intrinsics.height),
              ErrorCode::kDimensionMismatch, tag + ": size does not match intrinsics");
      validate_rgb(frames[i], tag);
      for (float d : depths[i].data()) {
        require(std::isfinite(d), ErrorCode::kNonFiniteDepth, tag + ": non-finite depth");
      }
      require(poses[i].t.allFinite(), ErrorCode::kInvalidInput, tag + ": non-finite translation");
      require(is_rotation(poses[i].R), ErrorCode::kNonRotation, tag + ": rotation is not in SO(3)");
    }
  }

  friend bool operator==(const SceneSequence&, const SceneSequence&) = default;
};

struct FrameScore {
  int frame_index = 0;
  double mse = 0.0;
  double perceptual = 0.0;
  double coverage_fraction = 0.0;
};

struct ConsistencyReport {
  std::string scene_id;
  std::vector<FrameScore> per_frame;
  double e_recon = 0.0;
  int t_used = 0;
  double coverage_mean = 0.0;
};

inline constexpr int kDefaultFrameCount = 10;

/// `t` indices from round(linspace(0, n_total - 1, t)), halves to even.
inline std::vector<int> sample_frames(int n_total, int t) {
  require(t >= 2, ErrorCode::kInvalidInput, "frame count T must be >= 2");
  require(t <= n_total, ErrorCode::kInvalidInput,
          "frame count T=" + std::to_string(t) + " exceeds sequence length " + std::to_string(n_total));
  std::vector<int> out(static_cast<std::size_t>(t));
  const std::int64_t den = t - 1;
  for (std::int64_t i = 0; i < t; ++i) {
    const std::int64_t num = i * (n_total - 1);
    std::int64_t q = num / den;
    const std::int64_t r2 = 2 * (num % den);
    if (r2 > den || (r2 == den && (q % 2) == 1)) ++q;
    out[static_cast<std::size_t>(i)] = static_cast<int>(q);
  }
  return out;
}

inline ColoredPointCloud fuse(const SceneSequence& seq, const std::vector<int>& indices,
                              int downsample = 1) {
  ColoredPointCloud cloud;
  for (int idx : indices) {
    require(idx >= 0 && static_cast<std::size_t>(idx) < seq.size(), ErrorCode::kInvalidInput,
            "frame index " + std::to_string(idx) + " out of range");
    const auto i = static_cast<std::size_t>(idx);
    cloud.append(backproject(seq.depths[i], seq.intrinsics, seq.poses[i], seq.frames[i], idx, downsample));
  }
  return cloud;
}

struct ScoreOptions {
  int frames = kDefaultFrameCount;
  int downsample = 1;
  // Render each frame without its own points.
  bool leave_one_out = false;
  PerceptualMetric metric;
  // Worker threads for the per-frame loop; results do not depend on it.
  int jobs = 1;
};

namespace detail {

// Pixels the cloud did not reach take the original frame's value so the
// structural term only sees differences on covered pixels.
inline RgbImage composite_over(const RenderResult& render, const RgbImage& original) {
  RgbImage out = original;
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      if (render.coverage(x, y) == 0) continue;
      for (int c = 0; c < 3; ++c) out(x, y, c) = render.image(x, y, c);
    }
  }
  return out;
}

inline FrameScore score_frame(const SceneSequence& seq, const ColoredPointCloud& cloud, int idx,
                              const ScoreOptions& options) {
  const auto i = static_cast<std::size_t>(idx);
  const RgbImage& original = seq.frames[i];
  FrameScore fs;
  fs.frame_index = idx;

  RenderOptions ro;
  if (options.leave_one_out) ro.exclude_frame = idx;
  std::size_t covered = 0;
  RenderResult render;
  if (!cloud.empty()) {
    render = reproject(cloud, seq.intrinsics, seq.poses[i], ro);
    covered = count_covered(render.coverage);
  }
  fs.coverage_fraction = static_cast<double>(covered) / static_cast<double>(original.pixel_count());
  if (covered == 0) {
    fs.mse = kEmptyMaskMse;
    fs.perceptual = options.metric.kind == PerceptualMetric::Kind::kStructuralSurrogate
                        ? 1.0
                        : perceptual_distance(options.metric, original, original, idx);
    return fs;
  }
  fs.mse = mse(render.image, original, &render.coverage);
  fs.perceptual = perceptual_distance(options.metric, composite_over(render, original), original, idx);
  return fs;
}

}  // namespace detail

/// Fuses the sampled frames into one cloud, renders it into every sampled
/// view and averages MSE + perceptual distance against the originals.
inline ConsistencyReport score(const SceneSequence& seq, const ScoreOptions& options = {}) {
  seq.validate();
  require(options.downsample >= 1, ErrorCode::kInvalidInput, "downsample must be >= 1");
  const auto indices = sample_frames(static_cast<int>(seq.size()), options.frames);
  const ColoredPointCloud cloud = fuse(seq, indices, options.downsample);

  ConsistencyReport report;
  report.scene_id = seq.scene_id;
  report.t_used = static_cast<int>(indices.size());
  report.per_frame.resize(indices.size());

  const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(indices.size())));
  if (jobs == 1) {
    for (std::size_t k = 0; k < indices.size(); ++k) {
      report.per_frame[k] = detail::score_frame(seq, cloud, indices[k], options);
    }
  } else {
    std::vector<std::jthread> workers;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t k = static_cast<std::size_t>(w); k < indices.size(); k += jobs) {
            report.per_frame[k] = detail::score_frame(seq, cloud, indices[k], options);
          }
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    workers.clear();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  double sum = 0.0;
  double coverage = 0.0;
  for (const auto& fs : report.per_frame) {
    sum += fs.mse + fs.perceptual;
    coverage += fs.coverage_fraction;
  }
  report.e_recon = sum / static_cast<double>(report.per_frame.size());
  report.coverage_mean = coverage / static_cast<double>(report.per_frame.size());
  return report;
}

}  // namespace geoscore
