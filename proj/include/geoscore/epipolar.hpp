#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "geoscore/camera_geometry.hpp"
#include "geoscore/consistency_score.hpp"
#include "geoscore/error.hpp"
#include "geoscore/image.hpp"
#include "geoscore/random.hpp"

namespace geoscore {

/// Pixel (u1, v1) in the first view matched to (u2, v2) in the second.
struct Correspondence {
  double u1 = 0.0;
  double v1 = 0.0;
  double u2 = 0.0;
  double v2 = 0.0;

  Eigen::Vector3d x1() const { return {u1, v1, 1.0}; }
  Eigen::Vector3d x2() const { return {u2, v2, 1.0}; }
};

/// Rank-2 fundamental matrix scaled to unit Frobenius norm, mapping points of
/// the first view to epipolar lines of the second: x2^T F x1 = 0.
struct FundamentalMatrix {
  Eigen::Matrix3d f = Eigen::Matrix3d::Zero();
};

namespace detail {

inline Eigen::Matrix3d skew(const Eigen::Vector3d& t) {
  Eigen::Matrix3d s;
  s << 0.0, -t.z(), t.y(), t.z(), 0.0, -t.x(), -t.y(), t.x(), 0.0;
  return s;
}

inline Eigen::Matrix3d enforce_rank2(const Eigen::Matrix3d& f) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s = svd.singularValues();
  s.z() = 0.0;
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

inline Eigen::Matrix3d unit_frobenius(const Eigen::Matrix3d& f) {
  const double n = f.norm();
  require(n > 0.0 && std::isfinite(n), ErrorCode::kDegenerateGeometry, "fundamental matrix vanished");
  return f / n;
}

// Similarity moving the centroid to the origin with mean distance sqrt(2).
inline Eigen::Matrix3d normalizing_transform(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - c).norm();
  mean_dist /= static_cast<double>(pts.size());
  require(mean_dist > 0.0, ErrorCode::kDegenerateGeometry, "all points coincide");
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d t;
  t << s, 0.0, -s * c.x(), 0.0, s, -s * c.y(), 0.0, 0.0, 1.0;
  return t;
}

inline bool collinear(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) cov += (p - c) * (p - c).transpose();
  const Eigen::Vector2d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(cov).eigenvalues();
  return ev.y() <= 0.0 || ev.x() <= 1e-12 * ev.y();
}

}  // namespace detail

inline double sampson_distance(const Correspondence& m, const Eigen::Matrix3d& f, bool* degenerate = nullptr) {
  const Eigen::Vector3d x1 = m.x1();
  const Eigen::Vector3d x2 = m.x2();
  const Eigen::Vector3d fx1 = f * x1;
  const Eigen::Vector3d ftx2 = f.transpose() * x2;
  const double num = x2.dot(fx1);
  const double den = fx1.x() * fx1.x() + fx1.y() * fx1.y() + ftx2.x() * ftx2.x() + ftx2.y() * ftx2.y();
  if (degenerate) *degenerate = den <= 0.0;
  if (den <= 0.0) return 0.0;
  return num * num / den;
}

/// Mean first-order geometric error of the matches under F.
inline double sampson_error(const std::vector<Correspondence>& matches, const FundamentalMatrix& f) {
  require(!matches.empty(), ErrorCode::kInvalidInput, "sampson_error needs at least one match");
  double sum = 0.0;
  std::size_t usable = 0;
  for (const auto& m : matches) {
    bool degenerate = false;
    sum += sampson_distance(m, f.f, &degenerate);
    usable += !degenerate;
  }
  require(usable > 0, ErrorCode::kDegenerateGeometry, "every Sampson denominator is zero");
  return sum / static_cast<double>(matches.size());
}

/// Closed-form F between two calibrated views given camera-to-world poses.
inline FundamentalMatrix fundamental_from_poses(const Intrinsics& k, const CameraPose& pose_i,
                                                const CameraPose& pose_j) {
  pose_i.validate();
  pose_j.validate();
  const Eigen::Matrix3d r_rel = pose_j.R.transpose() * pose_i.R;
  const Eigen::Vector3d t_rel = pose_j.R.transpose() * (pose_i.t - pose_j.t);
  require(t_rel.norm() > 1e-12, ErrorCode::kDegenerateGeometry, "zero baseline between the two views");
  const Eigen::Matrix3d kinv = k.inverse_matrix();
  const Eigen::Matrix3d f = kinv.transpose() * detail::skew(t_rel) * r_rel * kinv;
  return {detail::unit_frobenius(f)};
}

/// Normalized eight-point solution with rank-2 enforcement.
inline FundamentalMatrix eight_point(const std::vector<Correspondence>& matches) {
  require(matches.size() >= 8, ErrorCode::kInvalidInput,
          "eight-point estimation needs >= 8 matches, got " + std::to_string(matches.size()));
  std::vector<Eigen::Vector2d> p1, p2;
  p1.reserve(matches.size());
  p2.reserve(matches.size());
  for (const auto& m : matches) {
    p1.emplace_back(m.u1, m.v1);
    p2.emplace_back(m.u2, m.v2);
  }
  require(!detail::collinear(p1) && !detail::collinear(p2), ErrorCode::kDegenerateGeometry,
          "matched points are collinear");
  const Eigen::Matrix3d t1 = detail::normalizing_transform(p1);
  const Eigen::Matrix3d t2 = detail::normalizing_transform(p2);

  Eigen::MatrixXd a(static_cast<Eigen::Index>(matches.size()), 9);
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const Eigen::Vector3d x1 = t1 * matches[i].x1();
    const Eigen::Vector3d x2 = t2 * matches[i].x2();
    const auto r = static_cast<Eigen::Index>(i);
    a.row(r) << x2.x() * x1.x(), x2.x() * x1.y(), x2.x(), x2.y() * x1.x(), x2.y() * x1.y(), x2.y(),
        x1.x(), x1.y(), 1.0;
  }
  // Pad to 9 rows so the full V is always available.
  if (a.rows() < 9) {
    a.conservativeResize(9, 9);
    a.bottomRows(9 - static_cast<Eigen::Index>(matches.size())).setZero();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd v = svd.matrixV().col(8);
  Eigen::Matrix3d fn;
  fn << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
  fn = detail::enforce_rank2(fn);
  const Eigen::Matrix3d f = t2.transpose() * fn * t1;
  return {detail::unit_frobenius(detail::enforce_rank2(detail::unit_frobenius(f)))};
}

struct RansacOptions {
  int iterations = 500;
  double threshold = 1.0;  // Sampson units (squared pixels)
  std::uint64_t seed = 0;
};

struct FundamentalEstimate {
  FundamentalMatrix f;
  std::vector<bool> inliers;
  std::size_t inlier_count = 0;
};

/// Eight-point F; with more than eight matches a seeded RANSAC selects the
/// inlier set which is then refit.
inline FundamentalEstimate estimate_fundamental(const std::vector<Correspondence>& matches,
                                                const RansacOptions& options = {}) {
  require(matches.size() >= 8, ErrorCode::kInvalidInput,
          "fundamental estimation needs >= 8 matches, got " + std::to_string(matches.size()));
  FundamentalEstimate out;
  if (matches.size() == 8) {
    out.f = eight_point(matches);
    out.inliers.assign(8, true);
    out.inlier_count = 8;
    return out;
  }

  {
    std::vector<Eigen::Vector2d> p1, p2;
    for (const auto& m : matches) {
      p1.emplace_back(m.u1, m.v1);
      p2.emplace_back(m.u2, m.v2);
    }
    require(!detail::collinear(p1) && !detail::collinear(p2), ErrorCode::kDegenerateGeometry,
            "matched points are collinear");
  }

  Rng rng(options.seed);
  std::vector<std::size_t> order(matches.size());
  std::vector<bool> best_mask;
  std::size_t best_count = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<Correspondence> sample(8);

  for (int it = 0; it < options.iterations; ++it) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    // Partial Fisher-Yates: the first eight entries form the sample.
    for (std::size_t i = 0; i < 8; ++i) {
      const std::size_t j = i + rng.below(order.size() - i);
      std::swap(order[i], order[j]);
      sample[i] = matches[order[i]];
    }
    FundamentalMatrix candidate;
    try {
      candidate = eight_point(sample);
    } catch (const Error&) {
      continue;
    }
    std::vector<bool> mask(matches.size(), false);
    std::size_t count = 0;
    double cost = 0.0;
    for (std::size_t i = 0; i < matches.size(); ++i) {
      const double d = sampson_distance(matches[i], candidate.f);
      if (d < options.threshold) {
        mask[i] = true;
        ++count;
        cost += d;
      } else {
        cost += options.threshold;
      }
    }
    if (count > best_count || (count == best_count && cost < best_cost)) {
      best_count = count;
      best_cost = cost;
      best_mask = std::move(mask);
    }
  }
  require(best_count >= 8, ErrorCode::kDegenerateGeometry, "RANSAC found no consensus of >= 8 matches");

  std::vector<Correspondence> inliers;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (best_mask[i]) inliers.push_back(matches[i]);
  }
  out.f = eight_point(inliers);
  out.inliers = std::move(best_mask);
  out.inlier_count = best_count;
  return out;
}

// ---------------------------------------------------------------------------
// Correspondence sources. Feature detection is not part of the toolkit; the
// two generators below are deterministic stand-ins: one reads the geometry,
// the other only the pixels.

/// Projects grid pixels of frame i into frame j using the stored depth and
/// poses. Points that leave frame j or are occluded there are dropped.
/// With `round_to_pixel`, both ends are snapped to integer pixels.
inline std::vector<Correspondence> project_correspondences(const SceneSequence& seq, int i, int j,
                                                           int grid_step = 8, bool round_to_pixel = false) {
  require(grid_step >= 1, ErrorCode::kInvalidInput, "grid step must be >= 1");
  const Intrinsics& k = seq.intrinsics;
  const auto si = static_cast<std::size_t>(i);
  const auto sj = static_cast<std::size_t>(j);
  std::vector<Correspondence> out;
  for (int v = grid_step / 2; v < k.height; v += grid_step) {
    for (int u = grid_step / 2; u < k.width; u += grid_step) {
      const double d = seq.depths[si](u, v);
      if (!(d > 0.0)) continue;
      const Eigen::Vector3d x_cam(d * (u - k.cx) / k.fx, d * (v - k.cy) / k.fy, d);
      const Eigen::Vector3d xj = seq.poses[sj].to_camera(seq.poses[si].to_world(x_cam));
      if (!(xj.z() > 1e-6)) continue;
      double u2 = k.fx * xj.x() / xj.z() + k.cx;
      double v2 = k.fy * xj.y() / xj.z() + k.cy;
      const double pu = std::floor(u2 + 0.5);
      const double pv = std::floor(v2 + 0.5);
      if (pu < 0 || pv < 0 || pu >= k.width || pv >= k.height) continue;
      const double dj = seq.depths[sj](static_cast<int>(pu), static_cast<int>(pv));
      if (dj > 0.0 && xj.z() > dj * 1.02) continue;  // hidden behind a nearer surface
      if (round_to_pixel) {
        u2 = pu;
        v2 = pv;
      }
      out.push_back({static_cast<double>(u), static_cast<double>(v), u2, v2});
    }
  }
  return out;
}

struct PatchMatchOptions {
  int grid_step = 6;
  int patch_radius = 4;
  int search_radius = 12;
  // Patches whose per-channel variance is below this are skipped as textureless.
  double min_variance = 1e-4;
};

/// Integer block matching by sum of squared differences. Equal costs keep the
/// smaller displacement, so identical frames match every pixel to itself.
inline std::vector<Correspondence> match_patches(const RgbImage& a, const RgbImage& b,
                                                 const PatchMatchOptions& options = {}) {
  require(a.same_size(b), ErrorCode::kDimensionMismatch, "match_patches: image sizes differ");
  const int r = options.patch_radius;
  const int s = options.search_radius;
  const int w = a.width();
  const int h = a.height();
  std::vector<Correspondence> out;
  for (int y = r; y < h - r; y += options.grid_step) {
    for (int x = r; x < w - r; x += options.grid_step) {
      double mean = 0.0;
      double sq = 0.0;
      const int n = (2 * r + 1) * (2 * r + 1) * 3;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          for (int c = 0; c < 3; ++c) {
            const double p = a(x + dx, y + dy, c);
            mean += p;
            sq += p * p;
          }
        }
      }
      mean /= n;
      if (sq / n - mean * mean < options.min_variance) continue;

      double best = std::numeric_limits<double>::infinity();
      int best_dx = 0;
      int best_dy = 0;
      for (int oy = -s; oy <= s; ++oy) {
        for (int ox = -s; ox <= s; ++ox) {
          const int cx = x + ox;
          const int cy = y + oy;
          if (cx - r < 0 || cy - r < 0 || cx + r >= w || cy + r >= h) continue;
          double ssd = 0.0;
          for (int dy = -r; dy <= r && ssd <= best; ++dy) {
            for (int dx = -r; dx <= r; ++dx) {
              for (int c = 0; c < 3; ++c) {
                const double d = static_cast<double>(a(x + dx, y + dy, c)) - b(cx + dx, cy + dy, c);
                ssd += d * d;
              }
            }
          }
          const bool closer = ox * ox + oy * oy < best_dx * best_dx + best_dy * best_dy;
          if (ssd < best || (ssd == best && closer)) {
            best = ssd;
            best_dx = ox;
            best_dy = oy;
          }
        }
      }
      out.push_back({static_cast<double>(x), static_cast<double>(y), static_cast<double>(x + best_dx),
                     static_cast<double>(y + best_dy)});
    }
  }
  return out;
}

struct EpipolarOptions {
  int frames = kDefaultFrameCount;
  PatchMatchOptions matching;
  RansacOptions ransac;
};

struct PairSampson {
  int frame_i = 0;
  int frame_j = 0;
  std::size_t matches = 0;
  std::size_t inliers = 0;
  double sampson = 0.0;
};

struct EpipolarReport {
  std::vector<PairSampson> pairs;
  double mean_sampson = 0.0;
};

/// Sampson error of two frames from their pixels alone: block matches, a
/// RANSAC fundamental matrix, and the mean error of all matches under it.
inline PairSampson pair_sampson(const RgbImage& a, const RgbImage& b, const EpipolarOptions& options = {}) {
  const auto matches = match_patches(a, b, options.matching);
  const auto est = estimate_fundamental(matches, options.ransac);
  return {0, 0, matches.size(), est.inlier_count, sampson_error(matches, est.f)};
}

/// Mean pairwise Sampson error over consecutive sampled frames.
inline EpipolarReport epipolar_score(const SceneSequence& seq, const EpipolarOptions& options = {}) {
  const auto indices = sample_frames(static_cast<int>(seq.size()), options.frames);
  EpipolarReport report;
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < indices.size(); ++k) {
    PairSampson p = pair_sampson(seq.frames[static_cast<std::size_t>(indices[k])],
                                 seq.frames[static_cast<std::size_t>(indices[k + 1])], options);
    p.frame_i = indices[k];
    p.frame_j = indices[k + 1];
    sum += p.sampson;
    report.pairs.push_back(p);
  }
  report.mean_sampson = sum / static_cast<double>(report.pairs.size());
  return report;
}

/// A correspondence tagged with the frames it links, as stored on disk.
struct FrameCorrespondence {
  int frame_i = 0;
  int frame_j = 0;
  Correspondence match;
};

/// Reads `frame_i frame_j u1 v1 u2 v2` lines; '#' starts a comment line.
inline std::vector<FrameCorrespondence> parse_correspondences(std::istream& in) {
  std::vector<FrameCorrespondence> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    FrameCorrespondence fc;
    ls >> fc.frame_i >> fc.frame_j >> fc.match.u1 >> fc.match.v1 >> fc.match.u2 >> fc.match.v2;
    require(!ls.fail() && (ls >> std::ws).eof(), ErrorCode::kParse,
            "correspondence line " + std::to_string(line_no) + ": expected six numbers");
    const auto& m = fc.match;
    require(std::isfinite(m.u1) && std::isfinite(m.v1) && std::isfinite(m.u2) && std::isfinite(m.v2),
            ErrorCode::kParse, "correspondence line " + std::to_string(line_no) + ": non-finite coordinate");
    out.push_back(fc);
  }
  return out;
}

inline void write_correspondences(std::ostream& out, const std::vector<FrameCorrespondence>& items) {
  std::ostringstream line;
  for (const auto& fc : items) {
    line.str("");
    line.precision(17);
    line << fc.frame_i << ' ' << fc.frame_j << ' ' << fc.match.u1 << ' ' << fc.match.v1 << ' ' << fc.match.u2
         << ' ' << fc.match.v2 << '\n';
    out << line.str();
  }
}

}  // namespace geoscore
