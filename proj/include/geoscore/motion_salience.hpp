#pragma once

#include <vector>

#include "geoscore/camera_geometry.hpp"
#include "geoscore/error.hpp"

namespace geoscore {

inline constexpr double kMotionLambda = 0.1;
inline constexpr double kMotionEpsilon = 1e-6;
inline constexpr double kStaticThreshold = 0.001;

/// Camera-motion statistics of one pose trajectory.
///
/// Translation steps are divided by their own mean, so `t_bar` is exactly 1
/// for any trajectory that translates at all and 0 (guarded) for one that
/// does not. Rotation steps stay in radians.
struct MotionStats {
  std::vector<double> delta_t;
  std::vector<double> delta_theta;
  double s_trans = 0.0;
  double t_bar = 0.0;
  double r_bar = 0.0;
  double alpha = 0.0;
};

inline MotionStats motion_stats(const std::vector<CameraPose>& poses, double lambda = kMotionLambda,
                                double epsilon = kMotionEpsilon) {
  require(poses.size() >= 2, ErrorCode::kInvalidInput, "motion statistics need >= 2 poses");
  MotionStats m;
  const std::size_t steps = poses.size() - 1;
  m.delta_t.reserve(steps);
  m.delta_theta.reserve(steps);
  double sum_t = 0.0;
  double sum_r = 0.0;
  for (std::size_t i = 0; i < steps; ++i) {
    m.delta_t.push_back((poses[i + 1].t - poses[i].t).norm());
    m.delta_theta.push_back(rotation_angle(poses[i].R, poses[i + 1].R));
    sum_t += m.delta_t.back();
    sum_r += m.delta_theta.back();
  }
  const auto n = static_cast<double>(steps);
  m.s_trans = sum_t / n;
  if (m.s_trans > 1e-12) {
    double acc = 0.0;
    for (double dt : m.delta_t) acc += dt / m.s_trans;
    m.t_bar = acc / n;
  }
  m.r_bar = sum_r / n;
  m.alpha = m.t_bar + lambda * m.r_bar + epsilon;
  return m;
}

inline bool is_static(const MotionStats& stats, double threshold = kStaticThreshold) {
  return stats.alpha < threshold;
}

}  // namespace geoscore
