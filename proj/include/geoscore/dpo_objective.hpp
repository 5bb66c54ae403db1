#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "geoscore/error.hpp"
#include "geoscore/random.hpp"

// Preference optimization for a velocity-predicting (v-prediction) diffusion
// model. The log-likelihood ratio of policy and reference is replaced by the
// difference of velocity-regression energies, evaluated at a noise sample and
// timestep shared by the winner and loser of each pair.

namespace geoscore::dpo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Variance-preserving schedule: alpha_t^2 + sigma_t^2 = 1 and
/// alpha_bar_t = alpha_t^2.
struct NoiseSchedule {
  std::vector<double> alpha;
  std::vector<double> sigma;
  std::vector<double> alpha_bar;

  int timesteps() const noexcept { return static_cast<int>(alpha.size()); }

  /// alpha_t = cos(pi t / 2T), sigma_t = sin(pi t / 2T), t = 0 .. T-1.
  static NoiseSchedule cosine(int timesteps = 1000) {
    require(timesteps >= 1, ErrorCode::kInvalidInput, "schedule needs >= 1 timestep");
    std::vector<double> a(static_cast<std::size_t>(timesteps));
    for (int t = 0; t < timesteps; ++t) a[static_cast<std::size_t>(t)] = std::cos(std::numbers::pi * t / (2.0 * timesteps));
    return from_alphas(std::move(a));
  }

  static NoiseSchedule from_alphas(std::vector<double> alphas) {
    NoiseSchedule s;
    for (double a : alphas) {
      require(std::isfinite(a) && a >= 0.0 && a <= 1.0, ErrorCode::kInvalidInput, "alpha_t must lie in [0, 1]");
      s.sigma.push_back(std::sqrt(std::max(0.0, 1.0 - a * a)));
      s.alpha_bar.push_back(a * a);
    }
    s.alpha = std::move(alphas);
    s.validate();
    return s;
  }

  void validate() const {
    require(!alpha.empty() && alpha.size() == sigma.size() && alpha.size() == alpha_bar.size(),
            ErrorCode::kInvalidInput, "schedule arrays differ in length");
    for (std::size_t t = 0; t < alpha.size(); ++t) {
      require(std::abs(alpha[t] * alpha[t] + sigma[t] * sigma[t] - 1.0) <= 1e-9, ErrorCode::kInvalidInput,
              "schedule is not variance preserving at t=" + std::to_string(t));
      require(t == 0 || alpha_bar[t] <= alpha_bar[t - 1], ErrorCode::kInvalidInput,
              "alpha_bar increases at t=" + std::to_string(t));
    }
  }

  void check_timestep(int t) const {
    require(t >= 0 && t < timesteps(), ErrorCode::kInvalidInput, "timestep " + std::to_string(t) + " out of range");
  }
};

inline void check_same_dim(const Vector& a, const Vector& b, const char* what) {
  require(a.size() == b.size(), ErrorCode::kDimensionMismatch, std::string(what) + ": vector dimensions differ");
}

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
inline Vector noisy_latent(const Vector& x0, const Vector& eps, const NoiseSchedule& sched, int t) {
  check_same_dim(x0, eps, "noisy_latent");
  sched.check_timestep(t);
  const double ab = sched.alpha_bar[static_cast<std::size_t>(t)];
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

/// v_t = alpha_t eps - sigma_t x0.
inline Vector velocity_target(const Vector& x0, const Vector& eps, const NoiseSchedule& sched, int t) {
  check_same_dim(x0, eps, "velocity_target");
  sched.check_timestep(t);
  const auto i = static_cast<std::size_t>(t);
  return sched.alpha[i] * eps - sched.sigma[i] * x0;
}

inline double energy(const Vector& v_pred, const Vector& v_target) {
  check_same_dim(v_pred, v_target, "energy");
  return (v_target - v_pred).squaredNorm();
}

struct EnergyQuad {
  double e_theta_w = 0.0;
  double e_ref_w = 0.0;
  double e_theta_l = 0.0;
  double e_ref_l = 0.0;
};

struct LossValue {
  double loss = 0.0;
  double grad_e_theta_w = 0.0;
  double grad_e_theta_l = 0.0;
  double inner = 0.0;  // implicit reward margin
};

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double implicit_margin(const EnergyQuad& q, double beta) {
  return beta * ((q.e_ref_w - q.e_theta_w) - (q.e_ref_l - q.e_theta_l));
}

/// -log sigmoid(inner) and its partials with respect to the policy energies.
inline LossValue dpo_loss(const EnergyQuad& q, double beta) {
  require(beta > 0.0 && std::isfinite(beta), ErrorCode::kInvalidInput, "beta must be positive");
  require(std::isfinite(q.e_theta_w) && std::isfinite(q.e_ref_w) && std::isfinite(q.e_theta_l) &&
              std::isfinite(q.e_ref_l),
          ErrorCode::kInvalidInput, "energies must be finite");
  LossValue out;
  out.inner = implicit_margin(q, beta);
  out.loss = softplus(-out.inner);
  const double s = sigmoid(-out.inner);
  out.grad_e_theta_w = beta * s;
  out.grad_e_theta_l = -beta * s;
  return out;
}

/// One preference pair with the noise sample and timestep it shares.
struct DpoSample {
  Vector x0_w;
  Vector x0_l;
  Vector eps;
  int t = 0;
};

/// v(x_t) = W x_t + b.
struct LinearVelocityModel {
  Matrix W;
  Vector b;

  static LinearVelocityModel zeros(Eigen::Index dim) { return {Matrix::Zero(dim, dim), Vector::Zero(dim)}; }

  Vector predict(const Vector& x_t) const { return W * x_t + b; }
};

struct PairEnergies {
  EnergyQuad quad;
  Vector x_t_w, x_t_l;
  Vector r_w, r_l;  // v_target - v_theta
};

inline PairEnergies pair_energies(const DpoSample& s, const NoiseSchedule& sched, const LinearVelocityModel& policy,
                                  const LinearVelocityModel& reference) {
  PairEnergies pe;
  pe.x_t_w = noisy_latent(s.x0_w, s.eps, sched, s.t);
  pe.x_t_l = noisy_latent(s.x0_l, s.eps, sched, s.t);
  const Vector v_w = velocity_target(s.x0_w, s.eps, sched, s.t);
  const Vector v_l = velocity_target(s.x0_l, s.eps, sched, s.t);
  pe.r_w = v_w - policy.predict(pe.x_t_w);
  pe.r_l = v_l - policy.predict(pe.x_t_l);
  pe.quad.e_theta_w = pe.r_w.squaredNorm();
  pe.quad.e_theta_l = pe.r_l.squaredNorm();
  pe.quad.e_ref_w = energy(reference.predict(pe.x_t_w), v_w);
  pe.quad.e_ref_l = energy(reference.predict(pe.x_t_l), v_l);
  return pe;
}

struct BatchObjective {
  double loss = 0.0;
  double mean_margin = 0.0;
  std::vector<double> margins;
  Matrix grad_W;
  Vector grad_b;
};

/// Mean DPO loss over the pairs and its gradient with respect to (W, b).
inline BatchObjective batch_objective(const std::vector<DpoSample>& pairs, const NoiseSchedule& sched, double beta,
                                      const LinearVelocityModel& policy, const LinearVelocityModel& reference) {
  BatchObjective out;
  out.grad_W = Matrix::Zero(policy.W.rows(), policy.W.cols());
  out.grad_b = Vector::Zero(policy.b.size());
  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  for (const auto& s : pairs) {
    const PairEnergies pe = pair_energies(s, sched, policy, reference);
    const EnergyQuad& q = pe.quad;
    if (!std::isfinite(q.e_theta_w) || !std::isfinite(q.e_theta_l) || !std::isfinite(q.e_ref_w) ||
        !std::isfinite(q.e_ref_l)) {
      out.loss = std::numeric_limits<double>::quiet_NaN();
      return out;
    }
    const LossValue lv = dpo_loss(pe.quad, beta);
    out.loss += lv.loss * inv_n;
    out.mean_margin += lv.inner * inv_n;
    out.margins.push_back(lv.inner);
    // dE/dW = -2 r x_t^T, dE/db = -2 r
    out.grad_W += inv_n * -2.0 * (lv.grad_e_theta_w * pe.r_w * pe.x_t_w.transpose() +
                                  lv.grad_e_theta_l * pe.r_l * pe.x_t_l.transpose());
    out.grad_b += inv_n * -2.0 * (lv.grad_e_theta_w * pe.r_w + lv.grad_e_theta_l * pe.r_l);
  }
  return out;
}

struct TraceStep {
  int step = 0;
  double loss = 0.0;
  double mean_margin = 0.0;
  double positive_fraction = 0.0;
};

struct AlignmentTrace {
  std::vector<TraceStep> steps;  // state before each update, plus the final state
  std::vector<double> final_margins;
  LinearVelocityModel policy;
  LinearVelocityModel reference;
};

struct AlignOptions {
  double beta = 1.0;
  int steps = 500;
  double lr = 1e-2;
};

/// Full-batch gradient descent on the DPO loss for a linear velocity model.
/// The reference model is a frozen copy of `init`.
inline AlignmentTrace toy_align(const std::vector<DpoSample>& pairs, const NoiseSchedule& sched,
                                const AlignOptions& options, const LinearVelocityModel& init) {
  require(!pairs.empty(), ErrorCode::kInvalidInput, "toy_align needs at least one pair");
  require(options.steps >= 0, ErrorCode::kInvalidInput, "step count must be >= 0");
  const Eigen::Index dim = pairs.front().eps.size();
  require(init.W.rows() == dim && init.W.cols() == dim && init.b.size() == dim, ErrorCode::kDimensionMismatch,
          "model dimension does not match the latents");
  for (const auto& s : pairs) {
    require(s.x0_w.size() == dim && s.x0_l.size() == dim && s.eps.size() == dim, ErrorCode::kDimensionMismatch,
            "all latents must share one dimension");
    sched.check_timestep(s.t);
  }

  AlignmentTrace trace;
  trace.reference = init;
  trace.policy = init;
  for (int step = 0; step <= options.steps; ++step) {
    const BatchObjective obj = batch_objective(pairs, sched, options.beta, trace.policy, trace.reference);
    if (!std::isfinite(obj.loss) || !obj.grad_W.allFinite() || !obj.grad_b.allFinite()) {
      fail(ErrorCode::kTrainingDiverged, "non-finite loss at step " + std::to_string(step));
    }
    std::size_t positive = 0;
    for (double m : obj.margins) positive += m > 0.0;
    trace.steps.push_back({step, obj.loss, obj.mean_margin,
                           static_cast<double>(positive) / static_cast<double>(obj.margins.size())});
    if (step == options.steps) {
      trace.final_margins = obj.margins;
      break;
    }
    trace.policy.W -= options.lr * obj.grad_W;
    trace.policy.b -= options.lr * obj.grad_b;
  }
  return trace;
}

inline AlignmentTrace toy_align(const std::vector<DpoSample>& pairs, const NoiseSchedule& sched,
                                const AlignOptions& options = {}) {
  require(!pairs.empty(), ErrorCode::kInvalidInput, "toy_align needs at least one pair");
  return toy_align(pairs, sched, options, LinearVelocityModel::zeros(pairs.front().eps.size()));
}

/// Pairs whose winners are exactly linearly predictable: for a fixed matrix
/// M, x0_w is chosen so that v_t = M x_t at the pair's timestep. Losers are
/// plain Gaussian latents. Timesteps are drawn from [t_lo, t_hi].
inline std::vector<DpoSample> separable_cohort(int n_pairs, int dim, std::uint64_t seed, const NoiseSchedule& sched,
                                               int t_lo = 100, int t_hi = 900) {
  require(n_pairs >= 1 && dim >= 1, ErrorCode::kInvalidInput, "cohort needs >= 1 pair and dimension >= 1");
  require(0 <= t_lo && t_lo <= t_hi && t_hi < sched.timesteps(), ErrorCode::kInvalidInput,
          "cohort timestep range outside the schedule");
  Rng rng(seed);
  auto gaussian = [&](Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
    return v;
  };
  Matrix g(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = rng.normal();
  }
  // Symmetric positive definite, so sigma I + alpha M stays well conditioned.
  const Matrix id = Matrix::Identity(dim, dim);
  const Matrix m = 0.5 * id + (0.2 / static_cast<double>(dim)) * g * g.transpose();
  std::vector<DpoSample> out;
  for (int k = 0; k < n_pairs; ++k) {
    DpoSample s;
    s.t = t_lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(t_hi - t_lo + 1)));
    const auto ti = static_cast<std::size_t>(s.t);
    const double a = sched.alpha[ti];
    const double sg = sched.sigma[ti];
    s.eps = gaussian(dim);
    // alpha eps - sigma x0 = M (alpha x0 + sigma eps)
    s.x0_w = (sg * id + a * m).partialPivLu().solve((a * id - sg * m) * s.eps);
    s.x0_l = gaussian(dim);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace geoscore::dpo
