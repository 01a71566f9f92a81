#pragma once

#include <filesystem>
#include <span>

#include <Eigen/Core>

#include "mapfuse/association.hpp"
#include "mapfuse/geometry.hpp"
#include "mapfuse/map_model.hpp"

namespace mapfuse {

/// Diagonal 2x2 covariance of a point-to-point residual: the moment-matched
/// Laplace variances of both endpoints added as independent noise.
struct MixtureCov {
  double var_x = 1.0;
  double var_y = 1.0;
};

MixtureCov mixture_cov(const LaplaceScale& obs, const LaplaceScale& prior);

struct SolverConfig {
  int max_iters = 50;
  double lambda_init = 1e-3;
  double step_tol = 1e-8;
  double cost_tol = 1e-10;
  bool huber_enabled = false;
  double huber_delta = 1.0;
  /// Rotate the ego-axis-aligned observation covariance into the world frame
  /// with the current yaw estimate each iteration. When off, the given
  /// MixtureCov values are used verbatim.
  bool rotate_obs_cov = true;
  /// Ablation switch: keep low-confidence (demoted) matches in the solve.
  bool include_demoted = false;
};

/// Reads `key=value` lines: lm.max_iters, lm.lambda_init, lm.step_tol,
/// lm.cost_tol, huber.enabled. Unknown keys are ignored.
SolverConfig load_solver_config(const std::filesystem::path& path);

struct SolveReport {
  Pose2 pose;
  int iterations = 0;  // accepted LM steps
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  int inlier_count = 0;
};

/// r = R(yaw) * p_obs + t - p_prior, in xy.
Vec2 residual(const Pose2& pose, const Correspondence& c);

/// Analytic d r / d (x, y, yaw).
Eigen::Matrix<double, 2, 3> residual_jacobian(const Pose2& pose, const Correspondence& c);

/// Minimizes sum_i 1/2 * ||r_i||^2_{cov_i} over (x, y, yaw) with
/// Levenberg-Marquardt. `covs` may be empty, in which case covariances derive
/// from the correspondence scales. Throws on an empty or under-constrained
/// problem.
SolveReport solve_map_pose(std::span<const Correspondence> corrs,
                           std::span<const MixtureCov> covs, const Pose2& init,
                           const SolverConfig& cfg = {});

/// Pose from an association result: matched correspondences only (demoted
/// ones included only when cfg.include_demoted is set, for ablations).
SolveReport localize(const AssociationResult& result, const Pose2& init,
                     const SolverConfig& cfg = {});

}  // namespace mapfuse
