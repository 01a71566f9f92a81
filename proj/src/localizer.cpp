#include "mapfuse/localizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

namespace mapfuse {

namespace {

using Mat23 = Eigen::Matrix<double, 2, 3>;

Mat2 residual_cov(const Pose2& pose, const Correspondence& c, const MixtureCov* fixed,
                  const SolverConfig& cfg) {
  if (!cfg.rotate_obs_cov && fixed != nullptr) {
    Mat2 cov = Mat2::Zero();
    cov(0, 0) = fixed->var_x;
    cov(1, 1) = fixed->var_y;
    return cov;
  }
  Mat2 obs_cov = Mat2::Zero();
  obs_cov(0, 0) = c.obs_vertex.scale.var_x();
  obs_cov(1, 1) = c.obs_vertex.scale.var_y();
  Mat2 prior_cov = Mat2::Zero();
  prior_cov(0, 0) = c.prior_vertex.scale.var_x();
  prior_cov(1, 1) = c.prior_vertex.scale.var_y();
  if (!cfg.rotate_obs_cov) return obs_cov + prior_cov;
  const Mat2 r = pose.rotation();
  return r * obs_cov * r.transpose() + prior_cov;
}

double huber_rho(double e, double delta) {
  return e <= delta ? 0.5 * e * e : delta * (e - 0.5 * delta);
}

}  // namespace

MixtureCov mixture_cov(const LaplaceScale& obs, const LaplaceScale& prior) {
  if (obs.bx < 0.0 || obs.by < 0.0 || prior.bx < 0.0 || prior.by < 0.0) {
    throw std::invalid_argument("mixture_cov: scales must be non-negative");
  }
  MixtureCov cov;
  cov.var_x = 2.0 * obs.bx * obs.bx + 2.0 * prior.bx * prior.bx;
  cov.var_y = 2.0 * obs.by * obs.by + 2.0 * prior.by * prior.by;
  if (cov.var_x <= 0.0 || cov.var_y <= 0.0) {
    throw std::invalid_argument("mixture_cov: degenerate zero covariance");
  }
  return cov;
}

SolverConfig load_solver_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open solver config: " + path.string());
  SolverConfig cfg;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) continue;
    if (key == "lm.max_iters") {
      cfg.max_iters = std::stoi(value);
    } else if (key == "lm.lambda_init") {
      cfg.lambda_init = std::stod(value);
    } else if (key == "lm.step_tol") {
      cfg.step_tol = std::stod(value);
    } else if (key == "lm.cost_tol") {
      cfg.cost_tol = std::stod(value);
    } else if (key == "huber.enabled") {
      cfg.huber_enabled = (value == "true" || value == "1");
    }
  }
  return cfg;
}

Vec2 residual(const Pose2& pose, const Correspondence& c) {
  const Vec2 obs{c.obs_vertex.position.x(), c.obs_vertex.position.y()};
  const Vec2 prior{c.prior_vertex.position.x(), c.prior_vertex.position.y()};
  return pose.apply(obs) - prior;
}

Mat23 residual_jacobian(const Pose2& pose, const Correspondence& c) {
  const double px = c.obs_vertex.position.x();
  const double py = c.obs_vertex.position.y();
  const double cy = std::cos(pose.yaw), sy = std::sin(pose.yaw);
  Mat23 j;
  j << 1.0, 0.0, -sy * px - cy * py,  //
      0.0, 1.0, cy * px - sy * py;
  return j;
}

SolveReport solve_map_pose(std::span<const Correspondence> corrs,
                           std::span<const MixtureCov> covs, const Pose2& init,
                           const SolverConfig& cfg) {
  if (corrs.empty()) throw std::runtime_error("solve_map_pose: no correspondences");
  if (!covs.empty() && covs.size() != corrs.size()) {
    throw std::invalid_argument("solve_map_pose: covs size mismatch");
  }

  auto cov_at = [&](std::size_t i) { return covs.empty() ? nullptr : &covs[i]; };

  // Objective evaluated with the pose's own yaw in the covariance rotation,
  // so accepted-step monotonicity is well defined.
  auto cost_of = [&](const Pose2& pose) {
    double total = 0.0;
    for (std::size_t i = 0; i < corrs.size(); ++i) {
      const Vec2 r = residual(pose, corrs[i]);
      const Mat2 info = residual_cov(pose, corrs[i], cov_at(i), cfg).inverse();
      const double m2 = r.dot(info * r);
      total += cfg.huber_enabled ? huber_rho(std::sqrt(std::max(m2, 0.0)), cfg.huber_delta)
                                 : 0.5 * m2;
    }
    return total;
  };

  SolveReport report;
  report.inlier_count = static_cast<int>(corrs.size());
  Pose2 pose = init;
  double cost = cost_of(pose);
  report.initial_cost = cost;
  double lambda = cfg.lambda_init;
  bool converged = false;

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < corrs.size(); ++i) {
      const Vec2 r = residual(pose, corrs[i]);
      const Mat23 j = residual_jacobian(pose, corrs[i]);
      Mat2 info = residual_cov(pose, corrs[i], cov_at(i), cfg).inverse();
      if (cfg.huber_enabled) {
        const double e = std::sqrt(std::max(r.dot(info * r), 0.0));
        if (e > cfg.huber_delta) info *= cfg.huber_delta / e;
      }
      h += j.transpose() * info * j;
      g += j.transpose() * info * r;
    }
    if (iter == 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(h);
      const double emax = eig.eigenvalues().maxCoeff();
      const double emin = eig.eigenvalues().minCoeff();
      if (!(emax > 0.0) || emin < 1e-10 * std::max(emax, 1.0)) {
        throw std::runtime_error("solve_map_pose: under-constrained problem");
      }
    }

    bool accepted = false;
    double step_norm = 0.0;
    double decrease = 0.0;
    while (lambda < 1e12) {
      Eigen::Matrix3d damped = h;
      for (int d = 0; d < 3; ++d) damped(d, d) += lambda * h(d, d);
      const Eigen::LDLT<Eigen::Matrix3d> ldlt(damped);
      if (ldlt.info() != Eigen::Success) {
        throw std::runtime_error("solve_map_pose: rank-deficient normal matrix");
      }
      const Eigen::Vector3d step = ldlt.solve(-g);
      if (!step.allFinite()) {
        throw std::runtime_error("solve_map_pose: rank-deficient normal matrix");
      }
      const Pose2 cand{pose.x + step.x(), pose.y + step.y(), pose.yaw + step.z()};
      const double cand_cost = cost_of(cand);
      if (cand_cost < cost) {
        step_norm = step.norm();
        decrease = cost - cand_cost;
        pose = cand;
        cost = cand_cost;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        ++report.iterations;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      converged = true;  // no descent direction improves the cost further
      break;
    }
    if (step_norm < cfg.step_tol || decrease < cfg.cost_tol) {
      converged = true;
      break;
    }
  }

  report.pose = pose;
  report.final_cost = cost;
  report.converged = converged;
  return report;
}

SolveReport localize(const AssociationResult& result, const Pose2& init,
                     const SolverConfig& cfg) {
  std::vector<Correspondence> corrs = result.correspondences;
  if (cfg.include_demoted) {
    corrs.insert(corrs.end(), result.demoted_correspondences.begin(),
                 result.demoted_correspondences.end());
  }
  if (corrs.empty()) throw std::runtime_error("localize: no matched correspondences");
  std::vector<MixtureCov> covs;
  covs.reserve(corrs.size());
  for (const auto& c : corrs) covs.push_back(mixture_cov(c.obs_vertex.scale, c.prior_vertex.scale));
  return solve_map_pose(corrs, covs, init, cfg);
}

}  // namespace mapfuse
