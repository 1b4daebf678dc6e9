#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <vector>

#include "driftforge/pose.hpp"
#include "driftforge/scan.hpp"

namespace driftforge {

struct LmConfig {
  int max_iters = 100;
  double lambda_init = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 0.1;
  double tol_step = 1e-12;
  double tol_residual = 1e-14;
};

struct LmIterRecord {
  int iteration = 0;
  double residual_norm = 0.0;
  double lambda = 0.0;
  bool accepted = false;
};

struct LmReport {
  bool converged = false;
  int iterations = 0;
  double final_residual_norm = 0.0;
  std::vector<LmIterRecord> trace;
};

struct IllConditionedError : std::runtime_error {
  explicit IllConditionedError(const std::string& what) : std::runtime_error(what) {}
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

// Central-difference Jacobian, the default when no analytic one is supplied.
Eigen::MatrixXd numeric_jacobian(const ResidualFn& residual, const Eigen::VectorXd& x, double h = 1e-7);

// Levenberg-Marquardt with the standard multiplicative damping schedule.
// Accepted residual norms are non-increasing; hitting max_iters yields a
// non-converged report rather than an error.
Eigen::VectorXd lm_solve(const ResidualFn& residual, const JacobianFn& jacobian, const Eigen::VectorXd& x0,
                         const LmConfig& cfg, LmReport* report = nullptr);

inline Eigen::VectorXd lm_solve(const ResidualFn& residual, const Eigen::VectorXd& x0, const LmConfig& cfg,
                                LmReport* report = nullptr) {
  return lm_solve(residual, [&](const Eigen::VectorXd& x) { return numeric_jacobian(residual, x); }, x0, cfg, report);
}

// One paired orientation observation: what the IMU reported and what the
// reference tracking reported for the probe, both as euler angles in degrees.
struct CalibSample {
  Vec3d imu_angle_deg = Vec3d::Zero();
  Vec3d ref_angle_deg = Vec3d::Zero();
};

// Rotation for an axis-angle increment (rotation vector, radians).
Mat3d exp_so3(const Vec3d& w);

// Fits the fixed mounting rotation R minimizing the squared geodesic angle
// between R_ref * R and R_imu over all samples. The rotation is parameterized
// by an axis-angle increment composed onto an initial estimate taken from the
// first sample.
RelPose fit_mount(const std::vector<CalibSample>& samples, const LmConfig& cfg, LmReport* report = nullptr);

}  // namespace driftforge
