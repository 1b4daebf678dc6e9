#include "driftforge/calibration.hpp"

#include <cmath>

namespace driftforge {

Eigen::MatrixXd numeric_jacobian(const ResidualFn& residual, const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd r0 = residual(x);
  Eigen::MatrixXd jac(r0.size(), x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    Eigen::VectorXd xp = x, xm = x;
    xp(c) += h;
    xm(c) -= h;
    jac.col(c) = (residual(xp) - residual(xm)) / (2.0 * h);
  }
  return jac;
}

Eigen::VectorXd lm_solve(const ResidualFn& residual, const JacobianFn& jacobian, const Eigen::VectorXd& x0,
                         const LmConfig& cfg, LmReport* report) {
  if (cfg.max_iters < 1 || cfg.lambda_init <= 0.0 || cfg.lambda_up <= 1.0 || cfg.lambda_down <= 0.0 ||
      cfg.lambda_down >= 1.0 || cfg.tol_step <= 0.0 || cfg.tol_residual <= 0.0)
    throw std::invalid_argument("lm_solve: invalid configuration");

  constexpr double kLambdaMax = 1e12;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd r = residual(x);
  double cost = r.squaredNorm();
  double lambda = cfg.lambda_init;

  LmReport rep;
  rep.trace.push_back({0, std::sqrt(cost), lambda, true});

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    const Eigen::MatrixXd jac = jacobian(x);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * r;

    bool stepped = false;
    while (lambda <= kLambdaMax) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal().array() += lambda;
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
      const Eigen::VectorXd delta = ldlt.solve(-jtr);
      if (ldlt.info() != Eigen::Success || !delta.allFinite()) {
        lambda *= cfg.lambda_up;  // singular normal equations: damp harder
        continue;
      }
      if (delta.norm() < cfg.tol_step) {
        rep.converged = true;
        rep.iterations = iter;
        rep.final_residual_norm = std::sqrt(cost);
        if (report) *report = rep;
        return x;
      }
      const Eigen::VectorXd x_try = x + delta;
      const Eigen::VectorXd r_try = residual(x_try);
      const double cost_try = r_try.squaredNorm();
      if (cost_try < cost) {
        const double decrease = cost - cost_try;
        x = x_try;
        r = r_try;
        cost = cost_try;
        lambda = std::max(lambda * cfg.lambda_down, 1e-18);
        rep.trace.push_back({iter, std::sqrt(cost), lambda, true});
        stepped = true;
        if (decrease < cfg.tol_residual) {
          rep.converged = true;
          rep.iterations = iter;
          rep.final_residual_norm = std::sqrt(cost);
          if (report) *report = rep;
          return x;
        }
        break;
      }
      lambda *= cfg.lambda_up;
      rep.trace.push_back({iter, std::sqrt(cost), lambda, false});
    }
    if (!stepped) {
      if (lambda > kLambdaMax)
        throw IllConditionedError("lm_solve: damping exceeded 1e12 without an acceptable step");
      break;
    }
  }
  rep.converged = false;
  rep.iterations = cfg.max_iters;
  rep.final_residual_norm = std::sqrt(cost);
  if (report) *report = rep;
  return x;
}

Mat3d exp_so3(const Vec3d& w) {
  const double angle = w.norm();
  if (angle < 1e-14) return Mat3d::Identity() + skew(w);
  const Vec3d axis = w / angle;
  const Mat3d k = skew(axis);
  return Mat3d::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

RelPose fit_mount(const std::vector<CalibSample>& samples, const LmConfig& cfg, LmReport* report) {
  if (samples.size() < 3) throw std::invalid_argument("fit_mount: needs at least 3 samples");

  std::vector<Mat3d> r_ref, r_imu;
  r_ref.reserve(samples.size());
  r_imu.reserve(samples.size());
  for (const auto& s : samples) {
    r_ref.push_back(rotation_matrix(s.ref_angle_deg));
    r_imu.push_back(rotation_matrix(s.imu_angle_deg));
  }

  // orientation-diversity check: the relative reference rotations must span
  // two non-collinear axes
  {
    std::vector<Vec3d> axes;
    for (std::size_t i = 1; i < r_ref.size(); ++i) {
      const Mat3d rel = r_ref[0].transpose() * r_ref[i];
      const Eigen::AngleAxisd aa(rel);
      if (std::abs(aa.angle()) > 1e-3) axes.push_back(aa.axis());
    }
    bool diverse = false;
    for (std::size_t i = 0; i + 1 < axes.size() && !diverse; ++i)
      for (std::size_t j = i + 1; j < axes.size() && !diverse; ++j)
        if (axes[i].cross(axes[j]).norm() > 1e-3) diverse = true;
    if (!diverse)
      throw IllConditionedError("fit_mount: samples do not span two rotation axes");
  }

  // initial estimate from the first sample, refined by an axis-angle increment
  const Mat3d r0 = r_ref[0].transpose() * r_imu[0];
  auto residual = [&](const Eigen::VectorXd& x) {
    const Mat3d r = r0 * exp_so3(Vec3d(x(0), x(1), x(2)));
    Eigen::VectorXd res(static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i)
      res(static_cast<Eigen::Index>(i)) = geodesic_angle_rad(Mat3d(r_ref[i] * r), r_imu[i]);
    return res;
  };

  LmReport rep;
  const Eigen::VectorXd x = lm_solve(residual, Eigen::VectorXd::Zero(3), cfg, &rep);
  if (report) *report = rep;
  const Mat3d r = r0 * exp_so3(Vec3d(x(0), x(1), x(2)));
  RelPose mount;
  mount.phi = euler_from_rotation(r);
  return mount;
}

}  // namespace driftforge
