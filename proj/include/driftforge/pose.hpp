#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace driftforge {

// Conventions used across the project:
//  - rotations are intrinsic x, then y, then z; as matrices R = Rz * Ry * Rx
//  - Euler angles are stored in degrees, each in (-180, 180]
//  - translations are in millimetres
//  - a relative pose at step i is the pose of frame i+1 expressed in frame i
template <typename S> using Vec3 = Eigen::Matrix<S, 3, 1>;
template <typename S> using Mat3 = Eigen::Matrix<S, 3, 3>;
template <typename S> using Mat4 = Eigen::Matrix<S, 4, 4>;

using Vec3d = Vec3<double>;
using Mat3d = Mat3<double>;
using Mat4d = Mat4<double>;

inline double primal(double x) { return x; }

struct GimbalLockError : std::runtime_error {
  explicit GimbalLockError(double phi_y_deg)
      : std::runtime_error("euler extraction hit gimbal lock: |phi_y| = " + std::to_string(phi_y_deg) + " deg") {}
};

template <typename S>
S deg2rad(const S& a) {
  return a * S(std::numbers::pi / 180.0);
}

template <typename S>
S rad2deg(const S& a) {
  return a * S(180.0 / std::numbers::pi);
}

// wraps into (-180, 180]; the shift is constant in a neighbourhood, so this
// stays differentiable for tape scalars
template <typename S>
S normalize_angle_deg(const S& a) {
  const double p = primal(a);
  double k = std::floor((p + 180.0) / 360.0);
  if (p - 360.0 * k == -180.0) k -= 1.0;  // boundary goes to +180
  if (k == 0.0) return a;
  return a - S(360.0 * k);
}

inline double angle_diff_deg(double to, double from) { return normalize_angle_deg(to - from); }

template <typename S>
struct RelPoseT {
  Vec3<S> t = Vec3<S>::Zero();    // mm
  Vec3<S> phi = Vec3<S>::Zero();  // deg

  RelPoseT() = default;
  RelPoseT(const Vec3<S>& t_, const Vec3<S>& phi_) : t(t_), phi(phi_) {}
};

using RelPose = RelPoseT<double>;
using PoseChain = std::vector<RelPose>;  // N-1 relative steps for N frames

template <typename S>
Mat3<S> rotation_matrix(const Vec3<S>& phi_deg) {
  using std::cos;
  using std::sin;
  const S x = deg2rad(phi_deg(0)), y = deg2rad(phi_deg(1)), z = deg2rad(phi_deg(2));
  const S cx = cos(x), sx = sin(x);
  const S cy = cos(y), sy = sin(y);
  const S cz = cos(z), sz = sin(z);
  Mat3<S> r;
  // Rz * Ry * Rx expanded
  r(0, 0) = cz * cy;
  r(0, 1) = cz * sy * sx - sz * cx;
  r(0, 2) = cz * sy * cx + sz * sx;
  r(1, 0) = sz * cy;
  r(1, 1) = sz * sy * sx + cz * cx;
  r(1, 2) = sz * sy * cx - cz * sx;
  r(2, 0) = -sy;
  r(2, 1) = cy * sx;
  r(2, 2) = cy * cx;
  return r;
}

template <typename S>
Vec3<S> euler_from_rotation(const Mat3<S>& r) {
  using std::asin;
  using std::atan2;
  const double sy = primal(r(2, 0));
  if (std::abs(sy) >= 1.0) throw GimbalLockError(90.0);
  const S phi_y = rad2deg(asin(-r(2, 0)));
  if (90.0 - std::abs(primal(phi_y)) < 1e-6) throw GimbalLockError(primal(phi_y));
  const S phi_x = rad2deg(atan2(r(2, 1), r(2, 2)));
  const S phi_z = rad2deg(atan2(r(1, 0), r(0, 0)));
  return Vec3<S>(normalize_angle_deg(phi_x), normalize_angle_deg(phi_y), normalize_angle_deg(phi_z));
}

template <typename S>
Mat4<S> to_matrix(const RelPoseT<S>& p) {
  Mat4<S> m = Mat4<S>::Identity();
  m.template topLeftCorner<3, 3>() = rotation_matrix(p.phi);
  m.template topRightCorner<3, 1>() = p.t;
  return m;
}

template <typename S>
RelPoseT<S> from_matrix(const Mat4<S>& m) {
  return RelPoseT<S>(m.template topRightCorner<3, 1>(), euler_from_rotation(Mat3<S>(m.template topLeftCorner<3, 3>())));
}

template <typename S>
RelPoseT<S> compose(const RelPoseT<S>& a, const RelPoseT<S>& b) {
  const Mat3<S> ra = rotation_matrix(a.phi);
  const Mat3<S> rb = rotation_matrix(b.phi);
  return RelPoseT<S>(Vec3<S>(ra * b.t + a.t), euler_from_rotation(Mat3<S>(ra * rb)));
}

template <typename S>
RelPoseT<S> invert(const RelPoseT<S>& p) {
  const Mat3<S> rt = rotation_matrix(p.phi).transpose();
  return RelPoseT<S>(Vec3<S>(-(rt * p.t)), euler_from_rotation(rt));
}

// translation component of invert(p), i.e. -R^T t, without the euler extraction
template <typename S>
Vec3<S> translation_of_inverse(const RelPoseT<S>& p) {
  return -(rotation_matrix(p.phi).transpose() * p.t);
}

// N absolute poses from N-1 relative steps; absolute[0] is the identity
template <typename S>
std::vector<RelPoseT<S>> accumulate(const std::vector<RelPoseT<S>>& chain) {
  if (chain.empty()) throw std::invalid_argument("accumulate: empty chain");
  std::vector<RelPoseT<S>> abs;
  abs.reserve(chain.size() + 1);
  abs.emplace_back();
  for (const auto& step : chain) abs.push_back(compose(abs.back(), step));
  return abs;
}

// matrix-level accumulation; immune to gimbal lock, used where only
// positions/orientations are needed
template <typename S>
std::vector<Mat4<S>> accumulate_transforms(const std::vector<RelPoseT<S>>& chain) {
  std::vector<Mat4<S>> abs;
  abs.reserve(chain.size() + 1);
  abs.push_back(Mat4<S>::Identity());
  for (const auto& step : chain) abs.push_back(Mat4<S>(abs.back() * to_matrix(step)));
  return abs;
}

template <typename S>
Mat3<S> skew(const Vec3<S>& v) {
  Mat3<S> m;
  m << S(0), -v(2), v(1), v(2), S(0), -v(0), -v(1), v(0), S(0);
  return m;
}

inline double geodesic_angle_rad(const Mat3d& a, const Mat3d& b) {
  const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

inline double geodesic_angle_deg(const Mat3d& a, const Mat3d& b) { return rad2deg(geodesic_angle_rad(a, b)); }

}  // namespace driftforge
