#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "driftforge/pose.hpp"

namespace driftforge {

inline constexpr double kGravityMmPerS2 = 9806.65;
inline constexpr double kAngleResolutionDeg = 0.5;   // deg/LSB
inline constexpr double kAccelResolutionG = 5e-4;    // g/LSB
inline const Vec3d kGravityWorldG = Vec3d(0.0, 0.0, 1.0);  // in g

enum class ScanTactic { kLinear, kCurved, kLoop, kSector };

inline std::string to_string(ScanTactic t) {
  switch (t) {
    case ScanTactic::kLinear: return "linear";
    case ScanTactic::kCurved: return "curved";
    case ScanTactic::kLoop: return "loop";
    case ScanTactic::kSector: return "sector";
  }
  throw std::logic_error("unknown tactic");
}

inline ScanTactic tactic_from_string(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "linear") return ScanTactic::kLinear;
  if (s == "curved") return ScanTactic::kCurved;
  if (s == "loop") return ScanTactic::kLoop;
  if (s == "sector") return ScanTactic::kSector;
  throw std::invalid_argument("unknown scan tactic: " + s);
}

// One IMU sample: absolute 3-axis orientation (deg) and 3-axis acceleration
// (g), both quantized at the sensor resolution.
struct ImuReading {
  Vec3d angle_deg = Vec3d::Zero();
  Vec3d accel_g = Vec3d::Zero();
};

// Fixed mounting of one IMU relative to the probe (pure rotation) plus its
// noise model.
struct ImuMount {
  RelPose rotation;  // t must stay zero
  Vec3d accel_bias_g = Vec3d::Zero();
  double angle_noise_sd_deg = 0.0;
  double accel_noise_sd_g = 0.0;
};

// A scanning sequence: per-step observation vectors, M IMU streams, and an
// optional ground-truth pose chain. Reading k is taken at frame k, so the
// last frame carries no reading; all per-step arrays have length N-1.
struct Scan {
  std::string id;
  ScanTactic tactic = ScanTactic::kLinear;
  double dt = 0.1;  // seconds between frames
  int n_frames = 0;
  std::vector<Eigen::VectorXd> obs;
  std::vector<std::vector<ImuReading>> imu;
  std::optional<PoseChain> gt;

  int steps() const { return n_frames - 1; }
  int num_imus() const { return static_cast<int>(imu.size()); }
  int obs_dim() const { return obs.empty() ? 0 : static_cast<int>(obs.front().size()); }
};

inline void validate(const Scan& s) {
  if (s.n_frames < 3) throw std::invalid_argument("scan " + s.id + ": needs at least 3 frames");
  if (static_cast<int>(s.obs.size()) != s.steps())
    throw std::invalid_argument("scan " + s.id + ": obs length != N-1");
  for (const auto& stream : s.imu)
    if (static_cast<int>(stream.size()) != s.steps())
      throw std::invalid_argument("scan " + s.id + ": imu stream length != N-1");
  if (s.gt && static_cast<int>(s.gt->size()) != s.steps())
    throw std::invalid_argument("scan " + s.id + ": gt length != N-1");
  if (s.dt <= 0.0) throw std::invalid_argument("scan " + s.id + ": dt must be positive");
}

inline double quantize(double v, double resolution) { return std::round(v / resolution) * resolution; }

// --- shared IMU data preparation -------------------------------------------
//
// The raw streams are expressed in each IMU's own frame. Everything downstream
// (estimator inputs, online losses) consumes them calibrated into the probe
// frame:
//  - probe orientation per reading:  R(phi) * R_mount^T
//  - relative probe rotation per step from consecutive readings
//  - acceleration rotated into the probe frame with the gravity estimate
//    (from the reading's own orientation) removed

inline Mat3d probe_rotation_from_reading(const Vec3d& imu_angle_deg, const ImuMount& mount) {
  return rotation_matrix(imu_angle_deg) * rotation_matrix(mount.rotation.phi).transpose();
}

struct ImuStepFeatures {
  // both have one entry per step; rel_angle_deg's final entry repeats the
  // previous one because the last frame has no reading
  std::vector<Vec3d> rel_angle_deg;
  std::vector<Vec3d> accel_probe_g;
};

inline ImuStepFeatures make_imu_features(const Scan& scan, int imu_index, const ImuMount& mount) {
  const auto& stream = scan.imu.at(static_cast<std::size_t>(imu_index));
  const int n = static_cast<int>(stream.size());
  const Mat3d r_mount = rotation_matrix(mount.rotation.phi);

  std::vector<Mat3d> probe_rot(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    probe_rot[static_cast<std::size_t>(k)] = rotation_matrix(stream[static_cast<std::size_t>(k)].angle_deg) * r_mount.transpose();

  ImuStepFeatures f;
  f.rel_angle_deg.resize(static_cast<std::size_t>(n), Vec3d::Zero());
  f.accel_probe_g.resize(static_cast<std::size_t>(n), Vec3d::Zero());
  for (int k = 0; k + 1 < n; ++k)
    f.rel_angle_deg[static_cast<std::size_t>(k)] =
        euler_from_rotation(Mat3d(probe_rot[static_cast<std::size_t>(k)].transpose() * probe_rot[static_cast<std::size_t>(k) + 1]));
  if (n >= 2) f.rel_angle_deg[static_cast<std::size_t>(n - 1)] = f.rel_angle_deg[static_cast<std::size_t>(n - 2)];
  for (int k = 0; k < n; ++k) {
    const auto& r = stream[static_cast<std::size_t>(k)];
    f.accel_probe_g[static_cast<std::size_t>(k)] =
        r_mount * r.accel_g - probe_rot[static_cast<std::size_t>(k)].transpose() * kGravityWorldG;
  }
  return f;
}

// Number of steps with a true (non-padded) relative-angle target.
inline int num_angle_target_steps(const Scan& scan) { return std::max(0, scan.steps() - 1); }

}  // namespace driftforge
