#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "driftforge/rng.hpp"
#include "driftforge/scan.hpp"

namespace driftforge {

inline constexpr double kArmPresetLengthMm = 323.96;
inline constexpr double kCarotidPresetLengthMm = 203.25;

// Shaping knobs for the synthetic probe paths. Speed modulation是 what gives
// the acceleration channel a signal above the sensor resolution.
struct TrajectoryOptions {
  double jitter_scale = 0.05;       // translation jitter as a fraction of the mean step
  double rot_jitter_sd_deg = 0.05;  // per-step white rotation jitter
  double wobble_amp_deg = 1.0;      // slow orientation wobble amplitude
  double speed_mod_amp = 0.4;       // fractional speed modulation
  double speed_mod_cycles = 5.0;    // modulation cycles over the scan
};

// Ground-truth relative steps for one scan. The probe advances along its +y
// (elevation) axis; arc tactics sweep about x or z so |phi_y| stays clear of
// gimbal lock. Total center path length is rescaled to `length_mm` exactly.
PoseChain gen_trajectory(ScanTactic tactic, int n_frames, double length_mm, std::uint64_t seed,
                         const TrajectoryOptions& opt = {});

struct ImuResolution {
  double angle_deg = kAngleResolutionDeg;
  double accel_g = kAccelResolutionG;
};

// Orientation and accelerometer readings for one mounted IMU along a
// ground-truth chain. Angles are the IMU's absolute orientation; acceleration
// is the second difference of frame centers plus gravity, in the IMU frame.
// Reading k sits at frame k (k = 0..N-2); frame 0 repeats frame 1's motion
// term since it has no second difference.
std::vector<ImuReading> simulate_imu(const PoseChain& gt, const ImuMount& mount, double dt,
                                     const ImuResolution& res, std::uint64_t seed);

struct ObsOptions {
  int dim = 16;                       // >= 7
  double noise_sd = 0.1;              // additive noise on the 6 motion entries
  double elevation_gain = 0.3;        // attenuation of the t_y entry
  double elevation_rel_noise_sd = 0.3;  // extra multiplicative noise on t_y
};

// Stand-in for per-step image content: the step parameters with the elevation
// component attenuated and noisier, padded with standard-normal distractors.
Eigen::VectorXd synth_observation(const RelPose& gt_step, const ObsOptions& opt, Rng& rng);

// identity plus 90-degree mounts about x, y and z ("three axes plus redundancy")
std::vector<ImuMount> default_mounts(int count, double angle_noise_sd_deg, double accel_noise_sd_g,
                                     double accel_bias_sd_g, std::uint64_t seed);

// contiguous sub-scan of n_frames frames starting at start_frame
Scan crop_scan(const Scan& scan, int start_frame, int n_frames);

struct DatasetConfig {
  int subjects = 10;
  int scans_per_subject = 4;
  std::vector<ScanTactic> tactics = {ScanTactic::kLinear, ScanTactic::kCurved, ScanTactic::kLoop,
                                     ScanTactic::kSector};
  int n_frames = 100;
  std::string preset;             // "", "arm" or "carotid"
  double length_mm = 100.0;       // ignored when a preset is set
  double length_jitter_frac = 0.05;
  double dt = 0.1;
  int num_imus = 4;
  ObsOptions obs;
  double angle_noise_sd_deg = 0.1;
  double accel_noise_sd_g = 3e-4;
  double accel_bias_sd_g = 2e-3;
  TrajectoryOptions traj;
  double subject_variation = 0.25;  // relative spread of per-subject motion style
  int train_subjects = 6;
  int val_subjects = 2;
  int test_subjects = 2;
  int train_aug_per_scan = 0;
  int test_aug_per_scan = 0;
  std::uint64_t seed = 1;
};

void validate(const DatasetConfig& cfg);

double preset_length_mm(const DatasetConfig& cfg);

struct Dataset {
  std::vector<Scan> train, val, test;
  std::vector<ImuMount> mounts;
  std::map<std::string, std::string> subject_of;  // scan id -> subject id
};

// Simulates every scan, splits by subject, and applies crop/stride/flip
// augmentation with ground truth re-composed consistently.
Dataset make_dataset(const DatasetConfig& cfg);

}  // namespace driftforge
