#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftforge/calibration.hpp"
#include "driftforge/estimator.hpp"
#include "driftforge/metrics.hpp"
#include "driftforge/scan.hpp"
#include "driftforge/simulator.hpp"

namespace driftforge {

using nlohmann::json;

// Scan file layout: header (id, tactic, dt, N, M, d) plus row arrays
// gt (N-1 x 6: t_x,t_y,t_z,phi_x,phi_y,phi_z), obs (N-1 x d) and
// imu (M x N-1 x 6: Phi_x,Phi_y,Phi_z,A_x,A_y,A_z). Units mm / deg / g.
json scan_to_json(const Scan& scan);
Scan scan_from_json(const json& j);
void save_scan(const std::filesystem::path& path, const Scan& scan);
Scan load_scan(const std::filesystem::path& path);

json to_json(const DatasetConfig& cfg);
DatasetConfig dataset_config_from_json(const json& j);

json mount_to_json(const ImuMount& m);
ImuMount mount_from_json(const json& j);

// hash of the interface-critical fields a checkpoint must share with the
// data it is applied to
std::uint64_t compat_hash(int obs_dim, int num_imus);

struct Manifest {
  DatasetConfig config;
  std::vector<ImuMount> mounts;
  std::vector<std::string> train_ids, val_ids, test_ids;
  std::map<std::string, std::string> subject_of;
};

void save_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest load_manifest(const std::filesystem::path& path);

struct Checkpoint {
  MotionModel model;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;  // compat_hash of the training data
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct MountFit {
  RelPose rotation;
  double final_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct CalibrationReport {
  std::vector<MountFit> imus;
};

void save_calibration(const std::filesystem::path& path, const CalibrationReport& r);
CalibrationReport load_calibration(const std::filesystem::path& path);

// plain-text table, deterministic formatting (shortest round-trip doubles)
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

std::string format_double(double v);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

// Per-scan estimate file emitted by the refine stage.
struct EstimateRecord {
  std::string scan_id;
  PoseChain backbone;  // mean estimate before refinement
  PoseChain refined;   // mean estimate after refinement
};

void save_estimates(const std::filesystem::path& path, const EstimateRecord& rec);
EstimateRecord load_estimates(const std::filesystem::path& path);

// --- SVG decline curves -----------------------------------------------------

struct CurveSeries {
  std::string label;
  std::string color;
  std::vector<double> values;  // y per iteration
};

// Fixed-axis line plot (iteration on x); used for the metric decline curves.
std::string render_curve_svg(const std::string& title, const std::string& y_label,
                             const std::vector<CurveSeries>& series, double y_min, double y_max);

}  // namespace driftforge
