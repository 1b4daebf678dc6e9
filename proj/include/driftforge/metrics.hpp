#pragma once

#include <vector>

#include "driftforge/pose.hpp"

namespace driftforge {

// Drift statistics between an estimated and a ground-truth pose chain, both
// accumulated from identity at frame 0. Distances are taken at frame centers.
struct MetricReport {
  double fdr = 0.0;     // final drift rate, percent of GT length
  double adr = 0.0;     // average drift rate, percent of GT length
  double md = 0.0;      // maximum drift, mm
  double sd = 0.0;      // sum of drift, mm
  double hd = 0.0;      // symmetric Hausdorff distance, mm
  double ea = 0.0;      // mean absolute orientation error, deg
  double length = 0.0;  // GT trajectory length, mm
};

// per-frame distance between estimated and GT frame centers; entry 0 is 0
std::vector<double> drift_series(const PoseChain& est, const PoseChain& gt);

double hausdorff_distance(const std::vector<Vec3d>& a, const std::vector<Vec3d>& b);

MetricReport compute_report(const PoseChain& est, const PoseChain& gt);

}  // namespace driftforge
