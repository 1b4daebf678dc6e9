#include "driftforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace driftforge {

namespace {

std::vector<Vec3d> frame_centers(const std::vector<Mat4d>& abs) {
  std::vector<Vec3d> p;
  p.reserve(abs.size());
  for (const auto& m : abs) p.push_back(m.topRightCorner<3, 1>());
  return p;
}

double polyline_length(const std::vector<Vec3d>& p) {
  double len = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) len += (p[i] - p[i - 1]).norm();
  return len;
}

}  // namespace

std::vector<double> drift_series(const PoseChain& est, const PoseChain& gt) {
  if (est.size() != gt.size()) throw std::invalid_argument("drift_series: chain length mismatch");
  const auto pe = frame_centers(accumulate_transforms(est));
  const auto pg = frame_centers(accumulate_transforms(gt));
  std::vector<double> drift(pe.size());
  for (std::size_t i = 0; i < pe.size(); ++i) drift[i] = (pe[i] - pg[i]).norm();
  return drift;
}

double hausdorff_distance(const std::vector<Vec3d>& a, const std::vector<Vec3d>& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("hausdorff: empty point set");
  auto directed = [](const std::vector<Vec3d>& from, const std::vector<Vec3d>& to) {
    double worst = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, (p - q).norm());
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

MetricReport compute_report(const PoseChain& est, const PoseChain& gt) {
  if (est.size() != gt.size()) throw std::invalid_argument("compute_report: chain length mismatch");
  const auto abs_e = accumulate_transforms(est);
  const auto abs_g = accumulate_transforms(gt);
  const auto pe = frame_centers(abs_e);
  const auto pg = frame_centers(abs_g);

  MetricReport r;
  r.length = polyline_length(pg);
  if (r.length <= 0.0) throw std::invalid_argument("compute_report: ground-truth length is zero");

  std::vector<double> drift(pe.size());
  for (std::size_t i = 0; i < pe.size(); ++i) drift[i] = (pe[i] - pg[i]).norm();

  double sum = 0.0, peak = 0.0;
  for (double d : drift) {
    sum += d;
    peak = std::max(peak, d);
  }
  r.fdr = 100.0 * drift.back() / r.length;
  r.adr = 100.0 * (sum / static_cast<double>(drift.size())) / r.length;
  r.md = peak;
  r.sd = sum;
  r.hd = hausdorff_distance(pe, pg);

  double angle_sum = 0.0;
  for (std::size_t i = 0; i < abs_e.size(); ++i)
    angle_sum += geodesic_angle_deg(Mat3d(abs_e[i].topLeftCorner<3, 3>()), Mat3d(abs_g[i].topLeftCorner<3, 3>()));
  r.ea = angle_sum / static_cast<double>(abs_e.size());
  return r;
}

}  // namespace driftforge
