#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "driftforge/autodiff.hpp"
#include "driftforge/estimator.hpp"
#include "driftforge/pose.hpp"
#include "driftforge/scan.hpp"

namespace driftforge {

inline constexpr double kSigmaGuard = 1e-8;  // below this SD a Pearson term is degenerate

// 1 - Cov(a,b)/(sigma(a) sigma(b)) for one component; a constant sequence on
// either side contributes the neutral value 1 and raises the degeneracy count.
template <typename S>
S pearson_component(const std::vector<S>& a, const std::vector<S>& b, int* degenerate = nullptr) {
  using std::sqrt;
  if (a.size() != b.size()) throw std::invalid_argument("pearson: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("pearson: needs at least 2 samples");
  const S n(static_cast<double>(a.size()));
  S mean_a(0.0), mean_b(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= n;
  mean_b /= n;
  S cov(0.0), var_a(0.0), var_b(0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const S da = a[i] - mean_a;
    const S db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  cov /= n;
  var_a /= n;
  var_b /= n;
  if (primal(var_a) < kSigmaGuard * kSigmaGuard || primal(var_b) < kSigmaGuard * kSigmaGuard) {
    if (degenerate) ++*degenerate;
    return S(1.0);
  }
  return S(1.0) - cov / (sqrt(var_a) * sqrt(var_b));
}

namespace detail {

template <typename S, typename GetA, typename GetB>
S pearson_over_components(std::size_t len, int comps, GetA&& ga, GetB&& gb, int* degenerate) {
  S acc(0.0);
  std::vector<S> a(len), b(len);
  for (int c = 0; c < comps; ++c) {
    for (std::size_t i = 0; i < len; ++i) {
      a[i] = ga(i, c);
      b[i] = gb(i, c);
    }
    acc += pearson_component(a, b, degenerate);
  }
  return acc / S(static_cast<double>(comps));
}

}  // namespace detail

// Pearson loss between two 3-vector sequences, averaged over the components.
template <typename SA, typename SB, typename S = SA>
S pearson_loss(const std::vector<Vec3<SA>>& a, const std::vector<Vec3<SB>>& b, int* degenerate = nullptr) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson_loss: length mismatch");
  return detail::pearson_over_components<S>(
      a.size(), 3, [&](std::size_t i, int c) { return S(a[i](c)); }, [&](std::size_t i, int c) { return S(b[i](c)); },
      degenerate);
}

// Pearson loss over pose sequences: the 6 components (t, phi) separately,
// averaged.
template <typename S>
S pearson_loss(const std::vector<RelPoseT<S>>& a, const std::vector<RelPose>& b, int* degenerate = nullptr) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson_loss: length mismatch");
  return detail::pearson_over_components<S>(
      a.size(), 6,
      [&](std::size_t i, int c) { return c < 3 ? a[i].t(c) : a[i].phi(c - 3); },
      [&](std::size_t i, int c) { return S(c < 3 ? b[i].t(c) : b[i].phi(c - 3)); }, degenerate);
}

// mean |a - b| over steps and the 6 pose components
template <typename S>
S pose_mae(const std::vector<RelPoseT<S>>& a, const std::vector<RelPose>& b) {
  using std::abs;
  if (a.size() != b.size()) throw std::invalid_argument("pose_mae: length mismatch");
  if (a.empty()) throw std::invalid_argument("pose_mae: empty sequence");
  S acc(0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (int c = 0; c < 3; ++c) acc += abs(a[i].t(c) - S(b[i].t(c))) + abs(a[i].phi(c) - S(b[i].phi(c)));
  return acc / S(static_cast<double>(a.size() * 6));
}

// MAE + Pearson against ground truth (the training objective)
template <typename S>
S supervised_loss(const std::vector<RelPoseT<S>>& est, const PoseChain& gt, int* degenerate = nullptr) {
  return pose_mae(est, gt) + pearson_loss(est, gt, degenerate);
}

// Discrete acceleration implied by the estimated steps, at inner frames
// m = 1..L-1 (for L steps): -R_{m-1}^T t_{m-1} + t_m, mean-zeroed per axis.
// The value at frame m is expressed in frame m's coordinates and carries a
// dt^2 factor (units: mm).
template <typename S>
std::vector<Vec3<S>> derive_accel(const std::vector<RelPoseT<S>>& steps) {
  if (steps.size() < 2) throw std::invalid_argument("derive_accel: needs at least 2 steps");
  std::vector<Vec3<S>> raw;
  raw.reserve(steps.size() - 1);
  for (std::size_t m = 1; m < steps.size(); ++m)
    raw.push_back(Vec3<S>(translation_of_inverse(steps[m - 1]) + steps[m].t));
  Vec3<S> mean = Vec3<S>::Zero();
  for (const auto& r : raw) mean += r;
  mean /= S(static_cast<double>(raw.size()));
  for (auto& r : raw) r -= mean;
  return raw;
}

// --- interval sampling and flipping ----------------------------------------

struct TauSpec {
  int stride = 1;
  bool flip = false;
  int offset = 0;
  std::uint64_t seed = 0;  // provenance of the draw, not used by the math
};

// number of sub-steps produced by tau on a chain of L steps
inline int tau_num_steps(int num_steps, const TauSpec& tau) {
  if (tau.stride < 1 || tau.offset < 0) throw std::invalid_argument("tau: invalid stride/offset");
  return (num_steps - tau.offset) / tau.stride;
}

// Converts a parameter sequence the way re-sampling the frames would: each
// output step is the composition of `stride` consecutive steps; under flip
// the order reverses and each step is inverted.
template <typename S>
std::vector<RelPoseT<S>> h_tau(const std::vector<RelPoseT<S>>& steps, const TauSpec& tau) {
  const int k = tau_num_steps(static_cast<int>(steps.size()), tau);
  if (k < 2) throw std::invalid_argument("h_tau: resulting sub-sequence is shorter than 3 frames");
  std::vector<RelPoseT<S>> grouped;
  grouped.reserve(static_cast<std::size_t>(k));
  for (int m = 0; m < k; ++m) {
    RelPoseT<S> g = steps[static_cast<std::size_t>(tau.offset + m * tau.stride)];
    for (int s = 1; s < tau.stride; ++s)
      g = compose(g, steps[static_cast<std::size_t>(tau.offset + m * tau.stride + s)]);
    grouped.push_back(std::move(g));
  }
  if (!tau.flip) return grouped;
  std::vector<RelPoseT<S>> out;
  out.reserve(grouped.size());
  for (int m = k - 1; m >= 0; --m) out.push_back(invert(grouped[static_cast<std::size_t>(m)]));
  return out;
}

// The same sampling applied to a whole scan: frames are picked at
// offset, offset+stride, ...; observations are re-composed through their
// motion code, IMU readings re-sampled, and ground truth (when present)
// transformed by h_tau.
Scan apply_tau_to_scan(const Scan& scan, const TauSpec& tau);

// --- online objectives ------------------------------------------------------

struct SingleImuTargets {
  std::vector<Vec3d> accel;      // frames 1..N-2, probe frame, gravity removed, mean-zeroed
  std::vector<Vec3d> rel_angle;  // steps 0..N-3, degrees
};

SingleImuTargets make_single_imu_targets(const Scan& scan, int imu_index, const ImuMount& mount);

// Agreement of each per-IMU estimate with its own sensor stream: Pearson on
// the derived acceleration plus MAE on the per-step angles.
template <typename S>
S single_imu_loss(const EstimateSetT<S>& est, const Scan& scan, const std::vector<ImuMount>& mounts,
                  int* degenerate = nullptr) {
  using std::abs;
  if (scan.n_frames < 4) throw std::invalid_argument("single_imu_loss: needs at least 4 frames");
  if (static_cast<int>(est.per_imu.size()) != scan.num_imus())
    throw std::invalid_argument("single_imu_loss: estimate/IMU count mismatch");
  S total(0.0);
  for (int j = 0; j < scan.num_imus(); ++j) {
    const auto& theta = est.per_imu[static_cast<std::size_t>(j)];
    const SingleImuTargets tgt = make_single_imu_targets(scan, j, mounts[static_cast<std::size_t>(j)]);
    const std::vector<Vec3<S>> ahat = derive_accel(theta);
    total += pearson_loss<S, double, S>(ahat, tgt.accel, degenerate);
    S mae(0.0);
    const std::size_t na = tgt.rel_angle.size();
    for (std::size_t k = 0; k < na; ++k)
      for (int c = 0; c < 3; ++c) mae += abs(theta[k].phi(c) - S(tgt.rel_angle[k](c)));
    total += mae / S(static_cast<double>(na * 3));
  }
  return total;
}

// Pairwise agreement between the per-IMU estimates; 0 (with a flag) when
// fewer than two streams exist. Pair terms are summed in value order so the
// result is exactly symmetric under stream permutation.
template <typename S>
S multi_imu_loss(const EstimateSetT<S>& est, int* degenerate = nullptr, bool* too_few = nullptr) {
  using std::abs;
  const int m = static_cast<int>(est.per_imu.size());
  if (m < 2) {
    if (too_few) *too_few = true;
    return S(0.0);
  }
  std::vector<S> terms;
  terms.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
  std::vector<std::vector<Vec3<S>>> ahat(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) ahat[static_cast<std::size_t>(j)] = derive_accel(est.per_imu[static_cast<std::size_t>(j)]);
  for (int j = 0; j < m; ++j) {
    for (int k = j + 1; k < m; ++k) {
      S term = pearson_loss<S, S, S>(ahat[static_cast<std::size_t>(j)], ahat[static_cast<std::size_t>(k)], degenerate);
      const auto& pj = est.per_imu[static_cast<std::size_t>(j)];
      const auto& pk = est.per_imu[static_cast<std::size_t>(k)];
      S mae(0.0);
      for (std::size_t i = 0; i < pj.size(); ++i)
        for (int c = 0; c < 3; ++c) mae += abs(pj[i].phi(c) - pk[i].phi(c));
      terms.push_back(term + mae / S(static_cast<double>(pj.size() * 3)));
    }
  }
  std::sort(terms.begin(), terms.end(), [](const S& a, const S& b) { return primal(a) < primal(b); });
  S total(0.0);
  for (const auto& t : terms) total += t;
  return total;
}

// mean |theta_sub - H_tau(theta)| over the sub-steps; both branches run
// through the estimator / pose algebra, so both are differentiable.
template <typename S>
S self_consistency_loss(const ModelParamsT<S>& params, const Scan& scan, const std::vector<ImuMount>& mounts,
                        const TauSpec& tau, const EstimateSetT<S>* full_est = nullptr) {
  using std::abs;
  const Scan sub = apply_tau_to_scan(scan, tau);
  const EstimateSetT<S> est_sub = forward_all(params, sub, mounts);
  EstimateSetT<S> full_local;
  if (!full_est) {
    full_local = forward_all(params, scan, mounts);
    full_est = &full_local;
  }
  const std::vector<RelPoseT<S>> converted = h_tau(full_est->mean, tau);
  if (converted.size() != est_sub.mean.size()) throw std::logic_error("self_consistency: branch length mismatch");
  S acc(0.0);
  for (std::size_t i = 0; i < converted.size(); ++i)
    for (int c = 0; c < 3; ++c)
      acc += abs(est_sub.mean[i].t(c) - converted[i].t(c)) + abs(est_sub.mean[i].phi(c) - converted[i].phi(c));
  return acc / S(static_cast<double>(converted.size() * 6));
}

// --- online refinement -------------------------------------------------------

struct LossBreakdown {
  double single_imu = 0.0;
  double multi_imu = 0.0;
  double self_consistency = 0.0;
  double total = 0.0;
  Vec3d weights = Vec3d::Ones();
  int degenerate_components = 0;
};

struct RefineTraceRow {
  int iteration = 0;
  LossBreakdown loss;
  double fdr = 0.0;  // percent; NaN when the scan has no ground truth
  double adr = 0.0;
  double ea = 0.0;
};

struct RefineConfig {
  int epochs = 60;
  double lr = 2e-6;
  Vec3d weights = Vec3d::Ones();  // single-IMU, multi-IMU, self-consistency
  std::uint64_t seed = 0;
  int max_stride = 3;
};

struct RefineResult {
  MotionModel model;
  EstimateSet backbone;
  EstimateSet refined;
  std::vector<RefineTraceRow> trace;  // epochs+1 rows: before each step, plus final
  bool aborted_non_finite = false;
};

// Test-time adaptation of a per-scan model copy: each epoch draws a fresh
// tau, evaluates the weighted online losses on the tape, and takes one Adam
// step at the online learning rate. The base model is never mutated.
RefineResult refine_online(const MotionModel& base, const Scan& scan, const std::vector<ImuMount>& mounts,
                           const RefineConfig& cfg);

}  // namespace driftforge
