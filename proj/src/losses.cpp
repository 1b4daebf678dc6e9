#include "driftforge/losses.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "driftforge/metrics.hpp"
#include "driftforge/optim.hpp"
#include "driftforge/rng.hpp"

namespace driftforge {

namespace {

// The first 6 observation entries are a motion code (t, phi of the step, with
// the elevation entry attenuated at the source). Re-sampling frames composes
// the codes; flipping inverts them. The distractor tail is carried over.
RelPose obs_motion_code(const Eigen::VectorXd& o) {
  return RelPose(Vec3d(o(0), o(1), o(2)), Vec3d(o(3), o(4), o(5)));
}

Eigen::VectorXd obs_with_code(const Eigen::VectorXd& tail_source, const RelPose& code) {
  Eigen::VectorXd o = tail_source;
  for (int a = 0; a < 3; ++a) {
    o(a) = code.t(a);
    o(3 + a) = code.phi(a);
  }
  return o;
}

}  // namespace

Scan apply_tau_to_scan(const Scan& scan, const TauSpec& tau) {
  validate(scan);
  const int steps = scan.steps();
  const int k = tau_num_steps(steps, tau);
  if (k < 2) throw std::invalid_argument("apply_tau_to_scan: result would have fewer than 3 frames");

  Scan out;
  out.id = scan.id + "#tau_s" + std::to_string(tau.stride) + (tau.flip ? "f" : "") + "_o" + std::to_string(tau.offset);
  out.tactic = scan.tactic;
  out.dt = scan.dt * tau.stride;
  out.n_frames = k + 1;

  // composed motion codes per group, plus each group's first original index
  std::vector<RelPose> codes(static_cast<std::size_t>(k));
  std::vector<int> group_start(static_cast<std::size_t>(k));
  for (int m = 0; m < k; ++m) {
    const int g0 = tau.offset + m * tau.stride;
    group_start[static_cast<std::size_t>(m)] = g0;
    RelPose code = obs_motion_code(scan.obs[static_cast<std::size_t>(g0)]);
    for (int s = 1; s < tau.stride; ++s)
      code = compose(code, obs_motion_code(scan.obs[static_cast<std::size_t>(g0 + s)]));
    codes[static_cast<std::size_t>(m)] = code;
  }

  out.obs.reserve(static_cast<std::size_t>(k));
  for (int m = 0; m < k; ++m) {
    const int src = tau.flip ? k - 1 - m : m;
    const RelPose code = tau.flip ? invert(codes[static_cast<std::size_t>(src)]) : codes[static_cast<std::size_t>(src)];
    out.obs.push_back(obs_with_code(scan.obs[static_cast<std::size_t>(group_start[static_cast<std::size_t>(src)])], code));
  }

  // readings live at the picked frames; under flip sub-frame m maps to picked
  // frame k-m, whose reading does not exist at the very last original frame
  out.imu.resize(scan.imu.size());
  const int last_reading = steps - 1;
  for (std::size_t j = 0; j < scan.imu.size(); ++j) {
    out.imu[j].reserve(static_cast<std::size_t>(k));
    for (int m = 0; m < k; ++m) {
      const int picked = tau.flip ? tau.offset + (k - m) * tau.stride : tau.offset + m * tau.stride;
      out.imu[j].push_back(scan.imu[j][static_cast<std::size_t>(std::min(picked, last_reading))]);
    }
  }

  if (scan.gt) out.gt = h_tau(*scan.gt, tau);
  validate(out);
  return out;
}

SingleImuTargets make_single_imu_targets(const Scan& scan, int imu_index, const ImuMount& mount) {
  const ImuStepFeatures feats = make_imu_features(scan, imu_index, mount);
  const int n = scan.steps();
  if (n < 3) throw std::invalid_argument("single-IMU targets need at least 4 frames");
  SingleImuTargets tgt;
  tgt.accel.assign(feats.accel_probe_g.begin() + 1, feats.accel_probe_g.end());
  Vec3d mean = Vec3d::Zero();
  for (const auto& a : tgt.accel) mean += a;
  mean /= static_cast<double>(tgt.accel.size());
  for (auto& a : tgt.accel) a -= mean;
  tgt.rel_angle.assign(feats.rel_angle_deg.begin(), feats.rel_angle_deg.end() - 1);
  return tgt;
}

namespace {

PoseChain to_double_chain(const std::vector<RelPoseT<ad::Value>>& steps) {
  PoseChain out;
  out.reserve(steps.size());
  for (const auto& s : steps) {
    RelPose p;
    for (int c = 0; c < 3; ++c) {
      p.t(c) = s.t(c).value();
      p.phi(c) = s.phi(c).value();
    }
    out.push_back(p);
  }
  return out;
}

TauSpec sample_tau(int num_steps, int max_stride, Rng& rng) {
  TauSpec tau;
  const int smax = std::max(1, std::min(max_stride, num_steps / 2));
  tau.stride = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(smax)));
  tau.flip = rng.bernoulli(0.5);
  tau.offset = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_steps - 2 * tau.stride + 1)));
  return tau;
}

void fill_metrics(RefineTraceRow& row, const PoseChain& est, const Scan& scan) {
  if (!scan.gt) {
    row.fdr = row.adr = row.ea = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  const MetricReport r = compute_report(est, *scan.gt);
  row.fdr = r.fdr;
  row.adr = r.adr;
  row.ea = r.ea;
}

}  // namespace

RefineResult refine_online(const MotionModel& base, const Scan& scan, const std::vector<ImuMount>& mounts,
                           const RefineConfig& cfg) {
  validate(scan);
  if (scan.num_imus() < 2) throw std::invalid_argument("refine_online: needs at least 2 IMU streams");
  if (static_cast<int>(mounts.size()) != scan.num_imus())
    throw std::invalid_argument("refine_online: mount count mismatch");

  RefineResult res;
  res.model = base;  // per-scan copy; the caller's model is never touched
  res.backbone = forward_all(base, scan, mounts);

  Eigen::VectorXd params = base.flatten();
  Eigen::VectorXd last_finite = params;
  AdamState adam(params.size());
  ad::Tape tape;
  std::optional<ModelParamsT<ad::Value>> lifted;

  const double w1 = cfg.weights(0), w2 = cfg.weights(1), w3 = cfg.weights(2);
  auto evaluate = [&](int epoch, const TauSpec& tau, RefineTraceRow& row) -> ad::Value {
    tape.reset();
    lifted = lift(res.model, tape);
    const auto est = forward_all(*lifted, scan, mounts);
    row.iteration = epoch;
    row.loss.weights = cfg.weights;
    ad::Value total(0.0);
    if (w1 != 0.0) {
      const ad::Value l = single_imu_loss(est, scan, mounts, &row.loss.degenerate_components);
      row.loss.single_imu = l.value();
      total += ad::Value(w1) * l;
    }
    if (w2 != 0.0) {
      const ad::Value l = multi_imu_loss(est, &row.loss.degenerate_components);
      row.loss.multi_imu = l.value();
      total += ad::Value(w2) * l;
    }
    if (w3 != 0.0) {
      const ad::Value l = self_consistency_loss(*lifted, scan, mounts, tau, &est);
      row.loss.self_consistency = l.value();
      total += ad::Value(w3) * l;
    }
    row.loss.total = total.value();
    fill_metrics(row, to_double_chain(est.mean), scan);
    return total;
  };

  auto draw_tau = [&](int epoch) {
    Rng rng = derive_rng(cfg.seed, "tau", static_cast<std::uint64_t>(epoch));
    TauSpec tau = sample_tau(scan.steps(), cfg.max_stride, rng);
    tau.seed = cfg.seed;
    return tau;
  };

  res.trace.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    RefineTraceRow row;
    bool finite = true;
    try {
      const ad::Value total = evaluate(epoch, draw_tau(epoch), row);
      res.trace.push_back(row);
      if (!std::isfinite(total.value())) {
        finite = false;
      } else {
        last_finite = params;
        tape.backward(total);
        params = adam_step(params, gather_gradients(*lifted, tape), adam, cfg.lr);
      }
    } catch (const ad::NonFiniteError&) {
      finite = false;
    } catch (const NonFiniteGradient&) {
      finite = false;
    }
    if (!finite) {
      res.aborted_non_finite = true;
      params = last_finite;
      res.model.unflatten(params);
      break;
    }
    res.model.unflatten(params);
  }

  // closing row: the losses and metrics of the final parameters
  {
    RefineTraceRow row;
    const int final_index = static_cast<int>(res.trace.size());
    try {
      evaluate(final_index, draw_tau(final_index), row);
      res.trace.push_back(row);
    } catch (const ad::NonFiniteError&) {
      row.iteration = final_index;
      fill_metrics(row, forward_all(res.model, scan, mounts).mean, scan);
      res.trace.push_back(row);
    }
  }
  res.refined = forward_all(res.model, scan, mounts);
  return res;
}

}  // namespace driftforge
