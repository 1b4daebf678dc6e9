#include "driftforge/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "driftforge/losses.hpp"

namespace driftforge {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct SweepSpec {
  double total_deg = 0.0;  // about the probe z axis
};

// Arc tactics sweep about z (translation stays along +y), which keeps
// |phi_y| of every IMU orientation clear of the euler singularity for the
// default mounts.
SweepSpec sweep_for(ScanTactic tactic, Rng& rng) {
  const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
  switch (tactic) {
    case ScanTactic::kLinear: return {0.0};
    case ScanTactic::kCurved: return {sign * rng.uniform(25.0, 50.0)};
    case ScanTactic::kLoop: return {sign * 360.0};
    case ScanTactic::kSector: return {sign * rng.uniform(90.0, 140.0)};
  }
  throw std::logic_error("unknown tactic");
}

}  // namespace

PoseChain gen_trajectory(ScanTactic tactic, int n_frames, double length_mm, std::uint64_t seed,
                         const TrajectoryOptions& opt) {
  if (n_frames < 3) throw std::invalid_argument("gen_trajectory: n_frames must be >= 3");
  if (length_mm <= 0.0) throw std::invalid_argument("gen_trajectory: length must be positive");
  if (opt.speed_mod_amp < 0.0 || opt.speed_mod_amp >= 0.95)
    throw std::invalid_argument("gen_trajectory: speed_mod_amp must be in [0, 0.95)");

  Rng rng(seed);
  const int steps = n_frames - 1;
  const double step_len = length_mm / steps;
  const SweepSpec sweep = sweep_for(tactic, rng);
  const double speed_phase = rng.uniform(0.0, kTwoPi);
  const double wobble_cycles = rng.uniform(1.0, 2.5);
  Vec3d wobble_phase;
  for (int a = 0; a < 3; ++a) wobble_phase(a) = rng.uniform(0.0, kTwoPi);

  auto wobble_at = [&](int frame) {
    Vec3d w;
    for (int a = 0; a < 3; ++a)
      w(a) = opt.wobble_amp_deg * std::sin(kTwoPi * wobble_cycles * frame / steps + wobble_phase(a));
    w(1) *= 0.5;  // keep the y axis extra far from gimbal lock
    return w;
  };

  PoseChain chain;
  chain.reserve(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const double lk =
        step_len * (1.0 + opt.speed_mod_amp * std::sin(kTwoPi * opt.speed_mod_cycles * k / steps + speed_phase));
    RelPose p;
    for (int a = 0; a < 3; ++a) p.t(a) = rng.normal(0.0, opt.jitter_scale * step_len);
    p.t(1) += lk;  // probe advances along its elevation axis
    const Vec3d dw = wobble_at(k + 1) - wobble_at(k);
    for (int a = 0; a < 3; ++a) p.phi(a) = dw(a) + rng.normal(0.0, opt.rot_jitter_sd_deg);
    p.phi(2) += sweep.total_deg / steps;
    chain.push_back(p);
  }

  // rescale so the polyline through the frame centers has the requested length
  const auto abs = accumulate_transforms(chain);
  double path = 0.0;
  for (std::size_t i = 1; i < abs.size(); ++i)
    path += (abs[i].topRightCorner<3, 1>() - abs[i - 1].topRightCorner<3, 1>()).norm();
  if (path <= 0.0) throw std::logic_error("gen_trajectory: degenerate path");
  const double scale = length_mm / path;
  for (auto& p : chain) p.t *= scale;
  return chain;
}

std::vector<ImuReading> simulate_imu(const PoseChain& gt, const ImuMount& mount, double dt,
                                     const ImuResolution& res, std::uint64_t seed) {
  if (gt.empty()) throw std::invalid_argument("simulate_imu: ground truth needs at least 2 frames");
  if (dt <= 0.0) throw std::invalid_argument("simulate_imu: dt must be positive");
  if (mount.rotation.t.norm() != 0.0) throw std::invalid_argument("simulate_imu: mount must be a pure rotation");

  Rng rng(seed);
  const auto abs = accumulate_transforms(gt);
  const int n = static_cast<int>(abs.size());
  std::vector<Vec3d> pos(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pos[static_cast<std::size_t>(i)] = abs[static_cast<std::size_t>(i)].topRightCorner<3, 1>();

  // world-frame motion acceleration in g at each reading frame
  std::vector<Vec3d> accel_world(static_cast<std::size_t>(n - 1), Vec3d::Zero());
  for (int k = 1; k + 1 < n; ++k)
    accel_world[static_cast<std::size_t>(k)] =
        (pos[static_cast<std::size_t>(k + 1)] - 2.0 * pos[static_cast<std::size_t>(k)] + pos[static_cast<std::size_t>(k - 1)]) /
        (dt * dt * kGravityMmPerS2);
  if (n >= 3) accel_world[0] = accel_world[1];  // frame 0 has no second difference

  const Mat3d r_mount = rotation_matrix(mount.rotation.phi);
  std::vector<ImuReading> out(static_cast<std::size_t>(n - 1));
  for (int k = 0; k + 1 < n; ++k) {
    const Mat3d r_imu = abs[static_cast<std::size_t>(k)].topLeftCorner<3, 3>() * r_mount;
    ImuReading& r = out[static_cast<std::size_t>(k)];
    Vec3d angle = euler_from_rotation(r_imu);
    for (int a = 0; a < 3; ++a)
      angle(a) = normalize_angle_deg(quantize(normalize_angle_deg(angle(a) + rng.normal(0.0, mount.angle_noise_sd_deg)),
                                              res.angle_deg));
    r.angle_deg = angle;
    const Vec3d accel_imu = r_imu.transpose() * (accel_world[static_cast<std::size_t>(k)] + kGravityWorldG);
    for (int a = 0; a < 3; ++a)
      r.accel_g(a) =
          quantize(accel_imu(a) + mount.accel_bias_g(a) + rng.normal(0.0, mount.accel_noise_sd_g), res.accel_g);
  }
  return out;
}

Eigen::VectorXd synth_observation(const RelPose& gt_step, const ObsOptions& opt, Rng& rng) {
  if (opt.dim < 7) throw std::invalid_argument("synth_observation: dim must be >= 7");
  Eigen::VectorXd o(opt.dim);
  const double rel = rng.normal(0.0, opt.elevation_rel_noise_sd);
  o(0) = gt_step.t(0) + rng.normal(0.0, opt.noise_sd);
  o(1) = gt_step.t(1) * opt.elevation_gain * (1.0 + rel) + rng.normal(0.0, opt.noise_sd);
  o(2) = gt_step.t(2) + rng.normal(0.0, opt.noise_sd);
  for (int a = 0; a < 3; ++a) o(3 + a) = gt_step.phi(a) + rng.normal(0.0, opt.noise_sd);
  for (int i = 6; i < opt.dim; ++i) o(i) = rng.normal();
  return o;
}

std::vector<ImuMount> default_mounts(int count, double angle_noise_sd_deg, double accel_noise_sd_g,
                                     double accel_bias_sd_g, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("default_mounts: count must be >= 1");
  // IMU x axis stays off the probe z axis on every mount, so euler extraction
  // is safe for arc scans sweeping about z
  const std::vector<Vec3d> base = {Vec3d(0, 0, 0), Vec3d(90, 0, 0), Vec3d(0, 0, 90), Vec3d(90, 0, 90)};
  Rng rng(seed);
  std::vector<ImuMount> mounts;
  mounts.reserve(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) {
    ImuMount m;
    if (j < static_cast<int>(base.size())) {
      m.rotation.phi = base[static_cast<std::size_t>(j)];
    } else {
      m.rotation.phi = Vec3d(rng.uniform(-180.0, 180.0), rng.uniform(-10.0, 10.0), rng.uniform(-180.0, 180.0));
    }
    for (int a = 0; a < 3; ++a) m.accel_bias_g(a) = rng.normal(0.0, accel_bias_sd_g);
    m.angle_noise_sd_deg = angle_noise_sd_deg;
    m.accel_noise_sd_g = accel_noise_sd_g;
    mounts.push_back(m);
  }
  return mounts;
}

Scan crop_scan(const Scan& scan, int start_frame, int n_frames) {
  if (start_frame < 0 || n_frames < 3 || start_frame + n_frames > scan.n_frames)
    throw std::invalid_argument("crop_scan: invalid window");
  Scan out;
  out.id = scan.id + "#crop" + std::to_string(start_frame) + "+" + std::to_string(n_frames);
  out.tactic = scan.tactic;
  out.dt = scan.dt;
  out.n_frames = n_frames;
  const int steps = n_frames - 1;
  out.obs.assign(scan.obs.begin() + start_frame, scan.obs.begin() + start_frame + steps);
  out.imu.resize(scan.imu.size());
  for (std::size_t j = 0; j < scan.imu.size(); ++j)
    out.imu[j].assign(scan.imu[j].begin() + start_frame, scan.imu[j].begin() + start_frame + steps);
  if (scan.gt) out.gt = PoseChain(scan.gt->begin() + start_frame, scan.gt->begin() + start_frame + steps);
  return out;
}

void validate(const DatasetConfig& cfg) {
  if (cfg.subjects < 1 || cfg.scans_per_subject < 1) throw std::invalid_argument("dataset: counts must be positive");
  if (cfg.tactics.empty()) throw std::invalid_argument("dataset: empty tactic list");
  if (cfg.n_frames < 3) throw std::invalid_argument("dataset: n_frames must be >= 3");
  if (cfg.num_imus < 1) throw std::invalid_argument("dataset: needs at least one IMU");
  if (cfg.obs.dim < 7) throw std::invalid_argument("dataset: observation dim must be >= 7");
  if (cfg.dt <= 0.0) throw std::invalid_argument("dataset: dt must be positive");
  if (!cfg.preset.empty() && cfg.preset != "arm" && cfg.preset != "carotid")
    throw std::invalid_argument("dataset: unknown preset " + cfg.preset);
  if (cfg.train_subjects + cfg.val_subjects + cfg.test_subjects != cfg.subjects)
    throw std::invalid_argument("dataset: split does not sum to subject count");
  if (cfg.length_jitter_frac < 0.0 || cfg.length_jitter_frac >= 0.5)
    throw std::invalid_argument("dataset: length_jitter_frac out of range");
}

double preset_length_mm(const DatasetConfig& cfg) {
  if (cfg.preset == "arm") return kArmPresetLengthMm;
  if (cfg.preset == "carotid") return kCarotidPresetLengthMm;
  return cfg.length_mm;
}

namespace {

std::string subject_name(int s) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%02d", s);
  return buf;
}

Scan augment_scan(const Scan& base, Rng& rng, int aug_index) {
  const int n = base.n_frames;
  TauSpec tau;
  tau.stride = 1 + static_cast<int>(rng.below(2));  // 1 or 2
  tau.flip = rng.bernoulli(0.5);

  // crop to at least half the frames, and keep 12+ frames after striding
  int min_frames = std::max(12 * tau.stride + 1, n / 2);
  if (min_frames > n) {
    tau.stride = 1;
    min_frames = std::max(12, n / 2);
  }
  const int span = std::max(0, n - min_frames);
  const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(span / 2 + 1)));
  const int drop_tail = static_cast<int>(rng.below(static_cast<std::uint64_t>(span / 2 + 1)));
  const int kept = std::max(min_frames, n - start - drop_tail);
  Scan out = crop_scan(base, start, kept);
  if (tau.stride != 1 || tau.flip) out = apply_tau_to_scan(out, tau);
  out.id = base.id + "#aug" + std::to_string(aug_index);
  return out;
}

}  // namespace

Dataset make_dataset(const DatasetConfig& cfg) {
  validate(cfg);
  Dataset ds;
  ds.mounts = default_mounts(cfg.num_imus, cfg.angle_noise_sd_deg, cfg.accel_noise_sd_g, cfg.accel_bias_sd_g,
                             hash_combine(cfg.seed, fnv1a64("mounts")));

  // subject-level split: shuffle subject indices, then cut
  std::vector<int> order(static_cast<std::size_t>(cfg.subjects));
  for (int s = 0; s < cfg.subjects; ++s) order[static_cast<std::size_t>(s)] = s;
  Rng split_rng = derive_rng(cfg.seed, "split");
  for (int i = cfg.subjects - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)], order[split_rng.below(static_cast<std::uint64_t>(i + 1))]);

  auto split_of = [&](int subject) {
    for (int i = 0; i < cfg.subjects; ++i) {
      if (order[static_cast<std::size_t>(i)] != subject) continue;
      if (i < cfg.train_subjects) return 0;
      if (i < cfg.train_subjects + cfg.val_subjects) return 1;
      return 2;
    }
    throw std::logic_error("subject not in split order");
  };

  const double base_len = preset_length_mm(cfg);
  const ImuResolution res;
  for (int s = 0; s < cfg.subjects; ++s) {
    Rng subj_rng = derive_rng(cfg.seed, "subject", static_cast<std::uint64_t>(s));
    TrajectoryOptions opt = cfg.traj;
    const double v = cfg.subject_variation;
    opt.speed_mod_amp *= subj_rng.uniform(1.0 - v, 1.0 + v);
    opt.speed_mod_cycles = std::max(3.0, opt.speed_mod_cycles * subj_rng.uniform(1.0 - v, 1.0 + v));
    opt.jitter_scale *= subj_rng.uniform(1.0 - v, 1.0 + v);
    opt.wobble_amp_deg *= subj_rng.uniform(1.0 - v, 1.0 + v);

    for (int q = 0; q < cfg.scans_per_subject; ++q) {
      const ScanTactic tactic = cfg.tactics[static_cast<std::size_t>((s + q) % static_cast<int>(cfg.tactics.size()))];
      const std::uint64_t scan_seed =
          hash_combine(derive_rng(cfg.seed, "scan", static_cast<std::uint64_t>(s) * 1000 + static_cast<std::uint64_t>(q)).bits(), 0);
      Rng scan_rng(scan_seed);
      const double length = base_len * (1.0 + scan_rng.uniform(-cfg.length_jitter_frac, cfg.length_jitter_frac));

      Scan scan;
      scan.id = subject_name(s) + "_q" + std::to_string(q) + "_" + to_string(tactic);
      scan.tactic = tactic;
      scan.dt = cfg.dt;
      scan.n_frames = cfg.n_frames;
      scan.gt = gen_trajectory(tactic, cfg.n_frames, length, scan_rng.bits(), opt);
      Rng obs_rng(scan_rng.bits());
      scan.obs.reserve(scan.gt->size());
      for (const auto& step : *scan.gt) scan.obs.push_back(synth_observation(step, cfg.obs, obs_rng));
      scan.imu.reserve(ds.mounts.size());
      for (std::size_t j = 0; j < ds.mounts.size(); ++j)
        scan.imu.push_back(simulate_imu(*scan.gt, ds.mounts[j], cfg.dt, res, scan_rng.bits()));
      validate(scan);

      const int split = split_of(s);
      ds.subject_of[scan.id] = subject_name(s);
      const int n_aug = split == 0 ? cfg.train_aug_per_scan : (split == 2 ? cfg.test_aug_per_scan : 0);
      std::vector<Scan> group;
      group.push_back(std::move(scan));
      Rng aug_rng = derive_rng(scan_seed, "aug");
      for (int a = 0; a < n_aug; ++a) {
        Scan augmented = augment_scan(group.front(), aug_rng, a);
        ds.subject_of[augmented.id] = subject_name(s);
        group.push_back(std::move(augmented));
      }
      auto& bucket = split == 0 ? ds.train : (split == 1 ? ds.val : ds.test);
      for (auto& g : group) bucket.push_back(std::move(g));
    }
  }
  return ds;
}

}  // namespace driftforge
