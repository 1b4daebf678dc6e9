#include <doctest.h>

#include <cmath>

#include "driftforge/estimator.hpp"
#include "driftforge/losses.hpp"
#include "driftforge/simulator.hpp"
#include "oracles.hpp"

using namespace driftforge;

namespace {

DatasetConfig tiny_config(int n_frames = 16, int num_imus = 4) {
  DatasetConfig cfg;
  cfg.subjects = 1;
  cfg.scans_per_subject = 1;
  cfg.train_subjects = 1;
  cfg.val_subjects = 0;
  cfg.test_subjects = 0;
  cfg.n_frames = n_frames;
  cfg.length_mm = static_cast<double>(n_frames - 1);
  cfg.num_imus = num_imus;
  cfg.obs.dim = 8;
  return cfg;
}

struct Fixture {
  Scan scan;
  std::vector<ImuMount> mounts;
};

Fixture make_fixture(int n_frames = 16, int num_imus = 4) {
  const Dataset ds = make_dataset(tiny_config(n_frames, num_imus));
  return {ds.train.front(), ds.mounts};
}

}  // namespace

TEST_CASE("zero weights output the bias everywhere") {
  MotionModel m = MotionModel::init(8, 6, 1);
  m.w_in.setZero();
  m.w_h.setZero();
  m.b_h.setZero();
  m.w_out.setZero();
  m.b_out << 1, -2, 3, 0.5, -0.5, 2;

  const Fixture fx = make_fixture();
  const auto est = forward_all(m, fx.scan, fx.mounts);
  for (const auto& stream : est.per_imu)
    for (const auto& step : stream) {
      CHECK((step.t - Vec3d(1, -2, 3)).norm() == 0.0);
      CHECK((step.phi - Vec3d(0.5, -0.5, 2)).norm() == 0.0);
    }
}

TEST_CASE("a single-step sequence produces one output") {
  const MotionModel m = MotionModel::init(8, 6, 2);
  std::vector<Eigen::VectorXd> obs = {Eigen::VectorXd::Zero(8)};
  ImuStepFeatures feat;
  feat.rel_angle_deg = {Vec3d::Zero()};
  feat.accel_probe_g = {Vec3d::Zero()};
  const auto out = forward_sequence(as_params(m), obs, feat);
  CHECK(out.size() == 1);
}

TEST_CASE("forward_sequence rejects length mismatches") {
  const MotionModel m = MotionModel::init(8, 6, 2);
  std::vector<Eigen::VectorXd> obs = {Eigen::VectorXd::Zero(8), Eigen::VectorXd::Zero(8)};
  ImuStepFeatures feat;
  feat.rel_angle_deg = {Vec3d::Zero()};
  feat.accel_probe_g = {Vec3d::Zero()};
  CHECK_THROWS_AS(forward_sequence(as_params(m), obs, feat), std::invalid_argument);
}

TEST_CASE("recurrent weight gradients match finite differences") {
  const Fixture fx = make_fixture(10, 2);
  MotionModel m = MotionModel::init(8, 5, 3);

  auto output_sum = [&](const MotionModel& model) {
    const auto est = forward_all(model, fx.scan, fx.mounts);
    double s = 0.0;
    for (const auto& step : est.mean) s += step.t.sum() + step.phi.sum();
    return s;
  };

  ad::Tape tape;
  const auto lifted = lift(m, tape);
  const auto est = forward_all(lifted, fx.scan, fx.mounts);
  ad::Value sum(0.0);
  for (const auto& step : est.mean)
    for (int c = 0; c < 3; ++c) sum += step.t(c) + step.phi(c);
  tape.backward(sum);
  const Eigen::VectorXd analytic = gather_gradients(lifted, tape);

  // spot-check a handful of recurrent-weight coordinates against central FD
  const Eigen::Index w_in_size = m.w_in.size();
  Rng rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    const Eigen::Index r = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m.w_h.rows())));
    const Eigen::Index c = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m.w_h.cols())));
    const Eigen::Index flat_index = w_in_size + r * m.w_h.cols() + c;
    const double h = 1e-5;
    MotionModel plus = m, minus = m;
    plus.w_h(r, c) += h;
    minus.w_h(r, c) -= h;
    const double fd = (output_sum(plus) - output_sum(minus)) / (2.0 * h);
    CHECK(std::abs(analytic(flat_index) - fd) / std::max(1.0, std::abs(fd)) < 1e-5);
  }
}

TEST_CASE("forward_all trivial stream counts") {
  const Fixture fx1 = make_fixture(12, 1);
  const MotionModel m = MotionModel::init(8, 6, 4);
  const auto est1 = forward_all(m, fx1.scan, fx1.mounts);
  REQUIRE(est1.per_imu.size() == 1);
  for (std::size_t k = 0; k < est1.mean.size(); ++k) {
    CHECK((est1.mean[k].t - est1.per_imu[0][k].t).norm() == 0.0);
    CHECK((est1.mean[k].phi - est1.per_imu[0][k].phi).norm() == 0.0);
  }

  // duplicated stream: passes identical, mean equals either exactly
  Fixture fx2 = make_fixture(12, 2);
  fx2.scan.imu[1] = fx2.scan.imu[0];
  fx2.mounts[1] = fx2.mounts[0];
  const auto est2 = forward_all(m, fx2.scan, fx2.mounts);
  for (std::size_t k = 0; k < est2.mean.size(); ++k) {
    CHECK((est2.per_imu[0][k].t - est2.per_imu[1][k].t).norm() == 0.0);
    CHECK((est2.mean[k].t - est2.per_imu[0][k].t).norm() == 0.0);
    CHECK((est2.mean[k].phi - est2.per_imu[0][k].phi).norm() == 0.0);
  }
}

TEST_CASE("the M-pass mean equals an independent recomputation") {
  const Fixture fx = make_fixture(14, 4);
  const MotionModel m = MotionModel::init(8, 6, 9);
  const auto est = forward_all(m, fx.scan, fx.mounts);
  for (std::size_t k = 0; k < est.mean.size(); ++k) {
    Vec3d t = Vec3d::Zero(), phi = Vec3d::Zero();
    for (const auto& stream : est.per_imu) {
      t += stream[k].t;
      phi += stream[k].phi;
    }
    t /= 4.0;
    phi /= 4.0;
    CHECK((est.mean[k].t - t).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((est.mean[k].phi - phi).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("forward is deterministic and the mean is permutation-invariant") {
  const Fixture fx = make_fixture(14, 4);
  const MotionModel m = MotionModel::init(8, 6, 10);
  const auto a = forward_all(m, fx.scan, fx.mounts);
  const auto b = forward_all(m, fx.scan, fx.mounts);
  for (std::size_t k = 0; k < a.mean.size(); ++k) {
    CHECK(a.mean[k].t == b.mean[k].t);
    CHECK(a.mean[k].phi == b.mean[k].phi);
  }

  Fixture permuted = fx;
  std::swap(permuted.scan.imu[0], permuted.scan.imu[3]);
  std::swap(permuted.scan.imu[1], permuted.scan.imu[2]);
  std::swap(permuted.mounts[0], permuted.mounts[3]);
  std::swap(permuted.mounts[1], permuted.mounts[2]);
  const auto c = forward_all(m, permuted.scan, permuted.mounts);
  for (std::size_t k = 0; k < a.mean.size(); ++k) {
    CHECK(a.mean[k].t == c.mean[k].t);
    CHECK(a.mean[k].phi == c.mean[k].phi);
    CHECK((a.per_imu[0][k].t - c.per_imu[3][k].t).norm() == 0.0);
    CHECK((a.per_imu[1][k].t - c.per_imu[2][k].t).norm() == 0.0);
  }
}

TEST_CASE("training with zero learning rate leaves parameters unchanged") {
  const Dataset ds = make_dataset(tiny_config(12, 2));
  const MotionModel init = MotionModel::init(8, 6, 4);
  TrainConfig tc;
  tc.epochs = 3;
  tc.lr_scale = 0.0;
  const TrainResult r = train(init, ds.train, ds.mounts, tc);
  CHECK((r.model.flatten() - init.flatten()).norm() == 0.0);
}

TEST_CASE("the first reported loss equals a direct evaluation at init") {
  const Dataset ds = make_dataset(tiny_config(12, 2));
  const MotionModel init = MotionModel::init(8, 6, 4);
  TrainConfig tc;
  tc.epochs = 1;
  tc.shuffle = false;
  const TrainResult r = train(init, ds.train, ds.mounts, tc);

  const auto est = forward_all(init, ds.train.front(), ds.mounts);
  std::vector<RelPoseT<double>> mean = est.mean;
  const double direct = supervised_loss(mean, *ds.train.front().gt);
  CHECK(r.epoch_loss.front() == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("training on a duplicated stream equals training on the single stream") {
  Dataset single = make_dataset(tiny_config(12, 1));
  Dataset doubled = make_dataset(tiny_config(12, 1));
  Scan& s2 = doubled.train.front();
  s2.imu.push_back(s2.imu.front());
  doubled.mounts.push_back(doubled.mounts.front());

  const MotionModel init = MotionModel::init(8, 6, 4);
  TrainConfig tc;
  tc.epochs = 4;
  tc.shuffle = false;
  const TrainResult a = train(init, single.train, single.mounts, tc);
  const TrainResult b = train(init, doubled.train, doubled.mounts, tc);
  REQUIRE(a.epoch_loss.size() == b.epoch_loss.size());
  // the loss trajectory is exact; parameters may pick up ulp-level noise from
  // the duplicated tape's different gradient accumulation order
  for (std::size_t i = 0; i < a.epoch_loss.size(); ++i) CHECK(a.epoch_loss[i] == b.epoch_loss[i]);
  CHECK((a.model.flatten() - b.model.flatten()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("training aborts on scans without ground truth") {
  Dataset ds = make_dataset(tiny_config(12, 2));
  ds.train.front().gt.reset();
  const MotionModel init = MotionModel::init(8, 6, 4);
  CHECK_THROWS_AS(train(init, ds.train, ds.mounts, TrainConfig{}), std::invalid_argument);
}

TEST_CASE("loss decreases over the first epochs when observations are clean") {
  DatasetConfig cfg = tiny_config(20, 2);
  cfg.subjects = 2;
  cfg.train_subjects = 2;
  cfg.scans_per_subject = 2;
  cfg.obs.noise_sd = 0.0;
  cfg.obs.elevation_gain = 1.0;
  cfg.obs.elevation_rel_noise_sd = 0.0;
  cfg.angle_noise_sd_deg = 0.0;
  cfg.accel_noise_sd_g = 0.0;
  const Dataset ds = make_dataset(cfg);

  const MotionModel init = MotionModel::init(8, 8, 11);
  TrainConfig tc;
  tc.epochs = 20;
  const TrainResult r = train(init, ds.train, ds.mounts, tc);

  // window-5 smoothed curve must decrease
  std::vector<double> smooth;
  for (std::size_t i = 0; i + 5 <= r.epoch_loss.size(); ++i) {
    double acc = 0.0;
    for (std::size_t w = 0; w < 5; ++w) acc += r.epoch_loss[i + w];
    smooth.push_back(acc / 5.0);
  }
  for (std::size_t i = 1; i < smooth.size(); ++i) CHECK(smooth[i] <= smooth[i - 1] * 1.001);
  CHECK(smooth.back() < smooth.front());
}
