#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "driftforge/autodiff.hpp"
#include "driftforge/pose.hpp"
#include "driftforge/scan.hpp"

namespace driftforge {

// Recurrent motion estimator: per step, concat(observation, relative IMU
// angles, probe-frame acceleration) -> tanh RNN -> 6 transform parameters
// (t_x, t_y, t_z, phi_x, phi_y, phi_z).
struct MotionModel {
  int obs_dim = 16;
  int hidden = 32;
  Eigen::MatrixXd w_in;   // hidden x (obs_dim + 6)
  Eigen::MatrixXd w_h;    // hidden x hidden
  Eigen::VectorXd b_h;    // hidden
  Eigen::MatrixXd w_out;  // 6 x hidden
  Eigen::VectorXd b_out;  // 6

  int input_dim() const { return obs_dim + 6; }
  Eigen::Index num_params() const {
    return w_in.size() + w_h.size() + b_h.size() + w_out.size() + b_out.size();
  }

  static MotionModel init(int obs_dim, int hidden, std::uint64_t seed);
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& flat);
};

template <typename S>
struct ModelParamsT {
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> w_in, w_h, w_out;
  Eigen::Matrix<S, Eigen::Dynamic, 1> b_h, b_out;
};

namespace detail {

// canonical parameter order: w_in, w_h, b_h, w_out, b_out; row-major within
// each block (must agree with flatten/unflatten)
template <typename M, typename F>
void visit_rowmajor(M& m, F&& f) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) f(m(r, c));
}

template <typename P, typename F>
void visit_params(P& p, F&& f) {
  visit_rowmajor(p.w_in, f);
  visit_rowmajor(p.w_h, f);
  visit_rowmajor(p.b_h, f);
  visit_rowmajor(p.w_out, f);
  visit_rowmajor(p.b_out, f);
}

}  // namespace detail

inline ModelParamsT<double> as_params(const MotionModel& m) {
  return ModelParamsT<double>{m.w_in, m.w_h, m.w_out, m.b_h, m.b_out};
}

// Registers every weight as a tape leaf, in flatten() order.
inline ModelParamsT<ad::Value> lift(const MotionModel& m, ad::Tape& tape) {
  ModelParamsT<ad::Value> p;
  p.w_in.resize(m.w_in.rows(), m.w_in.cols());
  p.w_h.resize(m.w_h.rows(), m.w_h.cols());
  p.b_h.resize(m.b_h.size());
  p.w_out.resize(m.w_out.rows(), m.w_out.cols());
  p.b_out.resize(m.b_out.size());
  const Eigen::VectorXd flat = m.flatten();
  Eigen::Index i = 0;
  detail::visit_params(p, [&](ad::Value& v) { v = tape.variable(flat(i++)); });
  return p;
}

// d(loss)/d(weights), in flatten() order; callable after tape.backward().
inline Eigen::VectorXd gather_gradients(const ModelParamsT<ad::Value>& p, const ad::Tape& tape) {
  Eigen::VectorXd g(p.w_in.size() + p.w_h.size() + p.b_h.size() + p.w_out.size() + p.b_out.size());
  Eigen::Index i = 0;
  detail::visit_params(const_cast<ModelParamsT<ad::Value>&>(p),
                       [&](const ad::Value& v) { g(i++) = tape.grad(v); });
  return g;
}

template <typename S>
struct EstimateSetT {
  std::vector<std::vector<RelPoseT<S>>> per_imu;  // M x (N-1)
  std::vector<RelPoseT<S>> mean;                  // N-1
};

using EstimateSet = EstimateSetT<double>;

// Order-independent mean: summands are sorted by value first, so permuting
// the IMU streams reproduces the mean bit for bit.
template <typename S>
S ordered_mean(std::vector<S> vals) {
  std::sort(vals.begin(), vals.end(), [](const S& a, const S& b) { return primal(a) < primal(b); });
  S acc = vals.front();
  for (std::size_t i = 1; i < vals.size(); ++i) acc = acc + vals[i];
  return acc / S(static_cast<double>(vals.size()));
}

template <typename S>
std::vector<RelPoseT<S>> forward_sequence(const ModelParamsT<S>& p, const std::vector<Eigen::VectorXd>& obs,
                                          const ImuStepFeatures& feat) {
  using std::tanh;
  if (obs.size() != feat.rel_angle_deg.size() || obs.size() != feat.accel_probe_g.size())
    throw std::invalid_argument("forward_sequence: observation / IMU feature length mismatch");
  const Eigen::Index hidden = p.b_h.size();
  const Eigen::Index in_dim = p.w_in.cols();

  std::vector<RelPoseT<S>> out;
  out.reserve(obs.size());
  Eigen::Matrix<S, Eigen::Dynamic, 1> h = Eigen::Matrix<S, Eigen::Dynamic, 1>::Zero(hidden);
  Eigen::Matrix<S, Eigen::Dynamic, 1> x(in_dim);
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const auto& o = obs[k];
    if (o.size() + 6 != in_dim) throw std::invalid_argument("forward_sequence: observation dimension mismatch");
    for (Eigen::Index i = 0; i < o.size(); ++i) x(i) = S(o(i));
    for (int i = 0; i < 3; ++i) x(o.size() + i) = S(feat.rel_angle_deg[k](i));
    for (int i = 0; i < 3; ++i) x(o.size() + 3 + i) = S(feat.accel_probe_g[k](i));

    Eigen::Matrix<S, Eigen::Dynamic, 1> pre = p.w_in * x + p.w_h * h + p.b_h;
    for (Eigen::Index i = 0; i < hidden; ++i) h(i) = tanh(pre(i));
    Eigen::Matrix<S, Eigen::Dynamic, 1> y = p.w_out * h + p.b_out;
    RelPoseT<S> step;
    step.t = Vec3<S>(y(0), y(1), y(2));
    step.phi = Vec3<S>(y(3), y(4), y(5));
    out.push_back(std::move(step));
  }
  return out;
}

template <typename S>
EstimateSetT<S> forward_all(const ModelParamsT<S>& p, const Scan& scan, const std::vector<ImuMount>& mounts) {
  if (scan.num_imus() < 1) throw std::invalid_argument("forward_all: scan has no IMU streams");
  if (static_cast<int>(mounts.size()) != scan.num_imus())
    throw std::invalid_argument("forward_all: mount count != IMU count");
  EstimateSetT<S> est;
  est.per_imu.reserve(scan.imu.size());
  for (int j = 0; j < scan.num_imus(); ++j)
    est.per_imu.push_back(forward_sequence(p, scan.obs, make_imu_features(scan, j, mounts[static_cast<std::size_t>(j)])));

  const std::size_t steps = est.per_imu.front().size();
  est.mean.resize(steps);
  std::vector<S> vals(est.per_imu.size());
  for (std::size_t k = 0; k < steps; ++k) {
    for (int c = 0; c < 3; ++c) {
      for (std::size_t j = 0; j < est.per_imu.size(); ++j) vals[j] = est.per_imu[j][k].t(c);
      est.mean[k].t(c) = ordered_mean(vals);
      for (std::size_t j = 0; j < est.per_imu.size(); ++j) vals[j] = est.per_imu[j][k].phi(c);
      est.mean[k].phi(c) = ordered_mean(vals);
    }
  }
  return est;
}

inline EstimateSet forward_all(const MotionModel& m, const Scan& scan, const std::vector<ImuMount>& mounts) {
  return forward_all(as_params(m), scan, mounts);
}

struct TrainConfig {
  int epochs = 200;
  std::uint64_t seed = 0;
  bool shuffle = true;
  double lr_scale = 1.0;  // multiplies the scheduled learning rate
};

struct TrainResult {
  MotionModel model;
  std::vector<double> epoch_loss;  // mean per-scan loss per epoch
};

// Adam on the supervised loss, batch size 1, with the train-phase learning
// rate schedule.
TrainResult train(const MotionModel& init, const std::vector<Scan>& dataset, const std::vector<ImuMount>& mounts,
                  const TrainConfig& cfg);

}  // namespace driftforge
