#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>

namespace driftforge {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;

  explicit AdamState(Eigen::Index n) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

struct NonFiniteGradient : std::runtime_error {
  explicit NonFiniteGradient(Eigen::Index i, double g)
      : std::runtime_error("non-finite gradient at parameter " + std::to_string(i) + ": " + std::to_string(g)) {}
};

// One bias-corrected Adam update. The state is advanced; params are returned
// untouched on a rejected (non-finite) gradient.
inline Eigen::VectorXd adam_step(const Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state,
                                 double lr, const AdamConfig& cfg = {}) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: size mismatch");
  for (Eigen::Index i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads(i))) throw NonFiniteGradient(i, grads(i));

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  Eigen::VectorXd out(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    state.m(i) = cfg.beta1 * state.m(i) + (1.0 - cfg.beta1) * grads(i);
    state.v(i) = cfg.beta2 * state.v(i) + (1.0 - cfg.beta2) * grads(i) * grads(i);
    const double mhat = state.m(i) / bc1;
    const double vhat = state.v(i) / bc2;
    out(i) = params(i) - lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
  return out;
}

enum class Phase { kTrain, kOnline };

constexpr double kTrainLrInit = 2e-4;
constexpr int kTrainLrHalfLife = 30;  // epochs per halving
constexpr double kOnlineLr = 2e-6;

inline double lr_schedule(Phase phase, int epoch) {
  if (epoch < 0) throw std::invalid_argument("lr_schedule: negative epoch");
  if (phase == Phase::kOnline) return kOnlineLr;
  return kTrainLrInit * std::pow(0.5, epoch / kTrainLrHalfLife);
}

}  // namespace driftforge
