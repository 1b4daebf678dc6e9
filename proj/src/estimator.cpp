#include "driftforge/estimator.hpp"

#include <cmath>
#include <stdexcept>

#include "driftforge/losses.hpp"
#include "driftforge/optim.hpp"
#include "driftforge/rng.hpp"

namespace driftforge {

MotionModel MotionModel::init(int obs_dim, int hidden, std::uint64_t seed) {
  if (hidden < 4) throw std::invalid_argument("MotionModel: hidden size must be >= 4");
  MotionModel m;
  m.obs_dim = obs_dim;
  m.hidden = hidden;
  m.w_in.resize(hidden, m.input_dim());
  m.w_h.resize(hidden, hidden);
  m.b_h = Eigen::VectorXd::Zero(hidden);
  m.w_out.resize(6, hidden);
  m.b_out = Eigen::VectorXd::Zero(6);

  Rng rng(seed);
  auto fill = [&](Eigen::MatrixXd& w, int fan_in) {
    const double bound = std::sqrt(1.0 / fan_in);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
  };
  fill(m.w_in, m.input_dim());
  fill(m.w_h, hidden);
  fill(m.w_out, hidden);
  return m;
}

Eigen::VectorXd MotionModel::flatten() const {
  Eigen::VectorXd flat(num_params());
  Eigen::Index i = 0;
  auto p = as_params(*this);
  detail::visit_params(p, [&](double v) { flat(i++) = v; });
  return flat;
}

void MotionModel::unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() != num_params()) throw std::invalid_argument("unflatten: size mismatch");
  Eigen::Index i = 0;
  ModelParamsT<double> p = as_params(*this);
  detail::visit_params(p, [&](double& v) { v = flat(i++); });
  w_in = p.w_in;
  w_h = p.w_h;
  b_h = p.b_h;
  w_out = p.w_out;
  b_out = p.b_out;
}

TrainResult train(const MotionModel& init, const std::vector<Scan>& dataset, const std::vector<ImuMount>& mounts,
                  const TrainConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  for (const auto& s : dataset)
    if (!s.gt) throw std::invalid_argument("train: scan " + s.id + " has no ground truth");

  TrainResult result;
  result.model = init;
  Eigen::VectorXd params = init.flatten();
  AdamState adam(params.size());
  ad::Tape tape;

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  result.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      Rng rng = derive_rng(cfg.seed, "epoch-order", static_cast<std::uint64_t>(epoch));
      for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    }
    const double lr = cfg.lr_scale * lr_schedule(Phase::kTrain, epoch);
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const Scan& scan = dataset[idx];
      tape.reset();
      const auto lifted = lift(result.model, tape);
      const auto est = forward_all(lifted, scan, mounts);
      const ad::Value loss = supervised_loss(est.mean, *scan.gt);
      if (!std::isfinite(loss.value()))
        throw std::runtime_error("train: non-finite loss on scan " + scan.id);
      loss_sum += loss.value();
      tape.backward(loss);
      params = adam_step(params, gather_gradients(lifted, tape), adam, lr);
      result.model.unflatten(params);
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(dataset.size()));
  }
  return result;
}

}  // namespace driftforge
