#include <doctest.h>

#include <cmath>

#include "driftforge/autodiff.hpp"
#include "driftforge/optim.hpp"
#include "driftforge/pose.hpp"
#include "driftforge/rng.hpp"
#include "oracles.hpp"

using namespace driftforge;
using ad::Tape;
using ad::Value;

TEST_CASE("product rule on x*y") {
  Tape tape;
  const Value x = tape.variable(2.0);
  const Value y = tape.variable(3.0);
  const Value f = x * y;
  CHECK(f.value() == 6.0);
  tape.backward(f);
  CHECK(tape.grad(x) == 3.0);
  CHECK(tape.grad(y) == 2.0);
}

TEST_CASE("tanh at zero has unit slope") {
  Tape tape;
  const Value x = tape.variable(0.0);
  const Value f = tanh(x);
  tape.backward(f);
  CHECK(tape.grad(x) == 1.0);
}

TEST_CASE("every primitive matches central finite differences") {
  struct Case {
    const char* name;
    std::function<Value(const Value&)> f;
    std::function<double(double)> fd;
    double lo, hi;
  };
  const std::vector<Case> cases = {
      {"sin", [](const Value& x) { return sin(x); }, [](double x) { return std::sin(x); }, -3.0, 3.0},
      {"cos", [](const Value& x) { return cos(x); }, [](double x) { return std::cos(x); }, -3.0, 3.0},
      {"tanh", [](const Value& x) { return tanh(x); }, [](double x) { return std::tanh(x); }, -2.0, 2.0},
      {"sqrt", [](const Value& x) { return sqrt(x); }, [](double x) { return std::sqrt(x); }, 0.5, 4.0},
      {"abs", [](const Value& x) { return abs(x); }, [](double x) { return std::abs(x); }, 0.2, 3.0},
      {"asin", [](const Value& x) { return asin(x); }, [](double x) { return std::asin(x); }, -0.8, 0.8},
      {"recip", [](const Value& x) { return Value(1.0) / x; }, [](double x) { return 1.0 / x; }, 0.5, 3.0},
      {"poly", [](const Value& x) { return x * x - Value(3.0) * x + Value(1.0); },
       [](double x) { return x * x - 3.0 * x + 1.0; }, -2.0, 2.0},
  };
  Rng rng(99);
  for (const auto& c : cases) {
    for (int i = 0; i < 25; ++i) {
      const double x0 = rng.uniform(c.lo, c.hi);
      Tape tape;
      const Value x = tape.variable(x0);
      tape.backward(c.f(x));
      const double analytic = tape.grad(x);
      const double fd = oracle::central_diff(c.fd, x0);
      CHECK(std::abs(analytic - fd) / std::max(1.0, std::abs(analytic)) < 1e-5);
    }
  }
}

TEST_CASE("atan2 partials match finite differences") {
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    const double y0 = rng.uniform(-2.0, 2.0);
    const double x0 = rng.uniform(0.5, 2.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    Tape tape;
    const Value y = tape.variable(y0);
    const Value x = tape.variable(x0);
    tape.backward(atan2(y, x));
    const double fd_y = oracle::central_diff([&](double v) { return std::atan2(v, x0); }, y0);
    const double fd_x = oracle::central_diff([&](double v) { return std::atan2(y0, v); }, x0);
    CHECK(std::abs(tape.grad(y) - fd_y) < 1e-7);
    CHECK(std::abs(tape.grad(x) - fd_x) < 1e-7);
  }
}

TEST_CASE("abs subgradient at 0 is 0") {
  Tape tape;
  const Value x = tape.variable(0.0);
  tape.backward(abs(x));
  CHECK(tape.grad(x) == 0.0);
}

TEST_CASE("invalid points raise explicit diagnostics instead of NaNs") {
  Tape tape;
  const Value x = tape.variable(0.0);
  CHECK_THROWS_AS(Value(1.0) / x, ad::NonFiniteError);
  const Value neg = tape.variable(-1.0);
  CHECK_THROWS_AS(sqrt(neg), ad::NonFiniteError);
  const Value big = tape.variable(1.5);
  CHECK_THROWS_AS(asin(big), ad::NonFiniteError);
  const Value zero_a = tape.variable(0.0);
  const Value zero_b = tape.variable(0.0);
  CHECK_THROWS_AS(atan2(zero_a, zero_b), ad::NonFiniteError);
}

TEST_CASE("backward is single-shot until reset") {
  Tape tape;
  const Value x = tape.variable(1.0);
  const Value f = x * x;
  tape.backward(f);
  CHECK_THROWS_AS(tape.backward(f), std::logic_error);
  tape.reset();
  const Value y = tape.variable(2.0);
  const Value g = y * y;
  tape.backward(g);
  CHECK(tape.grad(y) == 4.0);
}

TEST_CASE("constants stay off the tape") {
  Tape tape;
  const Value x = tape.variable(2.0);
  const std::size_t before = tape.num_nodes();
  const Value c = Value(3.0) * Value(4.0);
  CHECK(tape.num_nodes() == before);
  CHECK(!c.on_tape());
  const Value mixed = x * c;
  CHECK(mixed.on_tape());
}

TEST_CASE("Eigen matrix products work on tape scalars") {
  Tape tape;
  Eigen::Matrix<Value, Eigen::Dynamic, Eigen::Dynamic> w(2, 2);
  w(0, 0) = tape.variable(1.0);
  w(0, 1) = tape.variable(2.0);
  w(1, 0) = tape.variable(-1.0);
  w(1, 1) = tape.variable(0.5);
  Eigen::Matrix<Value, Eigen::Dynamic, 1> x(2);
  x(0) = Value(3.0);
  x(1) = Value(4.0);
  const Eigen::Matrix<Value, Eigen::Dynamic, 1> y = w * x;
  CHECK(y(0).value() == doctest::Approx(11.0));
  CHECK(y(1).value() == doctest::Approx(-1.0));
  tape.backward(y(0) + y(1));
  CHECK(tape.grad(w(0, 0)) == 3.0);
  CHECK(tape.grad(w(1, 1)) == 4.0);
}

TEST_CASE("pose algebra differentiates: d(compose)/d(angle) matches FD") {
  const auto compose_entry = [](double phi_z) {
    RelPose a, b;
    a.t = Vec3d(1, 2, 0);
    a.phi = Vec3d(5, 10, phi_z);
    b.t = Vec3d(0.5, 1, -2);
    b.phi = Vec3d(-3, 4, 8);
    return compose(a, b).t(0);
  };
  Tape tape;
  const Value phi_z = tape.variable(20.0);
  RelPoseT<Value> a, b;
  a.t = Vec3<Value>(Value(1.0), Value(2.0), Value(0.0));
  a.phi = Vec3<Value>(Value(5.0), Value(10.0), phi_z);
  b.t = Vec3<Value>(Value(0.5), Value(1.0), Value(-2.0));
  b.phi = Vec3<Value>(Value(-3.0), Value(4.0), Value(8.0));
  tape.backward(compose(a, b).t(0));
  const double fd = oracle::central_diff(compose_entry, 20.0);
  CHECK(std::abs(tape.grad(phi_z) - fd) / std::max(1.0, std::abs(fd)) < 1e-5);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Eigen::VectorXd p(3);
  p << 1.0, -2.0, 0.5;
  AdamState state(3);
  const Eigen::VectorXd q = adam_step(p, Eigen::VectorXd::Zero(3), state, 0.1);
  CHECK((q - p).norm() == 0.0);
}

TEST_CASE("adam first step matches a scratch recomputation") {
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 1.0;
  // scratch recomputation of the bias-corrected update
  const double m = (1 - b1) * g, v = (1 - b2) * g * g;
  const double mhat = m / (1 - b1), vhat = v / (1 - b2);
  const double expected_delta = -lr * mhat / (std::sqrt(vhat) + eps);
  CHECK(expected_delta == doctest::Approx(-0.1).epsilon(1e-6));

  Eigen::VectorXd p(1);
  p << 2.0;
  Eigen::VectorXd grad(1);
  grad << g;
  AdamState state(1);
  const Eigen::VectorXd q = adam_step(p, grad, state, lr);
  CHECK(q(0) == doctest::Approx(2.0 + expected_delta).epsilon(1e-15));
}

TEST_CASE("adam treats identical coordinates identically") {
  Eigen::VectorXd p(2);
  p << 1.5, 1.5;
  Eigen::VectorXd g(2);
  g << 0.3, 0.3;
  AdamState state(2);
  Eigen::VectorXd q = p;
  for (int i = 0; i < 5; ++i) q = adam_step(q, g, state, 0.01);
  CHECK(q(0) == q(1));
}

TEST_CASE("adam rejects non-finite gradients") {
  Eigen::VectorXd p(1), g(1);
  p << 1.0;
  g << std::numeric_limits<double>::quiet_NaN();
  AdamState state(1);
  CHECK_THROWS_AS(adam_step(p, g, state, 0.1), NonFiniteGradient);
}

TEST_CASE("learning-rate schedule") {
  CHECK(lr_schedule(Phase::kTrain, 0) == doctest::Approx(2e-4));
  CHECK(lr_schedule(Phase::kTrain, 29) == doctest::Approx(2e-4));
  CHECK(lr_schedule(Phase::kTrain, 30) == doctest::Approx(1e-4));
  CHECK(lr_schedule(Phase::kTrain, 60) == doctest::Approx(5e-5));
  CHECK(lr_schedule(Phase::kOnline, 0) == doctest::Approx(2e-6));
  CHECK(lr_schedule(Phase::kOnline, 59) == doctest::Approx(2e-6));
  CHECK_THROWS_AS(lr_schedule(Phase::kTrain, -1), std::invalid_argument);
}
