#include <doctest.h>

#include "driftforge/pose.hpp"
#include "driftforge/rng.hpp"
#include "oracles.hpp"

using namespace driftforge;

TEST_CASE("angle normalization wraps into (-180, 180]") {
  CHECK(normalize_angle_deg(0.0) == 0.0);
  CHECK(normalize_angle_deg(180.0) == 180.0);
  CHECK(normalize_angle_deg(-180.0) == 180.0);
  CHECK(normalize_angle_deg(190.0) == doctest::Approx(-170.0));
  CHECK(normalize_angle_deg(540.0) == doctest::Approx(180.0));
  CHECK(normalize_angle_deg(-350.0) == doctest::Approx(10.0));
}

TEST_CASE("to_matrix: identity and axis rotation") {
  CHECK(oracle::max_abs_diff(to_matrix(RelPose{}), Mat4d::Identity()) == 0.0);

  RelPose yaw90;
  yaw90.phi = Vec3d(0, 0, 90);
  const Mat4d m = to_matrix(yaw90);
  // rotation by 90 deg about z maps the x axis onto the y axis
  const Vec3d image = m.topLeftCorner<3, 3>() * Vec3d::UnitX();
  CHECK((image - Vec3d::UnitY()).norm() < 1e-12);
}

TEST_CASE("to_matrix matches the axis-product oracle and stays orthonormal") {
  RelPose p;
  p.t = Vec3d(1, 2, 3);
  p.phi = Vec3d(10, 20, 30);
  CHECK(oracle::max_abs_diff(to_matrix(p), oracle::transform(p)) < 1e-12);

  Rng rng(42);
  for (int i = 0; i < 200; ++i) {
    const RelPose q = oracle::random_pose(rng);
    const Mat4d m = to_matrix(q);
    const Mat3d r = m.topLeftCorner<3, 3>();
    CHECK((r * r.transpose() - Mat3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((m.topRightCorner<3, 1>() - q.t).norm() == 0.0);
  }
}

TEST_CASE("from_matrix inverts to_matrix away from gimbal lock") {
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    const RelPose p = oracle::random_pose(rng, 5.0, 80.0);
    const RelPose q = from_matrix(to_matrix(p));
    for (int c = 0; c < 3; ++c) {
      CHECK(q.t(c) == doctest::Approx(p.t(c)).epsilon(1e-9));
      CHECK(q.phi(c) == doctest::Approx(p.phi(c)).epsilon(1e-9));
    }
  }
}

TEST_CASE("from_matrix flags gimbal lock") {
  RelPose locked;
  locked.phi = Vec3d(0, 90, 0);
  CHECK_THROWS_AS(from_matrix(to_matrix(locked)), GimbalLockError);
}

TEST_CASE("compose: trivial cases") {
  RelPose p;
  p.t = Vec3d(1, 2, 3);
  p.phi = Vec3d(10, -20, 30);
  const RelPose q = compose(p, RelPose{});
  CHECK((q.t - p.t).norm() < 1e-12);
  CHECK((q.phi - p.phi).norm() < 1e-12);

  RelPose step;
  step.t = Vec3d(1, 0, 0);
  const RelPose two = compose(step, step);
  CHECK((two.t - Vec3d(2, 0, 0)).norm() < 1e-12);
  CHECK(two.phi.norm() == 0.0);
}

TEST_CASE("compose matches the matrix-product oracle on 1000 random pairs") {
  Rng rng(123);
  for (int i = 0; i < 1000; ++i) {
    const RelPose a = oracle::random_pose(rng);
    const RelPose b = oracle::random_pose(rng);
    const Mat4d expect = oracle::transform(a) * oracle::transform(b);
    CHECK(oracle::max_abs_diff(to_matrix(compose(a, b)), expect) < 1e-9);
  }
}

TEST_CASE("invert: trivial and oracle cases") {
  const RelPose id_inv = invert(RelPose{});
  CHECK(id_inv.t.norm() == 0.0);
  CHECK(id_inv.phi.norm() == 0.0);

  RelPose shift;
  shift.t = Vec3d(1, 2, 3);
  CHECK((invert(shift).t - Vec3d(-1, -2, -3)).norm() < 1e-12);

  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    const RelPose p = oracle::random_pose(rng);
    CHECK(oracle::max_abs_diff(to_matrix(invert(p)), oracle::transform(p).inverse()) < 1e-9);
    CHECK(oracle::max_abs_diff(to_matrix(compose(p, invert(p))), Mat4d::Identity()) < 1e-9);
  }
}

TEST_CASE("translation_of_inverse") {
  RelPose shift;
  shift.t = Vec3d(1, 0, 0);
  CHECK((translation_of_inverse(shift) - Vec3d(-1, 0, 0)).norm() < 1e-12);
  CHECK(translation_of_inverse(RelPose{}).norm() == 0.0);

  RelPose p;
  p.t = Vec3d(1, 0, 0);
  p.phi = Vec3d(0, 0, 90);
  const Vec3d expect = oracle::transform(p).inverse().topRightCorner<3, 1>();
  CHECK((translation_of_inverse(p) - expect).norm() < 1e-12);

  // -R^T t plus the R^T-rotated translation cancels exactly
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const RelPose q = oracle::random_pose(rng);
    const Vec3d residual = translation_of_inverse(q) + rotation_matrix(q.phi).transpose() * q.t;
    CHECK(residual.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("accumulate: trivial chains") {
  const PoseChain ids(3);
  const auto abs_ids = accumulate(ids);
  REQUIRE(abs_ids.size() == 4);
  for (const auto& p : abs_ids) {
    CHECK(p.t.norm() == 0.0);
    CHECK(p.phi.norm() == 0.0);
  }

  RelPose step;
  step.t = Vec3d(1, 0, 0);
  const auto abs_steps = accumulate(PoseChain(3, step));
  for (int i = 0; i < 4; ++i) CHECK(abs_steps[static_cast<std::size_t>(i)].t(0) == doctest::Approx(i));

  CHECK_THROWS_AS(accumulate(PoseChain{}), std::invalid_argument);
}

TEST_CASE("accumulate matches the matrix oracle and differencing recovers the chain") {
  Rng rng(77);
  PoseChain chain;
  for (int i = 0; i < 20; ++i) chain.push_back(oracle::random_pose(rng, 3.0, 20.0));

  const auto abs = accumulate(chain);
  Mat4d m = Mat4d::Identity();
  for (std::size_t i = 0; i < chain.size(); ++i) {
    m = m * oracle::transform(chain[i]);
    CHECK(oracle::max_abs_diff(to_matrix(abs[i + 1]), m) < 1e-9);
  }
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const RelPose rec = compose(invert(abs[i]), abs[i + 1]);
    CHECK((rec.t - chain[i].t).norm() < 1e-9);
    CHECK((rec.phi - chain[i].phi).norm() < 1e-9);
  }
}

TEST_CASE("compose is associative at matrix level") {
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    const RelPose a = oracle::random_pose(rng, 2.0, 30.0);
    const RelPose b = oracle::random_pose(rng, 2.0, 30.0);
    const RelPose c = oracle::random_pose(rng, 2.0, 30.0);
    const Mat4d left = to_matrix(compose(compose(a, b), c));
    const Mat4d right = to_matrix(compose(a, compose(b, c)));
    CHECK(oracle::max_abs_diff(left, right) < 1e-9);
  }
}

TEST_CASE("invert is an involution") {
  Rng rng(13);
  for (int i = 0; i < 300; ++i) {
    const RelPose p = oracle::random_pose(rng);
    const RelPose q = invert(invert(p));
    CHECK((q.t - p.t).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((q.phi - p.phi).cwiseAbs().maxCoeff() < 1e-9);
  }
}
