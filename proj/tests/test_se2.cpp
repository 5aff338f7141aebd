// Copyright 2026, the scanba authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include <Eigen/Dense>

#include "scanba/se2.hpp"
#include "support/test_helpers.hpp"

using namespace scanba;
using scanba::testing::random_pose;
using scanba::testing::random_twist;

namespace {

Eigen::Matrix3d hat(const Twist2& xi) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  m(0, 1) = -xi.dtheta;
  m(1, 0) = xi.dtheta;
  m(0, 2) = xi.dx;
  m(1, 2) = xi.dy;
  return m;
}

// Independent oracle: Taylor series of the matrix exponential on the 3x3
// homogeneous representation, summed far past machine precision.
Eigen::Matrix3d matrix_exp_series(const Eigen::Matrix3d& a, int terms = 30) {
  Eigen::Matrix3d sum = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d power = Eigen::Matrix3d::Identity();
  double factorial = 1.0;
  for (int k = 1; k <= terms; ++k) {
    power = power * a;
    factorial *= k;
    sum += power / factorial;
  }
  return sum;
}

Eigen::Matrix3d homogeneous(const Pose2& p) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m.topLeftCorner<2, 2>() = p.rotation();
  m(0, 2) = p.x;
  m(1, 2) = p.y;
  return m;
}

bool pose_close(const Pose2& a, const Pose2& b, double tol) {
  return std::abs(wrap_angle(a.theta - b.theta)) <= tol && std::abs(a.x - b.x) <= tol &&
         std::abs(a.y - b.y) <= tol;
}

}  // namespace

TEST_CASE("compose basics") {
  const Pose2 p{0.7, 1.5, -2.0};
  CHECK(pose_close(compose(Pose2::identity(), p), p, 1e-15));
  CHECK(pose_close(compose(p, inverse(p)), Pose2::identity(), 1e-12));

  const Pose2 rot{kPi / 2, 0, 0};
  const Pose2 trans{0, 1, 0};
  const Pose2 got = compose(rot, trans);
  CHECK(got.theta == doctest::Approx(kPi / 2));
  CHECK(got.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(got.y == doctest::Approx(1.0));
}

TEST_CASE("compose is associative") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const Pose2 a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    const Pose2 left = compose(compose(a, b), c);
    const Pose2 right = compose(a, compose(b, c));
    CHECK(pose_close(left, right, 1e-12));
  }
}

TEST_CASE("inverse") {
  CHECK(pose_close(inverse(Pose2::identity()), Pose2::identity(), 0.0));
  CHECK(pose_close(inverse(Pose2{0, 3, -2}), Pose2{0, -3, 2}, 1e-15));
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    const Pose2 p = random_pose(rng);
    CHECK(pose_close(inverse(inverse(p)), p, 1e-12));
  }
}

TEST_CASE("exp closed form") {
  CHECK(pose_close(exp(Twist2{0, 1, 0}), Pose2{0, 1, 0}, 1e-15));
  CHECK(pose_close(exp(Twist2{kPi / 2, 0, 0}), Pose2{kPi / 2, 0, 0}, 1e-15));
}

TEST_CASE("exp matches the series-expansion oracle") {
  const Twist2 xi{0.3, 0.5, -0.2};
  const Eigen::Matrix3d expect = matrix_exp_series(hat(xi));
  const Eigen::Matrix3d got = homogeneous(exp(xi));
  CHECK((expect - got).cwiseAbs().maxCoeff() < 1e-9);

  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const Twist2 t = random_twist(rng);
    const Eigen::Matrix3d e = matrix_exp_series(hat(t), 40);
    CHECK((e - homogeneous(exp(t))).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("exp/log round trip") {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 500; ++i) {
    std::uniform_real_distribution<double> ur(-3.0, 3.0);
    std::uniform_real_distribution<double> ut(-10.0, 10.0);
    const Twist2 xi{ur(rng), ut(rng), ut(rng)};
    const Twist2 back = log(exp(xi));
    CHECK(std::abs(back.dtheta - xi.dtheta) < 1e-10);
    CHECK(std::abs(back.dx - xi.dx) < 1e-10);
    CHECK(std::abs(back.dy - xi.dy) < 1e-10);
  }
  // Small-angle branch.
  const Twist2 tiny{1e-12, 0.5, -0.25};
  const Twist2 back = log(exp(tiny));
  CHECK(std::abs(back.dx - tiny.dx) < 1e-12);
}

TEST_CASE("apply_perturbation") {
  const Pose2 p{1.1, 2.0, 3.0};
  CHECK(pose_close(apply_perturbation(p, Twist2{}), p, 0.0));
  const Twist2 xi{0.4, -0.3, 0.2};
  CHECK(pose_close(apply_perturbation(Pose2::identity(), xi), exp(xi), 1e-15));
}

TEST_CASE("body-frame perturbation commutes with left composition") {
  std::mt19937_64 rng(15);
  for (int i = 0; i < 1000; ++i) {
    const Pose2 a = random_pose(rng), p = random_pose(rng);
    const Twist2 xi = random_twist(rng, 1.0, 1.0);
    const Pose2 lhs = apply_perturbation(compose(a, p), xi);
    const Pose2 rhs = compose(a, apply_perturbation(p, xi));
    CHECK(pose_close(lhs, rhs, 1e-12));
  }
}

TEST_CASE("transform_point") {
  CHECK((transform_point(Pose2::identity(), {3.5, -1.25}) - Eigen::Vector2d{3.5, -1.25}).norm() ==
        0.0);
  CHECK((transform_point(Pose2{kPi, 0, 0}, {1, 0}) - Eigen::Vector2d{-1, 0}).norm() < 1e-15);
  CHECK((transform_point(Pose2{kPi / 2, 1, 1}, {1, 0}) - Eigen::Vector2d{1, 2}).norm() < 1e-15);
}

TEST_CASE("forward perturbation Jacobian matches finite differences") {
  std::mt19937_64 rng(16);
  const double step = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const Pose2 p = random_pose(rng);
    const Eigen::Vector2d pt = {random_pose(rng).x, random_pose(rng).y};

    // Analytic: d/dxi [ (P * exp(xi)) pt ] at xi = 0.
    Eigen::Matrix<double, 2, 3> analytic;
    analytic.col(0) = p.rotation() * Eigen::Vector2d(-pt.y(), pt.x());
    analytic.block<2, 2>(0, 1) = p.rotation();

    for (int k = 0; k < 3; ++k) {
      Eigen::Vector3d delta = Eigen::Vector3d::Zero();
      delta[k] = step;
      const Eigen::Vector2d plus =
          transform_point(apply_perturbation(p, Twist2::from_vec(delta)), pt);
      const Eigen::Vector2d minus =
          transform_point(apply_perturbation(p, Twist2::from_vec(-delta)), pt);
      const Eigen::Vector2d fd = (plus - minus) / (2.0 * step);
      CHECK((fd - analytic.col(k)).norm() <= 1e-5 * std::max(1.0, analytic.col(k).norm()));
    }
  }
}

TEST_CASE("sensor-frame point Jacobian matches finite differences") {
  std::mt19937_64 rng(17);
  const double step = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const Pose2 p = random_pose(rng);
    const Eigen::Vector2d m = {random_pose(rng).x, random_pose(rng).y};
    const Eigen::Vector2d q = transform_point(inverse(p), m);
    const Eigen::Matrix<double, 2, 3> analytic = point_in_sensor_jacobian(q);

    for (int k = 0; k < 3; ++k) {
      Eigen::Vector3d delta = Eigen::Vector3d::Zero();
      delta[k] = step;
      const Eigen::Vector2d plus =
          transform_point(inverse(apply_perturbation(p, Twist2::from_vec(delta))), m);
      const Eigen::Vector2d minus =
          transform_point(inverse(apply_perturbation(p, Twist2::from_vec(-delta))), m);
      const Eigen::Vector2d fd = (plus - minus) / (2.0 * step);
      CHECK((fd - analytic.col(k)).norm() <= 1e-5 * std::max(1.0, analytic.col(k).norm()));
    }
  }
}

TEST_CASE("theta stays normalized") {
  std::mt19937_64 rng(18);
  Pose2 acc = Pose2::identity();
  for (int i = 0; i < 1000; ++i) {
    acc = compose(acc, random_pose(rng));
    CHECK(acc.theta > -kPi);
    CHECK(acc.theta <= kPi);
  }
}
