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

#include "scanba/localizer.hpp"
#include "scanba/sim.hpp"
#include "support/ba_fixtures.hpp"
#include "support/test_helpers.hpp"

using namespace scanba;
using scanba::testing::blob_world;
using scanba::testing::mix;

namespace {

// Map whose cells copy a single identity-pose scan, so the scan itself is an
// exact render of the map and the global optimum sits exactly at identity.
struct AlignedFixture {
  Scan scan;
  GridMap map;
};

AlignedFixture aligned_fixture(std::uint64_t seed) {
  AlignedFixture f;
  const SyntheticWorld world = blob_world(60.0, seed, 60);
  RenderOptions opts;  // noise-free
  f.scan = render_scan(world, Pose2::identity(), 81, 81, 0.5, opts, seed);
  Trajectory poses{{0.0, Pose2::identity()}};
  f.map = bounds_from_trajectory(poses, f.scan.footprint_radius_m(), 0.5);
  build_map({f.scan}, poses, WeightModel{}, {}, f.map);
  return f;
}

// Objective plus a fingerprint of the discrete structure (valid set and
// interpolation cells); central differences are only meaningful when both
// stencil evaluations live on the same smooth piece.
struct Eval {
  double cost = 0.0;
  std::uint64_t fingerprint = 1469598103934665603ull;
  void absorb(std::uint64_t x) {
    fingerprint ^= x;
    fingerprint *= 1099511628211ull;
  }
};

Eval objective(const GridMap& map, const Scan& scan, const Pose2& pose,
               const Pose2& weight_pose, const WeightModel& wm) {
  Eval out;
  for (int row = 0; row < map.rows; ++row) {
    for (int col = 0; col < map.cols; ++col) {
      if (!map.observed(col, row)) continue;
      const Eigen::Vector2d m = map.cell_center(col, row);
      const SampleResult s = sample(m, pose, scan, wm);
      if (!s.valid) continue;
      const Eigen::Vector2d px = world_to_pixel(m, pose, scan);
      out.absorb(map.index(col, row));
      out.absorb(static_cast<std::uint64_t>(std::floor(px.x())) * 7919u +
                 static_cast<std::uint64_t>(std::floor(px.y())));
      const double w = wm.weight(transform_point(inverse(weight_pose), m).norm());
      const double e = map.intensity[map.index(col, row)] - s.intensity;
      out.cost += w * e * e;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("localization is an exact fixed point on an aligned map") {
  const AlignedFixture f = aligned_fixture(81);
  LocalizerState state;
  state.map = &f.map;
  state.pose = Pose2::identity();
  const LocalizeResult res = localize_frame(state, f.scan);
  CHECK(res.status == LocalizeStatus::kConverged);
  CHECK(res.report.iterations <= 2);
  CHECK(std::abs(res.pose.x) < 1e-6);
  CHECK(std::abs(res.pose.y) < 1e-6);
  CHECK(std::abs(res.pose.theta) < 1e-6);
}

TEST_CASE("localization recovers a 2 m / 1 deg offset") {
  const AlignedFixture f = aligned_fixture(82);
  LocalizerState state;
  state.map = &f.map;
  state.pose = Pose2{1.0 * kPi / 180.0, 2.0 / std::sqrt(2.0), -2.0 / std::sqrt(2.0)};
  const LocalizeResult res = localize_frame(state, f.scan);
  CHECK(res.status == LocalizeStatus::kConverged);
  CHECK(std::hypot(res.pose.x, res.pose.y) < 0.01);
  CHECK(std::abs(res.pose.theta) < 0.01 * kPi / 180.0 + 1e-4);
}

TEST_CASE("objective never increases across a frame") {
  const AlignedFixture f = aligned_fixture(83);
  LocalizerState state;
  state.map = &f.map;
  state.pose = Pose2{0.01, 1.2, -0.7};
  const LocalizeResult res = localize_frame(state, f.scan);
  REQUIRE(res.report.costs.size() >= 2);
  for (std::size_t i = 1; i < res.report.costs.size(); ++i) {
    CHECK(res.report.costs[i] <= res.report.costs[i - 1] * (1.0 + 1e-7));  // re-freezing weights wobbles the tail
  }
}

TEST_CASE("the map is read-only during localization") {
  const AlignedFixture f = aligned_fixture(84);
  const GridMap copy = f.map;
  LocalizerState state;
  state.map = &f.map;
  state.pose = Pose2{0.0, 0.5, 0.5};
  localize_frame(state, f.scan);
  CHECK(copy.intensity == f.map.intensity);
  CHECK(copy.weight_sum == f.map.weight_sum);
  CHECK(copy.count == f.map.count);
}

TEST_CASE("too little overlap is reported") {
  const AlignedFixture f = aligned_fixture(85);
  LocalizerState state;
  state.map = &f.map;
  state.pose = Pose2{0.0, 500.0, 500.0};
  const LocalizeResult res = localize_frame(state, f.scan);
  CHECK(res.status == LocalizeStatus::kInsufficientOverlap);
  // The propagated estimate is kept for the caller to continue from.
  CHECK(state.pose.x == 500.0);
}

TEST_CASE("localization gradient matches finite differences") {
  const AlignedFixture f = aligned_fixture(86);
  const WeightModel wm;
  std::mt19937_64 rng(87);
  const double h = 1e-6;
  int tested = 0;
  while (tested < 20) {
    const Pose2 pose = scanba::testing::random_pose(rng, 1.5, 0.05);

    // Analytic gradient of sum w (i_v - itilde)^2 over the observed cells.
    Eigen::Vector3d grad = Eigen::Vector3d::Zero();
    for (int row = 0; row < f.map.rows; ++row) {
      for (int col = 0; col < f.map.cols; ++col) {
        if (!f.map.observed(col, row)) continue;
        const Eigen::Vector2d m = f.map.cell_center(col, row);
        const SampleResult s = sample(m, pose, f.scan, wm);
        if (!s.valid) continue;
        const double e = f.map.intensity[f.map.index(col, row)] - s.intensity;
        grad += 2.0 * s.weight * e *
                (-pose_jacobian_from_gradient(s.grad_px, s.sensor_pt, f.scan.resolution_m));
      }
    }

    Eigen::Vector3d fd;
    bool smooth = true;
    for (int k = 0; k < 3 && smooth; ++k) {
      Eigen::Vector3d d = Eigen::Vector3d::Zero();
      d[k] = h;
      const Eval plus = objective(f.map, f.scan,
                                  apply_perturbation(pose, Twist2::from_vec(d)), pose, wm);
      const Eval minus = objective(f.map, f.scan,
                                   apply_perturbation(pose, Twist2::from_vec(-d)), pose, wm);
      smooth = plus.fingerprint == minus.fingerprint;
      fd[k] = (plus.cost - minus.cost) / (2.0 * h);
    }
    if (!smooth) continue;  // the stencil straddles a pixel-lattice kink
    CHECK((fd - grad).norm() <= 1e-4 * std::max(1.0, grad.norm()));
    ++tested;
  }
}

TEST_CASE("propagate composes body-frame increments") {
  GridMap dummy;
  LocalizerState state;
  state.map = &dummy;
  state.pose = Pose2::identity();

  CHECK(propagate(state, Pose2::identity()).x == 0.0);
  const Pose2 after = propagate(state, Pose2{0, 1, 0});
  CHECK(after.x == doctest::Approx(1.0));
  CHECK(after.y == doctest::Approx(0.0));

  // Chained increments reproduce the composed trajectory exactly.
  std::mt19937_64 rng(88);
  Trajectory gt{{0.0, Pose2{0.3, 5.0, -2.0}}};
  for (int i = 1; i < 20; ++i) {
    gt.push_back({double(i), compose(gt.back().pose, scanba::testing::random_pose(rng, 1.0, 0.3))});
  }
  state.pose = gt[0].pose;
  for (std::size_t i = 1; i < gt.size(); ++i) {
    propagate(state, compose(inverse(gt[i - 1].pose), gt[i].pose));
    CHECK(std::abs(state.pose.x - gt[i].pose.x) < 1e-9);
    CHECK(std::abs(state.pose.y - gt[i].pose.y) < 1e-9);
    CHECK(std::abs(wrap_angle(state.pose.theta - gt[i].pose.theta)) < 1e-9);
  }
}
