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

#include "scanba/metrics.hpp"
#include "scanba/sim.hpp"
#include "support/test_helpers.hpp"

using namespace scanba;

namespace {

Trajectory apply_rigid(const Trajectory& traj, const Pose2& a) {
  Trajectory out = traj;
  for (auto& s : out) s.pose = compose(a, s.pose);
  return out;
}

double rmse_at(const Trajectory& est, const Trajectory& gt, double theta, double tx,
               double ty) {
  const Pose2 align{theta, tx, ty};
  double sum = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    sum += (transform_point(align, est[i].pose.translation()) - gt[i].pose.translation())
               .squaredNorm();
  }
  return std::sqrt(sum / est.size());
}

}  // namespace

TEST_CASE("ate is zero for identical and rigidly transformed trajectories") {
  const Trajectory gt = circle_trajectory(25.0, 40);
  CHECK(ate(gt, gt) < 1e-12);
  const Trajectory moved = apply_rigid(gt, Pose2{0.8, 12.0, -7.0});
  CHECK(ate(moved, gt) < 1e-9);
}

TEST_CASE("ate matches a brute-force alignment search") {
  const int n = 100;
  Trajectory gt = line_trajectory(99.0, n);
  Trajectory est = gt;
  est[50].pose.y += 1.0;

  const double got = ate(est, gt);

  // Independent oracle: grid search over the alignment parameters at 1e-3
  // (refined for rotation, whose optimum is tiny on a centered line).
  double best = 1e300;
  for (double theta = -0.005; theta <= 0.005; theta += 1e-4) {
    for (double tx = -0.03; tx <= 0.03; tx += 1e-3) {
      for (double ty = -0.03; ty <= 0.03; ty += 1e-3) {
        best = std::min(best, rmse_at(est, gt, theta, tx, ty));
      }
    }
  }
  CHECK(got <= best + 1e-12);  // closed form cannot be beaten by the grid
  CHECK(std::abs(got - best) < 1e-3);
  // Order of magnitude: one outlier of 1 m among 100 poses.
  CHECK(got == doctest::Approx(0.1 * std::sqrt(1.0 - 1.0 / n)).epsilon(0.05));
}

TEST_CASE("ate rejects bad inputs") {
  const Trajectory gt = line_trajectory(10.0, 5);
  Trajectory shorter(gt.begin(), gt.begin() + 3);
  CHECK_THROWS_AS(ate(shorter, gt), std::invalid_argument);
  CHECK_THROWS_AS(ate(Trajectory{gt[0]}, Trajectory{gt[0]}), std::invalid_argument);
}

TEST_CASE("epe basics") {
  const Trajectory gt = circle_trajectory(30.0, 50);
  CHECK(epe(gt, gt) < 1e-12);

  Trajectory est = gt;
  est.back().pose = compose(est.back().pose, Pose2{0, 2, 0});
  CHECK(epe(est, gt) == doctest::Approx(2.0).epsilon(1e-12));

  // Invariant to a common rigid transform of the estimate.
  const Trajectory moved = apply_rigid(est, Pose2{1.2, -4.0, 9.0});
  CHECK(epe(moved, gt) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("self consistency on an out-and-back corridor") {
  const Trajectory gt = out_and_back_trajectory(210.0, 6.0, 3.0);
  const auto same = self_consistency(gt, gt);
  REQUIRE(same.has_value());
  CHECK(same->translation_m < 1e-12);
  CHECK(same->rotation_deg < 1e-12);
  CHECK(same->pairs > 0);

  // Second pass offset half a meter laterally.
  Trajectory est = gt;
  for (auto& s : est) {
    if (std::abs(s.pose.theta) > 1.0) s.pose.y += 0.5;
  }
  const auto off = self_consistency(est, gt);
  REQUIRE(off.has_value());
  CHECK(off->translation_m == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("self consistency is empty without revisits") {
  const Trajectory line = line_trajectory(500.0, 100);
  CHECK_FALSE(self_consistency(line, line).has_value());
}

TEST_CASE("loc_rpe splits errors in the reference body frame") {
  const Trajectory ref = circle_trajectory(20.0, 30);
  std::vector<std::pair<int, int>> assoc;
  for (int i = 0; i < 30; ++i) assoc.emplace_back(i, i);

  CHECK(loc_rpe(ref, ref, assoc).longitudinal_m < 1e-12);
  CHECK(loc_rpe(ref, ref, assoc).lateral_m < 1e-12);
  CHECK(loc_rpe(ref, ref, assoc).yaw_deg < 1e-12);

  Trajectory loc = ref;
  for (auto& s : loc) s.pose = compose(s.pose, Pose2{0, 0.1, 0});
  const LocRpe rpe = loc_rpe(ref, loc, assoc);
  CHECK(rpe.longitudinal_m == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(rpe.lateral_m < 1e-12);
  CHECK(rpe.yaw_deg < 1e-12);

  CHECK_THROWS_AS(loc_rpe(ref, ref, {}), std::invalid_argument);
}

TEST_CASE("loc_rpe matches a direct RMSE computation of random errors") {
  std::mt19937_64 rng(101);
  std::normal_distribution<double> n01(0.0, 0.05);
  const Trajectory ref = circle_trajectory(20.0, 40);
  Trajectory loc = ref;
  double sx = 0.0, sy = 0.0, sr = 0.0;
  std::vector<std::pair<int, int>> assoc;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const Pose2 err{n01(rng) * 0.02, n01(rng), n01(rng)};
    loc[i].pose = compose(ref[i].pose, err);
    sx += err.x * err.x;
    sy += err.y * err.y;
    sr += err.theta * err.theta * std::pow(180.0 / kPi, 2);
    assoc.emplace_back(static_cast<int>(i), static_cast<int>(i));
  }
  const LocRpe rpe = loc_rpe(ref, loc, assoc);
  CHECK(rpe.longitudinal_m == doctest::Approx(std::sqrt(sx / ref.size())).epsilon(1e-9));
  CHECK(rpe.lateral_m == doctest::Approx(std::sqrt(sy / ref.size())).epsilon(1e-9));
  CHECK(rpe.yaw_deg == doctest::Approx(std::sqrt(sr / ref.size())).epsilon(1e-9));
}

TEST_CASE("epe and self consistency are invariant to a common rigid transform") {
  const Trajectory gt = out_and_back_trajectory(210.0, 6.0, 3.0);
  Trajectory est = gt;
  for (auto& s : est) {
    if (std::abs(s.pose.theta) > 1.0) s.pose.y += 0.25;
  }
  est.back().pose = compose(est.back().pose, Pose2{0, 0.5, 0.5});

  const Pose2 rigid{0.9, 100.0, -50.0};
  const Trajectory est2 = apply_rigid(est, rigid);
  const Trajectory gt2 = apply_rigid(gt, rigid);

  CHECK(epe(est2, gt2) == doctest::Approx(epe(est, gt)).epsilon(1e-9));
  const auto a = self_consistency(est, gt);
  const auto b = self_consistency(est2, gt2);
  REQUIRE(a.has_value());
  REQUIRE(b.has_value());
  CHECK(b->translation_m == doctest::Approx(a->translation_m).epsilon(1e-9));
  CHECK(b->rotation_deg == doctest::Approx(a->rotation_deg).epsilon(1e-6).scale(1.0));
}
