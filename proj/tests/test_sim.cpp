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

#include "scanba/mapgrid.hpp"
#include "scanba/sim.hpp"
#include "support/ba_fixtures.hpp"

using namespace scanba;
using scanba::testing::blob_world;

TEST_CASE("worlds are deterministic per seed") {
  const WorldSpec spec = structured_world_spec(80.0, 80.0);
  const SyntheticWorld a = generate_world(spec, 7);
  const SyntheticWorld b = generate_world(spec, 7);
  const SyntheticWorld c = generate_world(spec, 8);
  CHECK(a.truth_map.intensity == b.truth_map.intensity);
  CHECK(a.truth_map.intensity != c.truth_map.intensity);
}

TEST_CASE("noise-free render of a constant map is constant") {
  SyntheticWorld world;
  world.truth_map.resolution_m = 0.5;
  world.truth_map.cols = 201;
  world.truth_map.rows = 201;
  world.truth_map.origin_m = {-50.0, -50.0};
  world.truth_map.intensity.assign(world.truth_map.size(), 0.37);
  world.truth_map.weight_sum.assign(world.truth_map.size(), 1.0);
  world.truth_map.count.assign(world.truth_map.size(), 1);

  const Scan scan = render_scan(world, Pose2{0.4, 3.0, -2.0}, 32, 32, 0.5, {}, 1);
  for (float p : scan.pixels) CHECK(p == doctest::Approx(0.37).epsilon(1e-6));
}

TEST_CASE("render then sample reproduces truth at cell centers") {
  const SyntheticWorld world = blob_world(40.0, 91);
  // Pixel grid aligned with the 0.25 m truth lattice at the identity pose.
  const Scan scan = render_scan(world, Pose2::identity(), 65, 65, 0.25, {}, 1);
  const WeightModel wm;
  int checked = 0;
  for (double x = -5.0; x <= 5.0; x += 0.25) {
    for (double y = -5.0; y <= 5.0; y += 0.25) {
      const Eigen::Vector2d m{x, y};
      const SampleResult s = sample(m, Pose2::identity(), scan, wm);
      REQUIRE(s.valid);
      CHECK(s.intensity == doctest::Approx(sample_world_bilinear(world.truth_map, m))
                               .epsilon(1e-6));
      ++checked;
    }
  }
  CHECK(checked == 41 * 41);
}

TEST_CASE("render with noise stays within bounds and tracks truth") {
  const SyntheticWorld world = blob_world(40.0, 92);
  RenderOptions opts;
  opts.noise_sigma = 0.05;
  const Scan scan = render_scan(world, Pose2::identity(), 64, 64, 0.5, opts, 5);
  double err2 = 0.0;
  for (int v = 0; v < scan.height; ++v) {
    for (int u = 0; u < scan.width; ++u) {
      CHECK(scan.at(v, u) >= 0.0f);
      CHECK(scan.at(v, u) <= 1.0f);
      const Eigen::Vector2d m = pixel_to_world({double(u), double(v)}, Pose2::identity(), scan);
      const double d = scan.at(v, u) - sample_world_bilinear(world.truth_map, m);
      err2 += d * d;
    }
  }
  const double rmse = std::sqrt(err2 / scan.pixels.size());
  CHECK(rmse > 0.02);  // noise is present
  CHECK(rmse < 0.08);  // but not wildly off (clipping shrinks it slightly)
}

TEST_CASE("occlusion zeroes returns beyond the first strong hit") {
  // A bright ring at radius 8 m; everything farther out along any ray is dark.
  SyntheticWorld world;
  world.truth_map.resolution_m = 0.25;
  world.truth_map.cols = 161;
  world.truth_map.rows = 161;
  world.truth_map.origin_m = {-20.0, -20.0};
  world.truth_map.intensity.assign(world.truth_map.size(), 0.0);
  world.truth_map.weight_sum.assign(world.truth_map.size(), 1.0);
  world.truth_map.count.assign(world.truth_map.size(), 1);
  for (int row = 0; row < world.truth_map.rows; ++row) {
    for (int col = 0; col < world.truth_map.cols; ++col) {
      const double r = world.truth_map.cell_center(col, row).norm();
      if (std::abs(r - 8.0) <= 0.5) {
        world.truth_map.intensity[world.truth_map.index(col, row)] = 1.0;
      }
    }
  }

  RenderOptions opts;
  opts.occlusion = true;
  const Scan scan = render_scan(world, Pose2::identity(), 81, 81, 0.5, opts, 3);
  int beyond = 0;
  for (int v = 0; v < scan.height; ++v) {
    for (int u = 0; u < scan.width; ++u) {
      const double r = std::hypot(u - 40.0, v - 40.0) * scan.resolution_m;
      if (r > 10.0) {
        CHECK(scan.at(v, u) == 0.0f);
        ++beyond;
      }
    }
  }
  CHECK(beyond > 500);
}

TEST_CASE("trajectory perturbation respects the gauge and its bounds") {
  const Trajectory gt = circle_trajectory(30.0, 50);
  const Trajectory zero = perturb_trajectory(gt, 0.0, 0.0, 5);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    CHECK(zero[i].pose.x == gt[i].pose.x);
    CHECK(zero[i].pose.y == gt[i].pose.y);
    CHECK(zero[i].pose.theta == gt[i].pose.theta);
  }

  const Trajectory p = perturb_trajectory(gt, 2.0, 5.0, 6);
  CHECK(p[0].pose.x == gt[0].pose.x);
  CHECK(p[0].pose.theta == gt[0].pose.theta);
  const Trajectory q = perturb_trajectory(gt, 2.0, 5.0, 6);
  for (std::size_t i = 0; i < gt.size(); ++i) CHECK(p[i].pose.x == q[i].pose.x);

  double max_dx = 0.0, max_dr = 0.0;
  Trajectory big = gt;
  for (int k = 0; k < 200; ++k) {  // 200 draws x 49 poses ~ 10^4 samples
    big = perturb_trajectory(gt, 1.0, 2.0, 1000 + k);
    for (std::size_t i = 1; i < gt.size(); ++i) {
      max_dx = std::max(max_dx, std::abs(big[i].pose.x - gt[i].pose.x));
      max_dr = std::max(max_dr, std::abs(wrap_angle(big[i].pose.theta - gt[i].pose.theta)));
    }
  }
  CHECK(max_dx > 0.999);
  CHECK(max_dx <= 1.0);
  CHECK(max_dr > 0.999 * 2.0 * kPi / 180.0);
  CHECK(max_dr <= 2.0 * kPi / 180.0 + 1e-12);
}

TEST_CASE("map build from rendered scans reproduces truth within the noise floor") {
  const SyntheticWorld world = blob_world(60.0, 93, 60);
  const double noise = 0.05;
  Trajectory poses;
  for (int n = 0; n < 9; ++n) {
    poses.push_back({double(n), Pose2{0.0, (n % 3) * 2.0 - 2.0, (n / 3) * 2.0 - 2.0}});
  }
  std::vector<Scan> scans;
  RenderOptions opts;
  opts.noise_sigma = noise;
  for (std::size_t n = 0; n < poses.size(); ++n) {
    scans.push_back(render_scan(world, poses[n].pose, 81, 81, 0.25, opts,
                                scanba::testing::mix(93, n)));
  }
  GridMap grid = bounds_from_trajectory(poses, scans[0].footprint_radius_m(), 0.25);
  build_map(scans, poses, WeightModel{}, {}, grid);

  double err2 = 0.0;
  int cells = 0;
  for (int row = 0; row < grid.rows; ++row) {
    for (int col = 0; col < grid.cols; ++col) {
      const std::size_t i = grid.index(col, row);
      if (grid.count[i] < 4) continue;
      const double truth = sample_world_bilinear(world.truth_map, grid.cell_center(col, row));
      err2 += (grid.intensity[i] - truth) * (grid.intensity[i] - truth);
      ++cells;
    }
  }
  REQUIRE(cells > 1000);
  const double rmse = std::sqrt(err2 / cells);
  CHECK(rmse < 2.0 * noise / 2.0);  // at least 4 samples per checked cell
}

TEST_CASE("sparse corridor scans fall below the occupancy bound") {
  const WorldSpec spec = sparse_corridor_world_spec(200.0, 60.0);
  const SyntheticWorld world = generate_world(spec, 94);
  int sparse = 0, total = 0;
  for (double x = -80.0; x <= 80.0; x += 10.0) {
    const Scan scan = render_scan(world, Pose2{0.0, x, 0.0}, 64, 64, 0.5, {}, 7);
    double occ = 0.0;
    for (float p : scan.pixels) occ += p > 0.5 ? 1.0 : 0.0;
    occ /= scan.pixels.size();
    if (occ < 0.003) ++sparse;
    ++total;
  }
  CHECK(sparse == total);
}
