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

#include <random>

#include <benchmark/benchmark.h>

#include "scanba/scan.hpp"
#include "support/test_helpers.hpp"

using namespace scanba;

static void BM_Sample(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const Scan scan = testing::random_smooth_scan(512, 512, 0.1, rng, 30);
  const WeightModel wm;
  const Pose2 pose{0.3, 1.0, -2.0};
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  std::vector<Eigen::Vector2d> points(4096);
  for (auto& p : points) p = {u(rng), u(rng)};

  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample(points[i++ & 4095], pose, scan, wm));
  }
}
BENCHMARK(BM_Sample);

static void BM_SampleJacobian(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const Scan scan = testing::random_smooth_scan(512, 512, 0.1, rng, 30);
  const WeightModel wm;
  const Pose2 pose{0.3, 1.0, -2.0};
  const SampleResult s = sample({2.0, 3.0}, pose, scan, wm);

  for (auto _ : state) {
    benchmark::DoNotOptimize(
        pose_jacobian_from_gradient(s.grad_px, s.sensor_pt, scan.resolution_m));
  }
}
BENCHMARK(BM_SampleJacobian);

BENCHMARK_MAIN();
