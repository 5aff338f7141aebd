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

#include <benchmark/benchmark.h>

#include "scanba/mapgrid.hpp"
#include "scanba/sim.hpp"
#include "support/ba_fixtures.hpp"

using namespace scanba;

namespace {

struct MapCase {
  std::vector<Scan> scans;
  Trajectory poses;
};

MapCase make_case(int n_scans) {
  const SyntheticWorld world = testing::blob_world(120.0, 7, 120);
  MapCase out;
  RenderOptions opts;
  opts.noise_sigma = 0.02;
  for (int n = 0; n < n_scans; ++n) {
    const Pose2 pose{0.1 * n, 2.0 * n - n_scans, 1.0 * (n % 5)};
    out.poses.push_back({double(n), pose});
    out.scans.push_back(render_scan(world, pose, 128, 128, 0.5, opts, testing::mix(7, n)));
  }
  return out;
}

}  // namespace

// Cell count sweep at a fixed scan count: run time should stay roughly
// linear in the number of observed cells.
static void BM_BuildMap_Resolution(benchmark::State& state) {
  static const MapCase c = make_case(16);
  const double r_v = 4.0 / state.range(0);
  GridMap grid = bounds_from_trajectory(c.poses, c.scans[0].footprint_radius_m(), r_v);
  for (auto _ : state) {
    build_map(c.scans, c.poses, WeightModel{}, {}, grid, 1);
    benchmark::DoNotOptimize(grid.intensity.data());
  }
  state.counters["cells"] = static_cast<double>(grid.size());
}
BENCHMARK(BM_BuildMap_Resolution)->RangeMultiplier(2)->Range(1, 16);

static void BM_BuildMap_Threads(benchmark::State& state) {
  static const MapCase c = make_case(16);
  GridMap grid = bounds_from_trajectory(c.poses, c.scans[0].footprint_radius_m(), 0.5);
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    build_map(c.scans, c.poses, WeightModel{}, {}, grid, threads);
    benchmark::DoNotOptimize(grid.intensity.data());
  }
}
BENCHMARK(BM_BuildMap_Threads)->Arg(1)->Arg(2)->Arg(4)->Arg(8);

BENCHMARK_MAIN();
