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

#include "scanba/ba_solver.hpp"
#include "support/ba_fixtures.hpp"

using namespace scanba;
using scanba::testing::BAInstance;

// One reduced linearization+assembly at growing cell counts: wall time is
// expected to grow roughly linearly while the normal system stays 3(N-1).
static void BM_ReducedIteration(benchmark::State& state) {
  const double r_v = 4.0 / state.range(0);
  BAInstance inst = testing::stationary_instance(11, 0.02, r_v, 11, 64, 0.5);
  const Covisibility covis = compute_covisibility(inst.problem, inst.gt);
  for (auto _ : state) {
    const NormalSystem sys =
        assemble(inst.problem, inst.gt, covis, JacobianMode::kExactVarpro);
    benchmark::DoNotOptimize(sys.rhs().data());
  }
  state.counters["cells"] = static_cast<double>(inst.problem.grid.size());
  state.counters["h_dim"] = 3.0 * (inst.gt.size() - 1);
}
BENCHMARK(BM_ReducedIteration)->RangeMultiplier(2)->Range(1, 8);

static void BM_ReducedSolve(benchmark::State& state) {
  BAInstance inst = testing::stationary_instance(11, 0.02, 1.0, 12, 64, 0.5);
  inst.problem.init_poses = perturb_trajectory(inst.gt, 0.1, 0.5, 13);
  for (auto _ : state) {
    const BAResult result = solve_ba(inst.problem);
    benchmark::DoNotOptimize(result.report.iterations);
  }
}
BENCHMARK(BM_ReducedSolve);

static void BM_JointSolve(benchmark::State& state) {
  BAInstance inst = testing::stationary_instance(11, 0.02, 1.0, 12, 64, 0.5);
  inst.problem.init_poses = perturb_trajectory(inst.gt, 0.1, 0.5, 13);
  for (auto _ : state) {
    const JointResult result = solve_joint_oracle(inst.problem);
    benchmark::DoNotOptimize(result.report.iterations);
  }
}
BENCHMARK(BM_JointSolve);

BENCHMARK_MAIN();
