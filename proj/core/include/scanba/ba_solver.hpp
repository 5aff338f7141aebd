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

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "scanba/mapgrid.hpp"
#include "scanba/preprocess.hpp"
#include "scanba/scan.hpp"
#include "scanba/se2.hpp"

namespace scanba {

/// How the per-cell weighted mean is treated when linearizing.
enum class JacobianMode {
  /// Full chain rule: the mean's dependence on every observing pose is kept,
  /// so the reduced gradient equals the pose block of the joint gradient.
  kExactVarpro,
  /// The mean is held constant at the linearization point; cheaper, with a
  /// more block-diagonal normal matrix.
  kMeanFixed,
};

struct SolverConfig {
  int max_iterations = 50;
  double update_tolerance = 1e-6;      // mixed meters+radians norm of the step
  double cost_rel_tolerance = 1e-9;
  double damping = 0.0;                // Levenberg parameter, 0 = pure Gauss-Newton
  JacobianMode jacobian_mode = JacobianMode::kExactVarpro;
};

struct ConvergenceReport {
  int iterations = 0;
  std::vector<double> costs;
  std::vector<double> update_norms;
  std::size_t h_nnz = 0;
  double wall_time_s = 0.0;
  bool converged = false;
  std::string message;
};

/// The bundle-adjustment instance: preprocessed scans with their initial
/// poses, the weight model, and the map sampling layout. Pose 0 is the gauge
/// anchor and is never updated.
struct BAProblem {
  std::vector<Scan> scans;
  Trajectory init_poses;
  WeightModel wm;
  GridMap grid;                        // layout only; intensities are rebuilt
  std::vector<CumulativeMask> masks;   // empty = no masking
  int threads = 0;
};

/// Scan indices whose footprint can contain each cell, stored CSR-style.
/// A conservative superset; per-sample validity is still checked.
struct Covisibility {
  std::vector<std::uint32_t> offsets;  // size cells + 1
  std::vector<std::int32_t> scan_ids;

  std::size_t cells() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

Covisibility compute_covisibility(const BAProblem& problem, const Trajectory& poses);

/// Residuals and Jacobians for one map cell: the rows e and the packed
/// Jacobian J with one 3-column block per entry of states (kMeanFixed fills
/// only each row's own block).
struct CellSystem {
  std::size_t cell = 0;
  std::vector<int> states;             // observing scan indices, |V_v|
  Eigen::VectorXd e;                   // |V_v|
  Eigen::MatrixXd J;                   // |V_v| x 3|V_v|
};

/// Streams the per-cell residual systems of the reduced (map-eliminated)
/// objective at the given poses. Cells with fewer than two valid samples are
/// skipped; their residual vanishes identically under the weighted mean.
/// Weights are evaluated at weight_poses (the linearization point), which
/// callers normally pass equal to poses. Returns the total cost.
double for_each_cell_system(const BAProblem& problem, const Trajectory& poses,
                            const Trajectory& weight_poses, const Covisibility& covis,
                            JacobianMode mode,
                            const std::function<void(const CellSystem&)>& visit);

/// Cost of the reduced objective only (no Jacobians).
double evaluate_cost(const BAProblem& problem, const Trajectory& poses,
                     const Trajectory& weight_poses, const Covisibility& covis,
                     int threads = 0);

/// Gauss-Newton normal equations over the free poses (pose 0 deleted).
/// Blocks are 3x3; the block pattern mirrors the co-visibility graph.
class NormalSystem {
 public:
  explicit NormalSystem(int num_poses);  // total poses incl. the anchored one

  int dim() const { return 3 * (num_poses_ - 1); }
  void add_block(int state_i, int state_j, const Eigen::Matrix3d& h);
  void add_rhs(int state_i, const Eigen::Vector3d& b);
  void accumulate(const CellSystem& cell);
  void merge(const NormalSystem& other);

  const std::map<std::pair<int, int>, Eigen::Matrix3d>& blocks() const { return blocks_; }
  const Eigen::VectorXd& rhs() const { return b_; }
  std::set<std::pair<int, int>> block_pattern() const;
  std::size_t scalar_nnz() const;

  /// Solves (H + damping * diag(H)) dx = b. Empty result on factorization
  /// failure or a non-finite solution.
  std::optional<Eigen::VectorXd> solve(double damping) const;

  /// Free states (1-based pose indices) whose diagonal block is numerically
  /// zero, i.e. that no residual constrains.
  std::vector<int> unconstrained_states(double tol = 1e-12) const;

 private:
  int num_poses_;
  std::map<std::pair<int, int>, Eigen::Matrix3d> blocks_;  // upper triangle, key i <= j
  Eigen::VectorXd b_;
};

/// Assembles H += sum J_v^T J_v and b += -sum J_v^T e_v over the streamed
/// cells, with the anchored pose's rows and columns deleted.
NormalSystem assemble(const BAProblem& problem, const Trajectory& poses,
                      const Covisibility& covis, JacobianMode mode, double* cost = nullptr);

struct BAResult {
  Trajectory poses;
  GridMap map;
  ConvergenceReport report;
};

class SolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Separable bundle adjustment: iteratively linearizes the reduced objective,
/// solves the block-sparse normal equations, and applies body-frame updates to
/// poses 1..N-1. The map is built once from the final poses. Throws SolveError
/// when the system stays rank-deficient after damping, naming the
/// under-constrained states.
BAResult solve_ba(const BAProblem& problem, const SolverConfig& config = {});

struct JointResult {
  Trajectory poses;
  /// Optimized intensity per observed cell, indexed like result cells.
  std::vector<std::size_t> cell_indices;
  std::vector<double> intensities;
  ConvergenceReport report;
};

/// Test oracle: joint Gauss-Newton over the stacked state (poses 1..N-1 and
/// every observed cell intensity). Refuses instances above 10^6 residuals.
JointResult solve_joint_oracle(const BAProblem& problem, const SolverConfig& config = {});

}  // namespace scanba
