#pragma once

#include <Eigen/Dense>
#include <vector>

namespace riskplan {

// Entry of a sparse symmetric block matrix; (row, col) with row <= col stands
// for both symmetric positions.
struct BlockEntry {
  int block = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

// Semidefinite program in standard primal form over a block-diagonal cone:
//   min <C, X>  s.t.  <A_i, X> = b_i,  X >= 0 on every block.
struct SdpProblem {
  std::vector<int> block_sizes;
  std::vector<std::vector<BlockEntry>> constraints;  // A_i, sparse symmetric
  std::vector<BlockEntry> objective;                 // C
  Eigen::VectorXd b;
};

struct SdpOptions {
  int max_iterations = 200;
  double tol_feasibility = 1e-9;  // relative primal/dual residual norms
  double tol_gap = 1e-9;          // relative duality gap
  // Accepted at exit when progress stalls before the tight tolerances; the
  // caller sees the achieved residuals and applies its own acceptance test.
  double loose_feasibility = 1e-6;
  double loose_gap = 1e-7;
  int stall_iterations = 15;  // no best-score improvement for this long
  double step_fraction = 0.98;
  double init_scale = 10.0;  // X = Z = init_scale * I
  bool verbose = false;
};

struct SdpSolution {
  enum class Status { Optimal, IterationLimit, NumericalFailure };

  Status status = Status::NumericalFailure;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double rel_gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  std::vector<Eigen::MatrixXd> X;
  std::vector<Eigen::MatrixXd> Z;
  Eigen::VectorXd y;
};

// Dense primal-dual path-following solver (HKM direction, Mehrotra
// predictor-corrector, infeasible start). Deterministic for fixed inputs.
SdpSolution solve_sdp(const SdpProblem& problem, const SdpOptions& options = {});

}  // namespace riskplan
