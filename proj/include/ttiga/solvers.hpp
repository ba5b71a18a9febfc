#pragma once

#include <functional>
#include <optional>

#include "ttiga/tt.hpp"

namespace ttiga {

struct SolverParams {
  double tol = 1e-6;        // relative residual target
  int restart = 20;         // GMRES restart length
  int max_iters = 10;       // GMRES outer restarts
  int nswp = 20;            // ALS sweep pairs
  int kickrank = 2;         // enrichment rank per stalled sweep
  double round_tol = 0.0;   // Krylov/iterate rounding; 0 means tol/10
  int local_dense_limit = 700;  // direct solve below this local size
  unsigned long seed = 20240601ULL;

  double rounding() const { return round_tol > 0.0 ? round_tol : tol * 0.1; }
};

struct SolveReport {
  int iterations = 0;
  double achieved_residual = 0.0;
  int max_rank_seen = 1;
  bool converged = false;
  std::vector<double> residual_history;
};

/// ALS linear solver with rank enrichment; relative residual measured in
/// rounded TT arithmetic. Falls back to TT-GMRES when sweeps stall.
std::pair<TTVector, SolveReport> local_tt_solve(const TTOperator& A, const TTVector& b,
                                                const SolverParams& params);

using BlockOp = std::function<BlockTTVector(const BlockTTVector&)>;

/// Restarted block TT-GMRES with modified Gram-Schmidt plus one
/// reorthogonalization pass; left preconditioning when supplied.
std::pair<BlockTTVector, SolveReport> tt_gmres_block(const BlockOp& apply, const BlockTTVector& b,
                                                     const std::optional<BlockOp>& precond,
                                                     const SolverParams& params);

}  // namespace ttiga
