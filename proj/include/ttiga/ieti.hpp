#pragma once

#include "ttiga/assembly.hpp"
#include "ttiga/solvers.hpp"

namespace ttiga {

/// Rank-one constraint pair for one interface: applying (a_j, a_k) to the
/// patch coefficient blocks gives the C0 jump (a_k carries the -1).
struct JumpTensor {
  int j = 0, k = 0;  // patch ids, 1-based, j < k
  int d1 = 1;        // connection dimension, 1-based
  int finer = 0;     // finer patch id; equals j on fully conforming interfaces
  TTOperator a_j, a_k;
  std::vector<int> jump_shape;  // J_d in dimension order; J_{d1} = 1
};

/// Jump factors from the trimmed solution spaces of both patches; the finer
/// patch keeps identity factors, the coarser one the knot-insertion matrix.
JumpTensor build_jump_tensor(const Interface& iface, const PatchDiscretization& disc_j,
                             const PatchDiscretization& disc_k);

/// Frobenius norm of all interface constraint violations A y.
double jump_residual(const std::vector<JumpTensor>& jumps, const BlockTTVector& y);

/// Block A y, one 3-mode block per interface (singleton in the connection
/// dimension).
BlockTTVector apply_jump(const std::vector<JumpTensor>& jumps, const BlockTTVector& y,
                         double round_tol);

/// Block A^T lambda, one block per patch (lambda blocks in full-mode form).
BlockTTVector apply_jump_transposed(const std::vector<JumpTensor>& jumps,
                                    const BlockTTVector& lambda,
                                    const std::vector<std::vector<int>>& patch_sizes,
                                    double round_tol);

/// Merge out the singleton connection mode (the paper's reduced lambda form).
TTVector lambda_to_2d(const TTVector& block3, int d1);
TTVector lambda_to_3d(const TTVector& block2, int d1, const std::vector<int>& shape3);

/// Dual Schur-complement problem: per-patch stiffness, jump tensors and the
/// interface preconditioner blocks built from the finer patch.
struct DualSystem {
  std::vector<std::vector<int>> patch_sizes;  // trimmed sizes per patch
  std::vector<TTOperator> stiffness;            // per patch
  std::vector<JumpTensor> jumps;                // per interface
  std::vector<TTOperator> precond;              // per interface, on 2-D lambda blocks
  SolverParams local;                           // K^{-1} solves
  SolverParams precond_local;                   // P^{-1} solves
  double round_tol = 1e-9;
};

DualSystem build_dual_system(const std::vector<PatchDiscretization>& discs,
                             const std::vector<TTOperator>& stiffness,
                             const std::vector<Interface>& interfaces, double eps);

/// Preconditioner block P = A_f K_f A_f^T for one interface (2-D form); the
/// default takes the finer patch, use_patch overrides for comparisons.
TTOperator build_preconditioner(const DualSystem& sys, int iface_index, int use_patch = 0);

/// A K^{-1} A^T on 2-D lambda blocks (no preconditioning).
BlockTTVector dual_apply(const DualSystem& sys, const BlockTTVector& lambda2d);

struct IetiResult {
  BlockTTVector y;       // primal blocks per patch
  BlockTTVector lambda;  // 2-D dual blocks per interface
  SolveReport report;
  double jump_rel = 0.0;  // ||A y|| / ||y||
};

/// Dual solve of the preconditioned Schur complement followed by primal
/// recovery.
IetiResult solve_ieti(const DualSystem& sys, const BlockTTVector& f, double eps);

}  // namespace ttiga
