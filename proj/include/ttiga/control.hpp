#pragma once

#include "ttiga/ieti.hpp"

namespace ttiga {

struct TimeGrid {
  double T = 1.0;
  int nt = 1;
  double tau() const { return T / nt; }
};

/// Implicit-Euler difference matrix: 1 on the diagonal, -1 below.
MatrixXd euler_matrix(int nt);

/// Desired state as a function of physical point and time.
using SpaceTimeField = std::function<double(const Vec3&, double)>;

/// Space-time operators for the parabolic control problem; time enters as a
/// trailing TT mode of extent N_t.
struct SpaceTimeBlocks {
  TimeGrid grid;
  std::vector<std::vector<int>> patch_sizes;  // (n1, n2, n3, N_t) per patch
  std::vector<TTOperator> mass_st;            // per patch: M (x) I_t
  std::vector<TTOperator> mass_spatial;       // per patch (3-mode, trimmed)
  std::vector<TTOperator> kbar;               // tau K (x) I_t + M (x) C
  std::vector<JumpTensor> jumps_st;           // spatial jump extended in time
  DualSystem forward;                         // Kbar with its interface preconditioner
  DualSystem adjoint;                         // Kbar^T
  // control preconditioner factors: per patch and dimension the univariate
  // mass factor of largest norm (trimmed)
  std::vector<std::array<MatrixXd, 3>> precond_factors;
};

SpaceTimeBlocks build_spacetime_operators(const std::vector<PatchDiscretization>& discs,
                                          const std::vector<PatchOperators>& ops,
                                          const std::vector<Interface>& interfaces,
                                          const TimeGrid& grid, double inner_eps);

/// Applies tau*alpha*Mbar + tau^3 [Mbar 0] Kbb^{-T} diag(Mbar,0) Kbb^{-1}
/// [Mbar; 0] to a block control iterate; the inner inverses are full
/// space-time IETI solves.
BlockTTVector schur_control_apply(const SpaceTimeBlocks& blocks, const BlockTTVector& u,
                                  double alpha, double inner_eps, SolveReport* inner_report);

/// Exact Kronecker inverse of tau*alpha * I_t (x) (x)_d M_rd per patch.
BlockTTVector control_preconditioner_apply(const SpaceTimeBlocks& blocks,
                                           const BlockTTVector& v, double alpha);

struct ControlSolution {
  BlockTTVector u, y, mu;
  BlockTTVector lambda_y, lambda_mu;  // 2-D interface blocks (empty when N_C = 0)
  double objective = 0.0;
  double u_norm_euclid = 0.0;
  double u_norm_mass = 0.0;
  double jump_y = 0.0, jump_mu = 0.0;  // relative jump residuals
  double kkt_rel = 0.0;
  SolveReport report;
};

struct ControlOptions {
  double tol = 1e-5;      // outer GMRES tolerance (Schur system)
  double inner_eps = 1e-8;  // IETI eps: GMRES at eps*1e2, local at eps*10
  int restart = 20;
  int max_iters = 10;
};

ControlSolution solve_optimal_control(const SpaceTimeBlocks& blocks,
                                      const std::vector<PatchDiscretization>& discs,
                                      const SpaceTimeField& desired, double alpha,
                                      const ControlOptions& opts);

/// Desired-state coefficients by spatial Greville interpolation at each step.
BlockTTVector interpolate_desired_state(const std::vector<PatchDiscretization>& discs,
                                        const SpaceTimeField& desired, const TimeGrid& grid,
                                        double tol, long dense_cap);

/// Discrete Lagrangian value: tracking + penalty terms plus the multiplier
/// contributions (near zero at converged solutions).
double evaluate_lagrangian(const ControlSolution& sol, const BlockTTVector& yhat, double alpha,
                           const SpaceTimeBlocks& blocks);

/// Relative norm of the full first-order optimality residual.
double kkt_residual(const ControlSolution& sol, const BlockTTVector& yhat, double alpha,
                    const SpaceTimeBlocks& blocks);

}  // namespace ttiga
