#include "ttiga/control.hpp"

#include <cmath>

#include "ttiga/cross.hpp"

namespace ttiga {

MatrixXd euler_matrix(int nt) {
  require(nt >= 1, "euler_matrix: need at least one time step");
  MatrixXd c = MatrixXd::Identity(nt, nt);
  for (int i = 1; i < nt; ++i) c(i, i - 1) = -1.0;
  return c;
}

namespace {

// Appends a trailing time mode carrying the given N_t x N_t factor.
TTOperator with_time_factor(const TTOperator& spatial, const MatrixXd& tfac) {
  std::vector<Core4> cores;
  for (int d = 0; d < spatial.order(); ++d) cores.push_back(spatial.core(d));
  Core4 tc(1, static_cast<int>(tfac.rows()), static_cast<int>(tfac.cols()), 1);
  for (int j = 0; j < tfac.cols(); ++j)
    for (int i = 0; i < tfac.rows(); ++i) tc.at(0, i, j, 0) = tfac(i, j);
  cores.push_back(std::move(tc));
  return TTOperator(std::move(cores));
}

JumpTensor with_time_identity(const JumpTensor& jt, int nt) {
  JumpTensor out = jt;
  MatrixXd id = MatrixXd::Identity(nt, nt);
  out.a_j = with_time_factor(jt.a_j, id);
  out.a_k = with_time_factor(jt.a_k, id);
  out.jump_shape.push_back(nt);
  return out;
}

}  // namespace

SpaceTimeBlocks build_spacetime_operators(const std::vector<PatchDiscretization>& discs,
                                          const std::vector<PatchOperators>& ops,
                                          const std::vector<Interface>& interfaces,
                                          const TimeGrid& grid, double inner_eps) {
  SpaceTimeBlocks st;
  st.grid = grid;
  const int np = static_cast<int>(discs.size());
  const double tau = grid.tau();
  MatrixXd id = MatrixXd::Identity(grid.nt, grid.nt);
  MatrixXd c = euler_matrix(grid.nt);

  for (int p = 0; p < np; ++p) {
    auto ts = discs[p].trimmed_sizes();
    st.patch_sizes.push_back({ts[0], ts[1], ts[2], grid.nt});
    st.mass_spatial.push_back(ops[p].mass);
    st.mass_st.push_back(with_time_factor(ops[p].mass, id));
    TTOperator kbar = tt_op_add(tt_op_scale(with_time_factor(ops[p].stiffness, id), tau),
                                with_time_factor(ops[p].mass, c));
    st.kbar.push_back(tt_op_round(kbar, inner_eps * 1e-2));

    // control preconditioner: per dimension the canonical mass factor with
    // the largest norm (Frobenius)
    std::array<MatrixXd, 3> chosen;
    for (int d = 0; d < 3; ++d) {
      double best = -1.0;
      for (const MatrixXd& f : ops[p].mass_factors[d]) {
        double nrm = f.norm();
        if (nrm > best) {
          best = nrm;
          chosen[d] = f;
        }
      }
      require(best >= 0.0, "build_spacetime_operators: missing mass factors");
    }
    st.precond_factors.push_back(chosen);
  }

  std::vector<JumpTensor> spatial_jumps;
  for (const auto& f : interfaces)
    spatial_jumps.push_back(build_jump_tensor(f, discs[f.j - 1], discs[f.k - 1]));
  for (const auto& jt : spatial_jumps) st.jumps_st.push_back(with_time_identity(jt, grid.nt));

  auto make_dual = [&](bool transposed) {
    DualSystem sys;
    sys.patch_sizes = st.patch_sizes;
    for (int p = 0; p < np; ++p)
      sys.stiffness.push_back(transposed ? st.kbar[p].transpose() : st.kbar[p]);
    sys.jumps = st.jumps_st;
    sys.local.tol = inner_eps * 10;
    sys.local.nswp = 20;
    sys.local.kickrank = 2;
    sys.precond_local = sys.local;
    sys.round_tol = inner_eps;
    for (size_t cidx = 0; cidx < sys.jumps.size(); ++cidx)
      sys.precond.push_back(build_preconditioner(sys, static_cast<int>(cidx)));
    return sys;
  };
  st.forward = make_dual(false);
  st.adjoint = make_dual(true);
  return st;
}

namespace {

BlockTTVector apply_mass_st(const SpaceTimeBlocks& st, const BlockTTVector& v, double rtol) {
  std::vector<TTVector> blocks;
  for (int p = 0; p < v.num_blocks(); ++p)
    blocks.push_back(tt_apply(st.mass_st[p], v.block(p), rtol));
  return BlockTTVector(v.keys(), std::move(blocks));
}

void merge_report(SolveReport* agg, const SolveReport& r) {
  if (!agg) return;
  agg->max_rank_seen = std::max(agg->max_rank_seen, r.max_rank_seen);
  if (!r.converged) agg->converged = false;
}

}  // namespace

BlockTTVector schur_control_apply(const SpaceTimeBlocks& st, const BlockTTVector& u, double alpha,
                                  double inner_eps, SolveReport* inner_report) {
  const double tau = st.grid.tau();
  const double rtol = inner_eps * 10;
  BlockTTVector mu_ = apply_mass_st(st, u, rtol);
  IetiResult fwd = solve_ieti(st.forward, mu_, inner_eps);
  merge_report(inner_report, fwd.report);
  BlockTTVector my = apply_mass_st(st, fwd.y, rtol);
  IetiResult adj = solve_ieti(st.adjoint, my, inner_eps);
  merge_report(inner_report, adj.report);
  BlockTTVector mw = apply_mass_st(st, adj.y, rtol);
  // tau*alpha*M u + tau^3 * M w
  BlockTTVector out = block_axpy(tau * alpha / (tau * tau * tau), mu_, mw, 0.0);
  return block_round(block_scale(out, tau * tau * tau), rtol);
}

BlockTTVector control_preconditioner_apply(const SpaceTimeBlocks& st, const BlockTTVector& v,
                                           double alpha) {
  const double tau = st.grid.tau();
  std::vector<TTVector> blocks;
  for (int p = 0; p < v.num_blocks(); ++p) {
    TTVector x = v.block(p);
    for (int d = 0; d < 3; ++d) {
      const MatrixXd& f = st.precond_factors[p][d];
      x = tt_apply_mode(x, d, f.partialPivLu().inverse());
    }
    blocks.push_back(tt_scale(x, 1.0 / (tau * alpha)));
  }
  return BlockTTVector(v.keys(), std::move(blocks));
}

BlockTTVector interpolate_desired_state(const std::vector<PatchDiscretization>& discs,
                                        const SpaceTimeField& desired, const TimeGrid& grid,
                                        double tol, long dense_cap) {
  std::vector<int> keys;
  std::vector<TTVector> blocks;
  const double tau = grid.tau();
  for (size_t p = 0; p < discs.size(); ++p) {
    const PatchDiscretization& disc = discs[p];
    std::array<std::vector<double>, 3> grev;
    for (int d = 0; d < 3; ++d) grev[d] = disc.spaces[d].greville_points();
    std::vector<int> shape{disc.spaces[0].size(), disc.spaces[1].size(),
                           disc.spaces[2].size(), grid.nt};
    CrossOptions copts;
    copts.tol = tol;
    copts.dense_cap = dense_cap;
    TensorSampler sampler = [&](const std::vector<int>& idx) {
      Vec3 xhat(grev[0][idx[0]], grev[1][idx[1]], grev[2][idx[2]]);
      double t = tau * (idx[3] + 1);  // implicit Euler states live at t_l = l*tau
      return desired(disc.patch->eval(xhat), t);
    };
    TTVector samples = tt_cross(sampler, shape, copts);
    for (int d = 0; d < 3; ++d) {
      MatrixXd cinv = collocation_matrix(disc.spaces[d], grev[d]).inverse();
      samples = tt_apply_mode(samples, d, cinv);
    }
    // trim the spatial boundary modes
    std::vector<Core3> cores;
    for (int d = 0; d < 3; ++d) {
      const Core3& c = samples.core(d);
      int s = disc.trim_start(d), n = disc.trimmed_size(d);
      Core3 t(c.r0, n, c.r1);
      for (int i = 0; i < n; ++i) t.set_slice(i, c.slice(s + i));
      cores.push_back(std::move(t));
    }
    cores.push_back(samples.core(3));
    blocks.push_back(tt_round(TTVector(std::move(cores)), tol));
    keys.push_back(static_cast<int>(p) + 1);
  }
  return BlockTTVector(std::move(keys), std::move(blocks));
}

ControlSolution solve_optimal_control(const SpaceTimeBlocks& st,
                                      const std::vector<PatchDiscretization>& discs,
                                      const SpaceTimeField& desired, double alpha,
                                      const ControlOptions& opts) {
  require(alpha > 0.0, "solve_optimal_control: alpha must be positive");
  ControlSolution sol;
  const double tau = st.grid.tau();
  const double rtol = opts.inner_eps * 10;

  BlockTTVector yhat =
      interpolate_desired_state(discs, desired, st.grid, opts.inner_eps, 1000000);

  // rhs = tau^2 [M 0] Kbb^{-T} [M yhat; 0]
  BlockTTVector myhat = apply_mass_st(st, yhat, rtol);
  SolveReport inner;
  inner.converged = true;
  IetiResult adj0 = solve_ieti(st.adjoint, myhat, opts.inner_eps);
  merge_report(&inner, adj0.report);
  BlockTTVector rhs = block_scale(apply_mass_st(st, adj0.y, rtol), tau * tau);

  SolverParams gp;
  gp.tol = opts.tol;
  gp.restart = opts.restart;
  gp.max_iters = opts.max_iters;
  gp.round_tol = opts.tol * 0.1;
  BlockOp op = [&](const BlockTTVector& u) {
    return schur_control_apply(st, u, alpha, opts.inner_eps, &inner);
  };
  BlockOp pre = [&](const BlockTTVector& v) {
    return control_preconditioner_apply(st, v, alpha);
  };
  auto [u, rep] = tt_gmres_block(op, rhs, pre, gp);
  sol.u = u;
  sol.report = rep;
  sol.report.max_rank_seen = std::max(rep.max_rank_seen, inner.max_rank_seen);

  // recovery: [y; lambda_y] = Kbb^{-1} [tau M u; 0]
  BlockTTVector mtu = block_scale(apply_mass_st(st, u, rtol), tau);
  IetiResult fwd = solve_ieti(st.forward, mtu, opts.inner_eps);
  sol.y = fwd.y;
  sol.lambda_y = fwd.lambda;
  sol.jump_y = fwd.jump_rel;
  // [mu; lambda_mu] = Kbb^{-T} [tau M (yhat - y); 0]
  BlockTTVector diff = block_axpy(-1.0, sol.y, yhat, rtol);
  BlockTTVector mdiff = block_scale(apply_mass_st(st, diff, rtol), tau);
  IetiResult adj = solve_ieti(st.adjoint, mdiff, opts.inner_eps);
  sol.mu = adj.y;
  sol.lambda_mu = adj.lambda;
  sol.jump_mu = adj.jump_rel;

  sol.u_norm_euclid = sol.u.norm();
  double um = 0.0;
  for (int p = 0; p < sol.u.num_blocks(); ++p)
    um += tt_inner(tt_apply(st.mass_st[p], sol.u.block(p), rtol), sol.u.block(p));
  sol.u_norm_mass = std::sqrt(std::max(0.0, um));
  sol.objective = evaluate_lagrangian(sol, yhat, alpha, st);
  sol.kkt_rel = kkt_residual(sol, yhat, alpha, st);
  return sol;
}

double evaluate_lagrangian(const ControlSolution& sol, const BlockTTVector& yhat, double alpha,
                           const SpaceTimeBlocks& st) {
  const double tau = st.grid.tau();
  const double rtol = 1e-10;
  double j = 0.0;
  BlockTTVector diff = block_axpy(-1.0, yhat, sol.y, rtol);
  for (int p = 0; p < diff.num_blocks(); ++p) {
    j += 0.5 * tau * tt_inner(tt_apply(st.mass_st[p], diff.block(p), rtol), diff.block(p));
    j += 0.5 * tau * alpha *
         tt_inner(tt_apply(st.mass_st[p], sol.u.block(p), rtol), sol.u.block(p));
  }
  // multiplier term mu^T (Kbar y + A^T lambda_y - tau M u)
  for (int p = 0; p < diff.num_blocks(); ++p) {
    TTVector r = tt_apply(st.kbar[p], sol.y.block(p), rtol);
    r = tt_add(r, tt_scale(tt_apply(st.mass_st[p], sol.u.block(p), rtol), -tau));
    j += tt_inner(r, sol.mu.block(p));
  }
  if (!st.jumps_st.empty() && sol.lambda_y.num_blocks() > 0) {
    std::vector<TTVector> l3;
    for (size_t c = 0; c < st.jumps_st.size(); ++c)
      l3.push_back(lambda_to_3d(sol.lambda_y.block(static_cast<int>(c)), st.jumps_st[c].d1,
                                st.jumps_st[c].jump_shape));
    BlockTTVector lam3(sol.lambda_y.keys(), std::move(l3));
    BlockTTVector atl = apply_jump_transposed(st.jumps_st, lam3, st.patch_sizes, rtol);
    for (int p = 0; p < diff.num_blocks(); ++p) j += tt_inner(atl.block(p), sol.mu.block(p));
    j += block_inner(lam3, apply_jump(st.jumps_st, sol.mu, rtol));
    std::vector<TTVector> m3;
    for (size_t c = 0; c < st.jumps_st.size(); ++c)
      m3.push_back(lambda_to_3d(sol.lambda_mu.block(static_cast<int>(c)), st.jumps_st[c].d1,
                                st.jumps_st[c].jump_shape));
    BlockTTVector lmu3(sol.lambda_mu.keys(), std::move(m3));
    j += block_inner(lmu3, apply_jump(st.jumps_st, sol.y, rtol));
  }
  return j;
}

double kkt_residual(const ControlSolution& sol, const BlockTTVector& yhat, double alpha,
                    const SpaceTimeBlocks& st) {
  const double tau = st.grid.tau();
  const double rtol = 1e-10;
  double sq = 0.0, scale_sq = 0.0;

  BlockTTVector lam3_y = sol.lambda_y, lam3_mu = sol.lambda_mu;
  BlockTTVector atly, atlmu;
  bool have_ifaces = !st.jumps_st.empty();
  if (have_ifaces) {
    std::vector<TTVector> ly, lm;
    for (size_t c = 0; c < st.jumps_st.size(); ++c) {
      ly.push_back(lambda_to_3d(sol.lambda_y.block(static_cast<int>(c)), st.jumps_st[c].d1,
                                st.jumps_st[c].jump_shape));
      lm.push_back(lambda_to_3d(sol.lambda_mu.block(static_cast<int>(c)), st.jumps_st[c].d1,
                                st.jumps_st[c].jump_shape));
    }
    atly = apply_jump_transposed(st.jumps_st, BlockTTVector(sol.lambda_y.keys(), std::move(ly)),
                                 st.patch_sizes, rtol);
    atlmu = apply_jump_transposed(st.jumps_st, BlockTTVector(sol.lambda_mu.keys(), std::move(lm)),
                                  st.patch_sizes, rtol);
  }

  for (int p = 0; p < sol.y.num_blocks(); ++p) {
    // stationarity in y: tau M (y - yhat) + Kbar^T mu + A^T lambda_mu
    TTVector r1 = tt_scale(
        tt_apply(st.mass_st[p], tt_add(sol.y.block(p), tt_scale(yhat.block(p), -1.0)), rtol),
        tau);
    r1 = tt_add(r1, tt_apply(st.kbar[p].transpose(), sol.mu.block(p), rtol));
    if (have_ifaces) r1 = tt_add(r1, atlmu.block(p));
    sq += std::pow(tt_round(r1, rtol).norm(), 2);
    // stationarity in u: tau alpha M u - tau M mu
    TTVector r3 =
        tt_add(tt_scale(tt_apply(st.mass_st[p], sol.u.block(p), rtol), tau * alpha),
               tt_scale(tt_apply(st.mass_st[p], sol.mu.block(p), rtol), -tau));
    sq += std::pow(tt_round(r3, rtol).norm(), 2);
    // forward equation: Kbar y + A^T lambda_y - tau M u
    TTVector r4 = tt_apply(st.kbar[p], sol.y.block(p), rtol);
    if (have_ifaces) r4 = tt_add(r4, atly.block(p));
    r4 = tt_add(r4, tt_scale(tt_apply(st.mass_st[p], sol.u.block(p), rtol), -tau));
    sq += std::pow(tt_round(r4, rtol).norm(), 2);
    // rhs scale
    scale_sq += std::pow(tau * tt_apply(st.mass_st[p], yhat.block(p), rtol).norm(), 2);
  }
  if (have_ifaces) {
    sq += std::pow(jump_residual(st.jumps_st, sol.mu), 2);
    sq += std::pow(jump_residual(st.jumps_st, sol.y), 2);
  }
  return std::sqrt(sq) / std::max(std::sqrt(scale_sq), 1e-300);
}

}  // namespace ttiga
