#include "ttiga/ieti.hpp"

#include <cmath>

namespace ttiga {

namespace {

VectorXd selector_row(int n, Side side) {
  VectorXd v = VectorXd::Zero(n);
  v[side == Side::low ? 0 : n - 1] = 1.0;
  return v;
}

}  // namespace

JumpTensor build_jump_tensor(const Interface& iface, const PatchDiscretization& disc_j,
                             const PatchDiscretization& disc_k) {
  JumpTensor out;
  out.j = iface.j;
  out.k = iface.k;
  out.d1 = iface.d1;
  out.finer = (iface.conforming[0] && iface.conforming[1]) ? iface.j : iface.finer_patch;

  auto span = iface.spanning_dims();
  std::vector<MatrixXd> fj(3), fk(3);
  out.jump_shape.assign(3, 0);
  for (int d = 1; d <= 3; ++d) {
    int nj = disc_j.trimmed_size(d - 1);
    int nk = disc_k.trimmed_size(d - 1);
    if (d == iface.d1) {
      fj[d - 1] = selector_row(nj, iface.side_j).transpose();
      fk[d - 1] = -selector_row(nk, iface.side_k).transpose();
      out.jump_shape[d - 1] = 1;
      continue;
    }
    int s = d == span[0] ? 0 : 1;
    if (iface.conforming[s]) {
      require(nj == nk, "build_jump_tensor: conforming sizes differ");
      require(disc_j.spaces[d - 1].knot_vector() == disc_k.spaces[d - 1].knot_vector(),
              "build_jump_tensor: conforming knot vectors differ");
      fj[d - 1] = MatrixXd::Identity(nj, nj);
      fk[d - 1] = MatrixXd::Identity(nk, nk);
      out.jump_shape[d - 1] = nj;
    } else {
      bool j_fine = iface.finer_patch == iface.j;
      const PatchDiscretization& fine = j_fine ? disc_j : disc_k;
      const PatchDiscretization& coarse = j_fine ? disc_k : disc_j;
      MatrixXd z = refinement_matrix(coarse.spaces[d - 1], fine.spaces[d - 1]);
      // slice to the trimmed index ranges of both spaces
      MatrixXd zt = z.block(fine.trim_start(d - 1), coarse.trim_start(d - 1),
                            fine.trimmed_size(d - 1), coarse.trimmed_size(d - 1));
      int nf = fine.trimmed_size(d - 1);
      if (j_fine) {
        fj[d - 1] = MatrixXd::Identity(nf, nf);
        fk[d - 1] = zt;
      } else {
        fj[d - 1] = zt;
        fk[d - 1] = MatrixXd::Identity(nf, nf);
      }
      out.jump_shape[d - 1] = nf;
    }
  }
  out.a_j = TTOperator::kronecker(fj);
  out.a_k = TTOperator::kronecker(fk);
  return out;
}

BlockTTVector apply_jump(const std::vector<JumpTensor>& jumps, const BlockTTVector& y,
                         double round_tol) {
  std::vector<int> keys;
  std::vector<TTVector> blocks;
  for (size_t c = 0; c < jumps.size(); ++c) {
    const JumpTensor& jt = jumps[c];
    int bj = -1, bk = -1;
    for (int i = 0; i < y.num_blocks(); ++i) {
      if (y.keys()[i] == jt.j) bj = i;
      if (y.keys()[i] == jt.k) bk = i;
    }
    require(bj >= 0 && bk >= 0, "apply_jump: missing patch block");
    TTVector s = tt_add(tt_apply(jt.a_j, y.block(bj), 0.0), tt_apply(jt.a_k, y.block(bk), 0.0));
    blocks.push_back(round_tol > 0 ? tt_round(s, round_tol) : s);
    keys.push_back(static_cast<int>(c));
  }
  return BlockTTVector(std::move(keys), std::move(blocks));
}

BlockTTVector apply_jump_transposed(const std::vector<JumpTensor>& jumps,
                                    const BlockTTVector& lambda,
                                    const std::vector<std::vector<int>>& patch_sizes,
                                    double round_tol) {
  const int np = static_cast<int>(patch_sizes.size());
  std::vector<int> keys(np);
  std::vector<TTVector> blocks;
  for (int p = 0; p < np; ++p) {
    keys[p] = p + 1;
    blocks.push_back(TTVector::zero(patch_sizes[p]));
  }
  BlockTTVector out(std::move(keys), std::move(blocks));
  for (size_t c = 0; c < jumps.size(); ++c) {
    const JumpTensor& jt = jumps[c];
    const TTVector& lam = lambda.block(static_cast<int>(c));
    TTVector tj = tt_apply(jt.a_j.transpose(), lam, 0.0);
    TTVector tk = tt_apply(jt.a_k.transpose(), lam, 0.0);
    out.block(jt.j - 1) = tt_round(tt_add(out.block(jt.j - 1), tj), round_tol);
    out.block(jt.k - 1) = tt_round(tt_add(out.block(jt.k - 1), tk), round_tol);
  }
  return out;
}

double jump_residual(const std::vector<JumpTensor>& jumps, const BlockTTVector& y) {
  return apply_jump(jumps, y, 0.0).norm();
}

TTVector lambda_to_2d(const TTVector& block3, int d1) {
  require(block3.core(d1 - 1).n == 1, "lambda_to_2d: connection mode not singleton");
  int p = d1 - 1;
  return tt_merge_modes(block3, p + 1 < block3.order() ? p : p - 1);
}

TTVector lambda_to_3d(const TTVector& block2, int d1, const std::vector<int>& shape3) {
  require(block2.order() + 1 == static_cast<int>(shape3.size()),
          "lambda_to_3d: order mismatch");
  int p = d1 - 1;
  if (p + 1 < static_cast<int>(shape3.size())) return tt_split_mode(block2, p, 1, shape3[p + 1]);
  return tt_split_mode(block2, p - 1, shape3[p - 1], 1);
}

// P = A_fine K_fine A_fine^T reduced to the 2-D lambda indices.
TTOperator build_preconditioner(const DualSystem& sys, int iface_index, int use_patch) {
  const JumpTensor& jt = sys.jumps[iface_index];
  int patch = use_patch != 0 ? use_patch : jt.finer;
  require(patch == jt.j || patch == jt.k, "build_preconditioner: patch not on interface");
  const TTOperator& a = patch == jt.j ? jt.a_j : jt.a_k;
  const TTOperator& k = sys.stiffness[patch - 1];
  TTOperator p = tt_compose(tt_compose(a, k, sys.round_tol), a.transpose(), sys.round_tol);
  // drop the singleton connection mode by contracting its core into the
  // neighbouring one
  const int dd = jt.d1 - 1;
  const int D = p.order();
  std::vector<Core4> cores;
  for (int d = 0; d < D; ++d) cores.push_back(p.core(d));
  MatrixXd carry(cores[dd].r0, cores[dd].r1);
  for (int b = 0; b < cores[dd].r1; ++b)
    for (int a0 = 0; a0 < cores[dd].r0; ++a0) carry(a0, b) = cores[dd].at(a0, 0, 0, b);
  const bool fold_right = dd + 1 < D;
  std::vector<Core4> out;
  for (int d = 0; d < D; ++d) {
    if (d == dd) continue;
    Core4 c = cores[d];
    if (fold_right && d == dd + 1) {
      Core4 nn(carry.rows(), c.m, c.n, c.r1);
      for (int b = 0; b < c.r1; ++b)
        for (int jj = 0; jj < c.n; ++jj)
          for (int ii = 0; ii < c.m; ++ii)
            for (int a0 = 0; a0 < carry.rows(); ++a0) {
              double s = 0;
              for (int m = 0; m < c.r0; ++m) s += carry(a0, m) * c.at(m, ii, jj, b);
              nn.at(a0, ii, jj, b) = s;
            }
      out.push_back(std::move(nn));
    } else if (!fold_right && d == dd - 1) {
      Core4 nn(c.r0, c.m, c.n, carry.cols());
      for (int b = 0; b < carry.cols(); ++b)
        for (int jj = 0; jj < c.n; ++jj)
          for (int ii = 0; ii < c.m; ++ii)
            for (int a0 = 0; a0 < c.r0; ++a0) {
              double s = 0;
              for (int m = 0; m < c.r1; ++m) s += c.at(a0, ii, jj, m) * carry(m, b);
              nn.at(a0, ii, jj, b) = s;
            }
      out.push_back(std::move(nn));
    } else {
      out.push_back(std::move(c));
    }
  }
  return TTOperator(std::move(out));
}

DualSystem build_dual_system(const std::vector<PatchDiscretization>& discs,
                             const std::vector<TTOperator>& stiffness,
                             const std::vector<Interface>& interfaces, double eps) {
  DualSystem sys;
  sys.stiffness = stiffness;
  for (const auto& d : discs) {
    auto ts = d.trimmed_sizes();
    sys.patch_sizes.push_back({ts[0], ts[1], ts[2]});
  }
  for (const auto& f : interfaces)
    sys.jumps.push_back(build_jump_tensor(f, discs[f.j - 1], discs[f.k - 1]));
  sys.local.tol = eps * 10;
  sys.local.nswp = 20;
  sys.local.kickrank = 2;
  sys.precond_local = sys.local;
  sys.round_tol = eps;
  for (size_t c = 0; c < sys.jumps.size(); ++c)
    sys.precond.push_back(build_preconditioner(sys, static_cast<int>(c)));
  return sys;
}

namespace {

BlockTTVector lambda_blocks_to_3d(const DualSystem& sys, const BlockTTVector& lam2) {
  std::vector<TTVector> blocks;
  for (size_t c = 0; c < sys.jumps.size(); ++c)
    blocks.push_back(lambda_to_3d(lam2.block(static_cast<int>(c)), sys.jumps[c].d1,
                                  sys.jumps[c].jump_shape));
  return BlockTTVector(lam2.keys(), std::move(blocks));
}

BlockTTVector lambda_blocks_to_2d(const DualSystem& sys, const BlockTTVector& lam3) {
  std::vector<TTVector> blocks;
  for (size_t c = 0; c < sys.jumps.size(); ++c)
    blocks.push_back(lambda_to_2d(lam3.block(static_cast<int>(c)), sys.jumps[c].d1));
  return BlockTTVector(lam3.keys(), std::move(blocks));
}

BlockTTVector solve_patchwise(const DualSystem& sys, const BlockTTVector& loads,
                              SolveReport* agg) {
  std::vector<TTVector> blocks;
  for (int p = 0; p < loads.num_blocks(); ++p) {
    auto [w, rep] = local_tt_solve(sys.stiffness[p], loads.block(p), sys.local);
    if (agg) {
      agg->max_rank_seen = std::max(agg->max_rank_seen, rep.max_rank_seen);
      if (!rep.converged) agg->converged = false;
    }
    blocks.push_back(std::move(w));
  }
  return BlockTTVector(loads.keys(), std::move(blocks));
}

}  // namespace

BlockTTVector dual_apply(const DualSystem& sys, const BlockTTVector& lambda2d) {
  BlockTTVector lam3 = lambda_blocks_to_3d(sys, lambda2d);
  BlockTTVector loads = apply_jump_transposed(sys.jumps, lam3, sys.patch_sizes, sys.round_tol);
  BlockTTVector w = solve_patchwise(sys, loads, nullptr);
  BlockTTVector gathered = apply_jump(sys.jumps, w, sys.round_tol);
  return lambda_blocks_to_2d(sys, gathered);
}

namespace {

BlockTTVector precond_apply_2d(const DualSystem& sys, const BlockTTVector& r2d) {
  std::vector<TTVector> blocks;
  for (size_t c = 0; c < sys.jumps.size(); ++c) {
    auto [z, rep] = local_tt_solve(sys.precond[c], r2d.block(static_cast<int>(c)),
                                   sys.precond_local);
    blocks.push_back(std::move(z));
  }
  return BlockTTVector(r2d.keys(), std::move(blocks));
}

}  // namespace

IetiResult solve_ieti(const DualSystem& sys, const BlockTTVector& f, double eps) {
  IetiResult out;
  SolveReport recovery_rep;
  recovery_rep.converged = true;

  // dual right-hand side g = A K^{-1} f
  BlockTTVector w0 = solve_patchwise(sys, f, &recovery_rep);
  BlockTTVector g = lambda_blocks_to_2d(sys, apply_jump(sys.jumps, w0, sys.round_tol));

  SolverParams gp;
  gp.tol = eps * 1e2;
  gp.restart = 20;
  gp.max_iters = 10;
  gp.round_tol = gp.tol * 0.1;

  BlockOp op = [&](const BlockTTVector& lam) { return dual_apply(sys, lam); };
  BlockOp pre = [&](const BlockTTVector& r) { return precond_apply_2d(sys, r); };
  auto [lambda, rep] = tt_gmres_block(op, g, pre, gp);
  out.lambda = lambda;
  out.report = rep;
  out.report.max_rank_seen = std::max(rep.max_rank_seen, recovery_rep.max_rank_seen);

  // primal recovery y = K^{-1} (f - A^T lambda)
  BlockTTVector lam3 = lambda_blocks_to_3d(sys, lambda);
  BlockTTVector corr = apply_jump_transposed(sys.jumps, lam3, sys.patch_sizes, sys.round_tol);
  BlockTTVector rhs = block_axpy(-1.0, corr, f, sys.round_tol);
  out.y = solve_patchwise(sys, rhs, &recovery_rep);
  if (!recovery_rep.converged) out.report.converged = false;

  double ynorm = out.y.norm();
  out.jump_rel = ynorm > 0 ? jump_residual(sys.jumps, out.y) / ynorm : 0.0;
  return out;
}

}  // namespace ttiga
