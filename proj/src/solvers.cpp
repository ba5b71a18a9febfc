#include "ttiga/solvers.hpp"

#include <cmath>

namespace ttiga {

namespace {

// Flat 3-index environment (i, alpha, j) with i fastest; i/j index the bra and
// ket ranks of the iterate, alpha the operator rank.
struct Env3 {
  int ri = 0, ra = 0, rj = 0;
  VectorXd data;
  Env3() = default;
  Env3(int ri_, int ra_, int rj_) : ri(ri_), ra(ra_), rj(rj_) {
    data = VectorXd::Zero(static_cast<long>(ri) * ra * rj);
  }
  double& at(int i, int a, int j) {
    return data[i + static_cast<long>(ri) * (a + static_cast<long>(ra) * j)];
  }
  double at(int i, int a, int j) const {
    return data[i + static_cast<long>(ri) * (a + static_cast<long>(ra) * j)];
  }
  static Env3 one() {
    Env3 e(1, 1, 1);
    e.data[0] = 1.0;
    return e;
  }
};

// A core rearranged as matrix ((alpha, j) x (i, alpha2)).
MatrixXd core_perm_aj_ib(const Core4& c) {
  MatrixXd m(static_cast<long>(c.r0) * c.n, static_cast<long>(c.m) * c.r1);
  for (int b = 0; b < c.r1; ++b)
    for (int j = 0; j < c.n; ++j)
      for (int i = 0; i < c.m; ++i)
        for (int a = 0; a < c.r0; ++a) m(a + c.r0 * j, i + c.m * b) = c.at(a, i, j, b);
  return m;
}

// ((i, alpha) x (j, alpha2)).
MatrixXd core_perm_ia_jb(const Core4& c) {
  MatrixXd m(static_cast<long>(c.m) * c.r0, static_cast<long>(c.n) * c.r1);
  for (int b = 0; b < c.r1; ++b)
    for (int j = 0; j < c.n; ++j)
      for (int i = 0; i < c.m; ++i)
        for (int a = 0; a < c.r0; ++a) m(i + c.m * a, j + c.n * b) = c.at(a, i, j, b);
  return m;
}

// ((j, alpha2) x (alpha, i)).
MatrixXd core_perm_jb_ai(const Core4& c) {
  MatrixXd m(static_cast<long>(c.n) * c.r1, static_cast<long>(c.r0) * c.m);
  for (int b = 0; b < c.r1; ++b)
    for (int j = 0; j < c.n; ++j)
      for (int i = 0; i < c.m; ++i)
        for (int a = 0; a < c.r0; ++a) m(j + c.n * b, a + c.r0 * i) = c.at(a, i, j, b);
  return m;
}

// Folds (x-bra, A, x-ket) over core d from the left.
Env3 update_env_left(const Env3& phi, const Core3& x, const MatrixXd& a_aj_ib, int m, int n,
                     int ra1) {
  const int rx2 = x.r1;
  const int ra = phi.ra;
  Eigen::Map<const MatrixXd> phiM(phi.data.data(), static_cast<long>(phi.ri) * ra, phi.rj);
  MatrixXd t1 = phiM * x.right();  // ((a, alpha) x (j, b2))
  MatrixXd t1p(static_cast<long>(phi.ri) * rx2, static_cast<long>(ra) * n);
  for (int b2 = 0; b2 < rx2; ++b2)
    for (int j = 0; j < n; ++j)
      for (int al = 0; al < ra; ++al)
        for (int a = 0; a < phi.ri; ++a)
          t1p(a + phi.ri * b2, al + ra * j) = t1(a + phi.ri * al, j + n * b2);
  MatrixXd t2 = t1p * a_aj_ib;  // ((a, b2) x (i, alpha2))
  MatrixXd t2p(static_cast<long>(ra1) * rx2, static_cast<long>(phi.ri) * m);
  for (int a2 = 0; a2 < ra1; ++a2)
    for (int i = 0; i < m; ++i)
      for (int b2 = 0; b2 < rx2; ++b2)
        for (int a = 0; a < phi.ri; ++a)
          t2p(a2 + ra1 * b2, a + phi.ri * i) = t2(a + phi.ri * b2, i + m * a2);
  MatrixXd res = t2p * x.left();  // ((alpha2, b2) x a2)
  Env3 out(rx2, ra1, rx2);
  for (int b2 = 0; b2 < rx2; ++b2)
    for (int a2r = 0; a2r < ra1; ++a2r)
      for (int a2 = 0; a2 < rx2; ++a2) out.at(a2, a2r, b2) = res(a2r + ra1 * b2, a2);
  return out;
}

// Folds over core d from the right.
Env3 update_env_right(const Env3& phi, const Core3& x, const MatrixXd& a_ia_jb, int m, int n,
                      int ra0) {
  const int rx = x.r0;
  const int ra = phi.ra;
  Eigen::Map<const MatrixXd> phiM(phi.data.data(), static_cast<long>(phi.ri) * ra, phi.rj);
  MatrixXd t1 = x.left() * phiM.transpose();  // ((a1, j) x (a, alpha))
  MatrixXd t1p(static_cast<long>(rx) * phi.ri, static_cast<long>(n) * ra);
  for (int al = 0; al < ra; ++al)
    for (int j = 0; j < n; ++j)
      for (int a = 0; a < phi.ri; ++a)
        for (int a1 = 0; a1 < rx; ++a1)
          t1p(a1 + rx * a, j + n * al) = t1(a1 + rx * j, a + phi.ri * al);
  MatrixXd t2 = t1p * a_ia_jb.transpose();  // ((a1, a) x (i, alpha0))
  MatrixXd t2p(static_cast<long>(ra0) * rx, static_cast<long>(phi.ri) * m);
  for (int a0 = 0; a0 < ra0; ++a0)
    for (int i = 0; i < m; ++i)
      for (int a = 0; a < phi.ri; ++a)
        for (int a1 = 0; a1 < rx; ++a1)
          t2p(a0 + ra0 * a1, a + phi.ri * i) = t2(a1 + rx * a, i + m * a0);
  MatrixXd braM(static_cast<long>(phi.ri) * m, rx);
  for (int a1 = 0; a1 < rx; ++a1)
    for (int i = 0; i < m; ++i)
      for (int a = 0; a < phi.ri; ++a) braM(a + phi.ri * i, a1) = x.at(a1, i, a);
  MatrixXd res = t2p * braM;  // ((alpha0, a1_ket) x a1_bra)
  Env3 out(rx, ra0, rx);
  for (int a1k = 0; a1k < rx; ++a1k)
    for (int a0 = 0; a0 < ra0; ++a0)
      for (int a1b = 0; a1b < rx; ++a1b) out.at(a1b, a0, a1k) = res(a0 + ra0 * a1k, a1b);
  return out;
}

MatrixXd update_psi_left(const MatrixXd& psi, const Core3& x, const Core3& bc) {
  // psi'(a2, c2) = sum_{a,c,i} x(a,i,a2) bc(c,i,c2) psi(a,c)
  MatrixXd out = MatrixXd::Zero(x.r1, bc.r1);
  for (int i = 0; i < x.n; ++i)
    out += x.slice(i).transpose() * psi * bc.slice(i);
  return out;
}

MatrixXd update_psi_right(const MatrixXd& psi, const Core3& x, const Core3& bc) {
  // psi'(a1, c1) = sum_{a,c,i} x(a1,i,a) bc(c1,i,c) psi(a,c)
  MatrixXd out = MatrixXd::Zero(x.r0, bc.r0);
  for (int i = 0; i < x.n; ++i)
    out += x.slice(i) * psi * bc.slice(i).transpose();
  return out;
}

// Local projected operator acting on flat (a, i, b) vectors, a fastest.
struct LocalSystem {
  const Env3* phiL;
  const Env3* phiR;
  const MatrixXd* a_jb_ai;
  int m, n, ra0, ra1;
  int rl, rr;

  long size() const { return static_cast<long>(rl) * m * rr; }

  VectorXd apply(const VectorXd& xv) const {
    Eigen::Map<const MatrixXd> xm(xv.data(), static_cast<long>(rl) * n, rr);
    Eigen::Map<const MatrixXd> phiRm(phiR->data.data(), static_cast<long>(phiR->ri) * ra1,
                                     phiR->rj);
    MatrixXd t1 = xm * phiRm.transpose();  // ((a', j) x (b, alpha2))
    MatrixXd t1p(static_cast<long>(rl) * phiR->ri, static_cast<long>(n) * ra1);
    for (int a2 = 0; a2 < ra1; ++a2)
      for (int b = 0; b < phiR->ri; ++b)
        for (int j = 0; j < n; ++j)
          for (int a = 0; a < rl; ++a)
            t1p(a + rl * b, j + n * a2) = t1(a + rl * j, b + phiR->ri * a2);
    MatrixXd t2 = t1p * (*a_jb_ai);  // ((a', b) x (alpha, i))
    MatrixXd t2p(static_cast<long>(m) * phiR->ri, static_cast<long>(rl) * ra0);
    for (int al = 0; al < ra0; ++al)
      for (int b = 0; b < phiR->ri; ++b)
        for (int i = 0; i < m; ++i)
          for (int a = 0; a < rl; ++a)
            t2p(i + m * b, a + rl * al) = t2(a + rl * b, al + ra0 * i);
    MatrixXd phiLp(static_cast<long>(rl) * ra0, phiL->ri);
    for (int a = 0; a < phiL->ri; ++a)
      for (int al = 0; al < ra0; ++al)
        for (int ap = 0; ap < rl; ++ap) phiLp(ap + rl * al, a) = phiL->at(a, al, ap);
    MatrixXd y = t2p * phiLp;  // ((i, b) x a)
    VectorXd out(size());
    for (int b = 0; b < rr; ++b)
      for (int i = 0; i < m; ++i)
        for (int a = 0; a < rl; ++a)
          out[a + static_cast<long>(rl) * (i + static_cast<long>(m) * b)] = y(i + m * b, a);
    return out;
  }

  VectorXd diagonal(const Core4& ac) const {
    VectorXd d(size());
    MatrixXd dl(rl, ra0), dr(rr, ra1);
    for (int a = 0; a < rl; ++a)
      for (int al = 0; al < ra0; ++al) dl(a, al) = phiL->at(a, al, a);
    for (int b = 0; b < rr; ++b)
      for (int a2 = 0; a2 < ra1; ++a2) dr(b, a2) = phiR->at(b, a2, b);
    for (int i = 0; i < m; ++i) {
      MatrixXd ai(ra0, ra1);
      for (int a2 = 0; a2 < ra1; ++a2)
        for (int al = 0; al < ra0; ++al) ai(al, a2) = ac.at(al, i, i, a2);
      MatrixXd di = dl * ai * dr.transpose();  // (a x b)
      for (int b = 0; b < rr; ++b)
        for (int a = 0; a < rl; ++a)
          d[a + static_cast<long>(rl) * (i + static_cast<long>(m) * b)] = di(a, b);
    }
    return d;
  }

  MatrixXd dense(const Core4& ac) const {
    long nn = size();
    MatrixXd bm = MatrixXd::Zero(nn, nn);
    for (int al = 0; al < ra0; ++al)
      for (int a2 = 0; a2 < ra1; ++a2) {
        MatrixXd pl(rl, rl), pr(rr, rr);
        for (int ap = 0; ap < rl; ++ap)
          for (int a = 0; a < rl; ++a) pl(a, ap) = phiL->at(a, al, ap);
        for (int bp = 0; bp < rr; ++bp)
          for (int b = 0; b < rr; ++b) pr(b, bp) = phiR->at(b, a2, bp);
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < m; ++i) {
            double v = ac.at(al, i, j, a2);
            if (v == 0.0) continue;
            for (int bp = 0; bp < rr; ++bp)
              for (int b = 0; b < rr; ++b) {
                double s = v * pr(b, bp);
                if (s == 0.0) continue;
                bm.block(static_cast<long>(rl) * (i + static_cast<long>(m) * b),
                         static_cast<long>(rl) * (j + static_cast<long>(n) * bp), rl, rl) +=
                    s * pl;
              }
          }
      }
    return bm;
  }
};

// Unrestarted GMRES with Jacobi preconditioning for the projected local
// systems; handles nonsymmetric operators.
VectorXd local_iterative_solve(const LocalSystem& sys, const Core4& ac, const VectorXd& rhs,
                               const VectorXd& x0, double tol, int max_it) {
  VectorXd diag = sys.diagonal(ac);
  for (long i = 0; i < diag.size(); ++i)
    if (std::abs(diag[i]) < 1e-300) diag[i] = 1.0;
  auto prec = [&](const VectorXd& v) { return VectorXd(v.cwiseQuotient(diag)); };

  double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return VectorXd::Zero(rhs.size());
  VectorXd r = rhs - sys.apply(x0);
  VectorXd z = prec(r);
  double beta = z.norm();
  if (beta == 0.0) return x0;

  const int m = static_cast<int>(std::min<long>(max_it, rhs.size()));
  std::vector<VectorXd> v;
  v.push_back(z / beta);
  MatrixXd h = MatrixXd::Zero(m + 1, m);
  VectorXd g = VectorXd::Zero(m + 1);
  g[0] = beta;
  for (int k = 0; k < m; ++k) {
    VectorXd w = prec(sys.apply(v[k]));
    for (int i = 0; i <= k; ++i) {
      h(i, k) = w.dot(v[i]);
      w -= h(i, k) * v[i];
    }
    h(k + 1, k) = w.norm();
    MatrixXd hk = h.topLeftCorner(k + 2, k + 1);
    VectorXd y = hk.colPivHouseholderQr().solve(g.head(k + 2));
    double est = (g.head(k + 2) - hk * y).norm();
    if (est <= tol * beta || h(k + 1, k) < 1e-300 || k + 1 == m) {
      VectorXd x = x0;
      for (int i = 0; i <= k; ++i) x += y[i] * v[i];
      return x;
    }
    v.push_back(w / h(k + 1, k));
  }
  return x0;
}

// Left-orthogonalize core d, absorbing the factor into core d+1.
void push_right(std::vector<Core3>& xc, int d) {
  Core3& c = xc[d];
  MatrixXd lm = c.left();
  Eigen::HouseholderQR<MatrixXd> qr(lm);
  int rnew = static_cast<int>(std::min(lm.rows(), lm.cols()));
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(lm.rows(), rnew);
  MatrixXd rfac = qr.matrixQR().topLeftCorner(rnew, lm.cols()).triangularView<Eigen::Upper>();
  Core3 repl(c.r0, c.n, rnew);
  Eigen::Map<MatrixXd>(repl.data.data(), lm.rows(), rnew) = q;
  Core3& nx = xc[d + 1];
  Core3 nn(rnew, nx.n, nx.r1);
  Eigen::Map<MatrixXd>(nn.data.data(), rnew, static_cast<long>(nx.n) * nx.r1) =
      rfac * nx.right();
  xc[d] = std::move(repl);
  xc[d + 1] = std::move(nn);
}

// Right-orthogonalize core d, absorbing the factor into core d-1.
void push_left(std::vector<Core3>& xc, int d) {
  Core3& c = xc[d];
  MatrixXd rm = c.right().transpose();
  Eigen::HouseholderQR<MatrixXd> qr(rm);
  int rnew = static_cast<int>(std::min(rm.rows(), rm.cols()));
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(rm.rows(), rnew);
  MatrixXd rfac = qr.matrixQR().topLeftCorner(rnew, rm.cols()).triangularView<Eigen::Upper>();
  Core3 repl(rnew, c.n, c.r1);
  Eigen::Map<MatrixXd>(repl.data.data(), rnew, static_cast<long>(c.n) * c.r1) = q.transpose();
  Core3& pv = xc[d - 1];
  Core3 pn(pv.r0, pv.n, rnew);
  Eigen::Map<MatrixXd>(pn.data.data(), static_cast<long>(pv.r0) * pv.n, rnew) =
      pv.left() * rfac.transpose();
  xc[d] = std::move(repl);
  xc[d - 1] = std::move(pn);
}

}  // namespace

std::pair<TTVector, SolveReport> local_tt_solve(const TTOperator& A, const TTVector& b,
                                                const SolverParams& params) {
  require(A.col_shape() == b.shape() && A.row_shape() == b.shape(),
          "local_tt_solve: operator must be square on the rhs shape");
  const int D = b.order();
  SolveReport rep;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    rep.converged = true;
    rep.residual_history.push_back(0.0);
    return {TTVector::zero(b.shape()), rep};
  }
  const double rtol = params.rounding();
  std::mt19937_64 rng(params.seed);

  std::vector<MatrixXd> a_aj_ib(D), a_ia_jb(D), a_jb_ai(D);
  for (int d = 0; d < D; ++d) {
    a_aj_ib[d] = core_perm_aj_ib(A.core(d));
    a_ia_jb[d] = core_perm_ia_jb(A.core(d));
    a_jb_ai[d] = core_perm_jb_ai(A.core(d));
  }

  auto residual_of = [&](const TTVector& x) {
    TTVector ax = tt_apply(A, x, rtol);
    return tt_round(tt_add(b, tt_scale(ax, -1.0)), rtol).norm() / bnorm;
  };

  TTVector x = tt_round(b, 0.1);
  TTVector best = x;
  double best_res = residual_of(x);
  rep.residual_history.push_back(best_res);
  int stall = 0;

  for (int sweep = 0; sweep < params.nswp && best_res > params.tol; ++sweep) {
    x = tt_orthogonalize_right(tt_round(x, rtol));
    std::vector<Core3> xc = x.cores();

    std::vector<Env3> phiL(D), phiR(D);
    std::vector<MatrixXd> psiL(D), psiR(D);
    phiL[0] = Env3::one();
    psiL[0] = MatrixXd::Ones(1, 1);
    phiR[D - 1] = Env3::one();
    psiR[D - 1] = MatrixXd::Ones(1, 1);
    for (int d = D - 1; d > 0; --d) {
      phiR[d - 1] =
          update_env_right(phiR[d], xc[d], a_ia_jb[d], A.core(d).m, A.core(d).n, A.core(d).r0);
      psiR[d - 1] = update_psi_right(psiR[d], xc[d], b.core(d));
    }

    auto solve_core = [&](int d) {
      const Core4& ac = A.core(d);
      LocalSystem sys{&phiL[d], &phiR[d], &a_jb_ai[d], ac.m,     ac.n,
                      ac.r0,    ac.r1,    xc[d].r0,    xc[d].r1};
      VectorXd rhs(sys.size());
      for (int i = 0; i < ac.m; ++i) {
        MatrixXd ri = psiL[d] * b.core(d).slice(i) * psiR[d].transpose();
        for (int bb = 0; bb < xc[d].r1; ++bb)
          for (int aa = 0; aa < xc[d].r0; ++aa)
            rhs[aa + static_cast<long>(xc[d].r0) * (i + static_cast<long>(ac.m) * bb)] =
                ri(aa, bb);
      }
      VectorXd sol;
      if (sys.size() <= params.local_dense_limit) {
        sol = sys.dense(ac).partialPivLu().solve(rhs);
      } else {
        sol = local_iterative_solve(sys, ac, rhs, xc[d].data,
                                    std::max(1e-4 * params.tol, 1e-12), 180);
      }
      xc[d].data = sol;
    };

    for (int d = 0; d < D; ++d) {
      solve_core(d);
      if (d < D - 1) {
        push_right(xc, d);
        phiL[d + 1] =
            update_env_left(phiL[d], xc[d], a_aj_ib[d], A.core(d).m, A.core(d).n, A.core(d).r1);
        psiL[d + 1] = update_psi_left(psiL[d], xc[d], b.core(d));
      }
    }
    for (int d = D - 1; d >= 0; --d) {
      solve_core(d);
      if (d > 0) {
        push_left(xc, d);
        phiR[d - 1] =
            update_env_right(phiR[d], xc[d], a_ia_jb[d], A.core(d).m, A.core(d).n, A.core(d).r0);
        psiR[d - 1] = update_psi_right(psiR[d], xc[d], b.core(d));
      }
    }
    x = TTVector(xc);
    rep.max_rank_seen = std::max(rep.max_rank_seen, x.max_rank());

    double res = residual_of(x);
    if (res < best_res) {
      stall = (res > 0.9 * best_res) ? stall + 1 : 0;
      best_res = res;
      best = x;
    } else {
      x = best;
      ++stall;
    }
    rep.residual_history.push_back(best_res);
    ++rep.iterations;
    if (best_res <= params.tol) break;

    if (stall >= 2) {
      // correction solve on the residual with plain TT-GMRES
      TTVector r = tt_round(tt_add(b, tt_scale(tt_apply(A, best, rtol), -1.0)), rtol);
      SolverParams gp = params;
      gp.tol = std::max(params.tol * bnorm / std::max(r.norm(), 1e-300), 1e-2 * params.tol);
      BlockOp op = [&](const BlockTTVector& v) {
        return BlockTTVector({0}, {tt_apply(A, v.block(0), rtol)});
      };
      auto [dx, grep] = tt_gmres_block(op, BlockTTVector({0}, {r}), std::nullopt, gp);
      TTVector cand = tt_round(tt_add(best, dx.block(0)), rtol);
      double cres = residual_of(cand);
      if (cres < best_res) {
        best_res = cres;
        best = cand;
        x = cand;
        rep.max_rank_seen = std::max(rep.max_rank_seen, cand.max_rank());
      }
      rep.residual_history.push_back(best_res);
      stall = 0;
      if (best_res <= params.tol) break;
    }

    // rank enrichment: random low-rank kick scaled to the residual level
    std::vector<int> ranks(static_cast<size_t>(D - 1), params.kickrank);
    TTVector noise = TTVector::random(b.shape(), ranks, rng);
    noise = tt_scale(noise, 1e-2 * best_res * bnorm / std::max(noise.norm(), 1e-300));
    x = tt_add(best, noise);
  }

  rep.achieved_residual = best_res;
  rep.converged = best_res <= params.tol;
  return {best, rep};
}

std::pair<BlockTTVector, SolveReport> tt_gmres_block(const BlockOp& apply, const BlockTTVector& b,
                                                     const std::optional<BlockOp>& precond,
                                                     const SolverParams& params) {
  SolveReport rep;
  const double rtol = params.rounding();
  auto op = [&](const BlockTTVector& v) {
    BlockTTVector w = apply(v);
    if (precond) w = (*precond)(w);
    return block_round(w, rtol);
  };
  BlockTTVector rhs = precond ? block_round((*precond)(b), rtol) : b;
  const double rhs_norm = rhs.norm();

  std::vector<TTVector> zero_blocks;
  for (int i = 0; i < b.num_blocks(); ++i)
    zero_blocks.push_back(TTVector::zero(b.block(i).shape()));
  BlockTTVector x(b.keys(), zero_blocks);
  if (rhs_norm == 0.0) {
    rep.converged = true;
    return {x, rep};
  }

  for (int outer = 0; outer < params.max_iters && !rep.converged; ++outer) {
    BlockTTVector r = block_round(block_axpy(-1.0, op(x), rhs, rtol), rtol);
    double res_norm = r.norm();
    rep.achieved_residual = res_norm / rhs_norm;
    rep.residual_history.push_back(rep.achieved_residual);
    if (res_norm <= params.tol * rhs_norm) {
      rep.converged = true;
      break;
    }
    double beta = res_norm;
    std::vector<BlockTTVector> v;
    v.push_back(block_scale(r, 1.0 / beta));
    const int m = params.restart;
    MatrixXd h = MatrixXd::Zero(m + 1, m);
    VectorXd g = VectorXd::Zero(m + 1);
    g[0] = beta;
    int kdone = 0;
    bool assembled = false;
    for (int k = 0; k < m; ++k) {
      BlockTTVector w = op(v[k]);
      // modified Gram-Schmidt with one reorthogonalization pass
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= k; ++i) {
          double hik = block_inner(w, v[i]);
          h(i, k) += hik;
          if (hik != 0.0) w = block_axpy(-hik, v[i], w, 0.0);
        }
        w = block_round(w, rtol);
      }
      h(k + 1, k) = w.norm();
      for (int i = 0; i < w.num_blocks(); ++i)
        rep.max_rank_seen = std::max(rep.max_rank_seen, w.block(i).max_rank());
      MatrixXd hk = h.topLeftCorner(k + 2, k + 1);
      VectorXd y = hk.colPivHouseholderQr().solve(g.head(k + 2));
      double est = (g.head(k + 2) - hk * y).norm();
      ++rep.iterations;
      kdone = k + 1;
      if (est <= params.tol * rhs_norm || h(k + 1, k) <= 1e-14 * rhs_norm) {
        for (int i = 0; i <= k; ++i)
          if (y[i] != 0.0) x = block_axpy(y[i], v[i], x, rtol);
        assembled = true;
        break;
      }
      v.push_back(block_scale(w, 1.0 / h(k + 1, k)));
    }
    if (!assembled && kdone > 0) {
      MatrixXd hk = h.topLeftCorner(kdone + 1, kdone);
      VectorXd y = hk.colPivHouseholderQr().solve(g.head(kdone + 1));
      for (int i = 0; i < kdone; ++i)
        if (y[i] != 0.0) x = block_axpy(y[i], v[i], x, rtol);
    }
  }
  {
    BlockTTVector r = block_round(block_axpy(-1.0, op(x), rhs, rtol), rtol);
    rep.achieved_residual = r.norm() / rhs_norm;
    rep.residual_history.push_back(rep.achieved_residual);
    rep.converged = rep.achieved_residual <= params.tol;
  }
  return {x, rep};
}

}  // namespace ttiga
