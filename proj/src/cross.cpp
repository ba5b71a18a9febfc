#include "ttiga/cross.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ttiga {

namespace {

long total_size(const std::vector<int>& shape) {
  long n = 1;
  for (int s : shape) n *= s;
  return n;
}

// Greedy maxvol row selection on a tall orthonormal-ish matrix: returns
// a.cols() row indices with near-maximal submatrix volume.
std::vector<int> maxvol_rows(const MatrixXd& a) {
  const int r = static_cast<int>(a.cols());
  Eigen::FullPivLU<MatrixXd> flu(a);
  std::vector<int> rows(r);
  {
    auto perm = flu.permutationP().indices();
    for (int i = 0; i < r; ++i) rows[i] = perm[i];
  }
  MatrixXd sub(r, r);
  for (int it = 0; it < 100; ++it) {
    for (int i = 0; i < r; ++i) sub.row(i) = a.row(rows[i]);
    // b = a * sub^{-1}, so b restricted to the chosen rows is the identity
    Eigen::PartialPivLU<MatrixXd> slu(sub.transpose());
    MatrixXd b = slu.solve(a.transpose()).transpose();
    int bi = -1, bj = -1;
    double best = 1.0 + 1e-8;
    for (int i = 0; i < b.rows(); ++i)
      for (int j = 0; j < r; ++j)
        if (std::abs(b(i, j)) > best) {
          best = std::abs(b(i, j));
          bi = i;
          bj = j;
        }
    if (bi < 0) break;
    rows[bj] = bi;
  }
  return rows;
}

// Rank-revealing orthonormal column basis.
MatrixXd ortho_basis(const MatrixXd& m, double rel_tol) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(m);
  qr.setThreshold(rel_tol);
  int rk = std::max<int>(1, static_cast<int>(qr.rank()));
  rk = std::min<int>(rk, std::min(m.rows(), m.cols()));
  return qr.householderQ() * MatrixXd::Identity(m.rows(), rk);
}

using IndexTuple = std::vector<int>;

IndexTuple cat(const IndexTuple& l, int i, const IndexTuple& r) {
  IndexTuple t;
  t.reserve(l.size() + 1 + r.size());
  t.insert(t.end(), l.begin(), l.end());
  t.push_back(i);
  t.insert(t.end(), r.begin(), r.end());
  return t;
}

MatrixXd sample_block(const TensorSampler& f, const std::vector<IndexTuple>& lefts, int n,
                      const std::vector<IndexTuple>& rights, long& evals) {
  MatrixXd m(static_cast<long>(lefts.size()) * n, rights.size());
  for (size_t c = 0; c < rights.size(); ++c)
    for (int i = 0; i < n; ++i)
      for (size_t l = 0; l < lefts.size(); ++l) {
        m(l + lefts.size() * i, c) = f(cat(lefts[l], i, rights[c]));
        ++evals;
      }
  return m;
}

}  // namespace

TTVector tt_cross(const TensorSampler& f, const std::vector<int>& shape, const CrossOptions& opts,
                  CrossReport* report) {
  const int D = static_cast<int>(shape.size());
  require(D >= 1, "tt_cross: empty shape");
  for (int s : shape) require(s > 0, "tt_cross: zero mode size");

  CrossReport rep;
  if (total_size(shape) <= opts.dense_cap) {
    DenseTensor t(shape);
    std::vector<int> idx(D, 0);
    for (long off = 0; off < t.size(); ++off) {
      t.data()[off] = f(idx);
      ++rep.evaluations;
      for (int d = 0; d < D; ++d) {
        if (++idx[d] < shape[d]) break;
        idx[d] = 0;
      }
    }
    TTVector out = tt_from_dense(t, opts.tol);
    rep.converged = true;
    if (report) *report = rep;
    return out;
  }

  std::mt19937_64 rng(opts.seed);
  auto random_tuple = [&](int from, int to) {
    IndexTuple t;
    for (int d = from; d < to; ++d)
      t.push_back(std::uniform_int_distribution<int>(0, shape[d] - 1)(rng));
    return t;
  };

  std::vector<std::vector<IndexTuple>> lefts(D), rights(D);
  lefts[0] = {IndexTuple{}};
  rights[D - 1] = {IndexTuple{}};
  for (int d = 0; d + 1 < D; ++d)
    for (int k = 0; k < std::min(2, opts.max_rank); ++k)
      rights[d].push_back(random_tuple(d + 1, D));

  // validation samples
  const int n_val = 200;
  std::vector<IndexTuple> val_idx;
  VectorXd val(n_val);
  for (int k = 0; k < n_val; ++k) {
    val_idx.push_back(random_tuple(0, D));
    val[k] = f(val_idx.back());
    ++rep.evaluations;
  }
  const double val_scale = std::max(val.cwiseAbs().maxCoeff(), 1e-300);

  TTVector best;
  double best_res = std::numeric_limits<double>::infinity();

  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    rep.sweeps = sweep + 1;

    // left-to-right: refresh left index sets via maxvol on orthonormal bases
    for (int d = 0; d + 1 < D; ++d) {
      MatrixXd m = sample_block(f, lefts[d], shape[d], rights[d], rep.evaluations);
      MatrixXd q = ortho_basis(m, 1e-13);
      std::vector<int> sel = maxvol_rows(q);
      std::vector<IndexTuple> nl;
      for (int rr : sel) {
        int l = rr % static_cast<int>(lefts[d].size());
        int i = rr / static_cast<int>(lefts[d].size());
        IndexTuple t = lefts[d][l];
        t.push_back(i);
        nl.push_back(std::move(t));
      }
      lefts[d + 1] = std::move(nl);
    }
    // right-to-left: refresh right index sets (restores column nesting)
    for (int d = D - 1; d > 0; --d) {
      MatrixXd m = sample_block(f, lefts[d], shape[d], rights[d], rep.evaluations);
      MatrixXd mt(static_cast<long>(shape[d]) * rights[d].size(), lefts[d].size());
      for (long c = 0; c < static_cast<long>(rights[d].size()); ++c)
        for (int i = 0; i < shape[d]; ++i)
          for (long l = 0; l < static_cast<long>(lefts[d].size()); ++l)
            mt(i + static_cast<long>(shape[d]) * c, l) = m(l + lefts[d].size() * i, c);
      MatrixXd q = ortho_basis(mt, 1e-13);
      std::vector<int> sel = maxvol_rows(q);
      std::vector<IndexTuple> nr;
      for (int rr : sel) {
        int i = rr % shape[d];
        int c = rr / shape[d];
        IndexTuple t;
        t.push_back(i);
        t.insert(t.end(), rights[d][c].begin(), rights[d][c].end());
        nr.push_back(std::move(t));
      }
      rights[d - 1] = std::move(nr);
    }

    // assembly pass: interpolation cores from stable Q-based cross formula,
    // rebuilding the left pivots in the same sweep
    std::vector<Core3> cores;
    for (int d = 0; d < D; ++d) {
      MatrixXd m = sample_block(f, lefts[d], shape[d], rights[d], rep.evaluations);
      MatrixXd coeff;
      if (d + 1 < D) {
        MatrixXd q = ortho_basis(m, 1e-13);
        std::vector<int> sel = maxvol_rows(q);
        MatrixXd pivot(q.cols(), q.cols());
        for (int i = 0; i < q.cols(); ++i) pivot.row(i) = q.row(sel[i]);
        coeff = Eigen::PartialPivLU<MatrixXd>(pivot.transpose())
                    .solve(q.transpose())
                    .transpose();  // q * pivot^{-1}
        std::vector<IndexTuple> nl;
        for (int rr : sel) {
          int l = rr % static_cast<int>(lefts[d].size());
          int i = rr / static_cast<int>(lefts[d].size());
          IndexTuple t = lefts[d][l];
          t.push_back(i);
          nl.push_back(std::move(t));
        }
        lefts[d + 1] = std::move(nl);
      } else {
        coeff = m;
      }
      Core3 c(static_cast<int>(lefts[d].size()), shape[d], static_cast<int>(coeff.cols()));
      c.data = Eigen::Map<const VectorXd>(coeff.data(), coeff.size());
      cores.push_back(std::move(c));
    }
    TTVector cand(std::move(cores));

    double err = 0.0;
    for (int k = 0; k < n_val; ++k) {
      MatrixXd v = MatrixXd::Ones(1, 1);
      for (int d = 0; d < D; ++d) v = v * cand.core(d).slice(val_idx[k][d]);
      if (!std::isfinite(v(0, 0))) {
        err = std::numeric_limits<double>::infinity();
        break;
      }
      err = std::max(err, std::abs(v(0, 0) - val[k]));
    }
    double res = err / val_scale;
    if (std::isfinite(res) && res < best_res) {
      best_res = res;
      best = cand;
    }
    if (best_res <= opts.tol) {
      rep.converged = true;
      break;
    }
    // enrich the right sets; mode-size products cap the useful rank
    for (int d = 0; d + 1 < D; ++d) {
      long cap = std::min<long>(opts.max_rank, total_size({shape.begin() + d + 1, shape.end()}));
      int grow = static_cast<int>(std::min<long>(opts.kick, cap - static_cast<long>(rights[d].size())));
      for (int k = 0; k < grow; ++k) rights[d].push_back(random_tuple(d + 1, D));
    }
  }

  rep.residual = best_res;
  if (report) *report = rep;
  if (best.order() == 0) throw std::runtime_error("tt_cross: failed to build an approximation");
  if (!rep.converged && best_res > std::max(1e-6, 100 * opts.tol))
    throw std::runtime_error("tt_cross: sampling failed to converge (residual " +
                             std::to_string(best_res) + ")");
  return tt_round(best, opts.tol * 0.1);
}

}  // namespace ttiga
