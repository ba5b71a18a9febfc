#include "ttiga/tt.hpp"

#include <algorithm>
#include <cmath>

namespace ttiga {

namespace {

// Truncation rank for a singular value vector: keep the shortest head whose
// discarded tail has Frobenius norm <= delta. Always keeps at least one.
int truncation_rank(const VectorXd& sv, double delta) {
  int r = static_cast<int>(sv.size());
  double tail = 0.0;
  while (r > 1) {
    double t = tail + sv[r - 1] * sv[r - 1];
    if (std::sqrt(t) > delta) break;
    tail = t;
    --r;
  }
  return r;
}

// Flips singular vector pairs so the first entry of u with |u_i| > threshold
// is positive; keeps golden tests bit-stable across LAPACK variants.
void fix_svd_signs(MatrixXd& u, MatrixXd& v) {
  for (int c = 0; c < u.cols(); ++c) {
    double lead = 0.0;
    for (int i = 0; i < u.rows(); ++i) {
      if (std::abs(u(i, c)) > 1e-14) {
        lead = u(i, c);
        break;
      }
    }
    if (lead < 0.0) {
      u.col(c) *= -1.0;
      if (c < v.cols()) v.col(c) *= -1.0;
    }
  }
}

struct ThinSvd {
  MatrixXd u;
  VectorXd s;
  MatrixXd v;
};

ThinSvd thin_svd(const MatrixXd& m) {
  ThinSvd out;
  if (std::min(m.rows(), m.cols()) > 32) {
    Eigen::BDCSVD<MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out = {svd.matrixU(), svd.singularValues(), svd.matrixV()};
  } else {
    Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out = {svd.matrixU(), svd.singularValues(), svd.matrixV()};
  }
  fix_svd_signs(out.u, out.v);
  return out;
}

}  // namespace

// ---- DenseTensor ----

DenseTensor::DenseTensor(std::vector<int> shape) : shape_(std::move(shape)) {
  long n = 1;
  for (int s : shape_) {
    require(s > 0, "DenseTensor: zero mode size");
    n *= s;
  }
  data_ = VectorXd::Zero(n);
}

DenseTensor::DenseTensor(std::vector<int> shape, VectorXd entries)
    : shape_(std::move(shape)), data_(std::move(entries)) {
  long n = 1;
  for (int s : shape_) {
    require(s > 0, "DenseTensor: zero mode size");
    n *= s;
  }
  require(n == data_.size(), "DenseTensor: entry count does not match shape");
}

long DenseTensor::offset(const std::vector<int>& idx) const {
  require(idx.size() == shape_.size(), "DenseTensor: index order mismatch");
  long off = 0, stride = 1;
  for (size_t d = 0; d < shape_.size(); ++d) {
    require(idx[d] >= 0 && idx[d] < shape_[d], "DenseTensor: index out of range");
    off += stride * idx[d];
    stride *= shape_[d];
  }
  return off;
}

// ---- cores ----

void Core3::set_slice(int i, const MatrixXd& m) {
  for (int b = 0; b < r1; ++b)
    for (int a = 0; a < r0; ++a) at(a, i, b) = m(a, b);
}

void Core4::set_slice(int i, int j, const MatrixXd& v) {
  for (int b = 0; b < r1; ++b)
    for (int a = 0; a < r0; ++a) at(a, i, j, b) = v(a, b);
}

// ---- TTVector ----

TTVector::TTVector(std::vector<Core3> cores) : cores_(std::move(cores)) { check_consistent(); }

void TTVector::check_consistent() const {
  require(!cores_.empty(), "TTVector: no cores");
  require(cores_.front().r0 == 1 && cores_.back().r1 == 1, "TTVector: boundary ranks must be 1");
  for (size_t d = 0; d + 1 < cores_.size(); ++d)
    require(cores_[d].r1 == cores_[d + 1].r0, "TTVector: rank chain broken");
  for (const auto& c : cores_) require(c.n > 0 && c.r0 > 0 && c.r1 > 0, "TTVector: empty core");
}

std::vector<int> TTVector::shape() const {
  std::vector<int> s(cores_.size());
  for (size_t d = 0; d < cores_.size(); ++d) s[d] = cores_[d].n;
  return s;
}

std::vector<int> TTVector::ranks() const {
  std::vector<int> r;
  for (size_t d = 0; d + 1 < cores_.size(); ++d) r.push_back(cores_[d].r1);
  return r;
}

int TTVector::max_rank() const {
  int m = 1;
  for (const auto& c : cores_) m = std::max(m, std::max(c.r0, c.r1));
  return m;
}

long TTVector::dense_size() const {
  long n = 1;
  for (const auto& c : cores_) n *= c.n;
  return n;
}

TTVector TTVector::zero(const std::vector<int>& shape) {
  std::vector<Core3> cores;
  for (int n : shape) cores.emplace_back(1, n, 1);
  return TTVector(std::move(cores));
}

TTVector TTVector::rank_one(const std::vector<VectorXd>& factors) {
  require(!factors.empty(), "rank_one: no factors");
  std::vector<Core3> cores;
  for (const auto& f : factors) {
    Core3 c(1, static_cast<int>(f.size()), 1);
    c.data = f;
    cores.push_back(std::move(c));
  }
  return TTVector(std::move(cores));
}

TTVector TTVector::unit(const std::vector<int>& shape, const std::vector<int>& idx) {
  require(shape.size() == idx.size(), "unit: order mismatch");
  std::vector<VectorXd> factors;
  for (size_t d = 0; d < shape.size(); ++d) {
    VectorXd e = VectorXd::Zero(shape[d]);
    e[idx[d]] = 1.0;
    factors.push_back(e);
  }
  return rank_one(factors);
}

TTVector TTVector::random(const std::vector<int>& shape, const std::vector<int>& ranks,
                          std::mt19937_64& rng) {
  require(ranks.size() + 1 == shape.size(), "random: need D-1 interior ranks");
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<Core3> cores;
  int D = static_cast<int>(shape.size());
  for (int d = 0; d < D; ++d) {
    int r0 = d == 0 ? 1 : ranks[d - 1];
    int r1 = d == D - 1 ? 1 : ranks[d];
    Core3 c(r0, shape[d], r1);
    for (long i = 0; i < c.data.size(); ++i) c.data[i] = dist(rng);
    cores.push_back(std::move(c));
  }
  return TTVector(std::move(cores));
}

double TTVector::norm() const {
  if (order() == 1) return cores_[0].data.norm();
  // orthogonalize for a cancellation-free norm
  return tt_orthogonalize_right(*this).core(0).data.norm();
}

// ---- TTOperator ----

TTOperator::TTOperator(std::vector<Core4> cores) : cores_(std::move(cores)) { check_consistent(); }

void TTOperator::check_consistent() const {
  require(!cores_.empty(), "TTOperator: no cores");
  require(cores_.front().r0 == 1 && cores_.back().r1 == 1, "TTOperator: boundary ranks must be 1");
  for (size_t d = 0; d + 1 < cores_.size(); ++d)
    require(cores_[d].r1 == cores_[d + 1].r0, "TTOperator: rank chain broken");
}

std::vector<int> TTOperator::row_shape() const {
  std::vector<int> s(cores_.size());
  for (size_t d = 0; d < cores_.size(); ++d) s[d] = cores_[d].m;
  return s;
}

std::vector<int> TTOperator::col_shape() const {
  std::vector<int> s(cores_.size());
  for (size_t d = 0; d < cores_.size(); ++d) s[d] = cores_[d].n;
  return s;
}

std::vector<int> TTOperator::ranks() const {
  std::vector<int> r;
  for (size_t d = 0; d + 1 < cores_.size(); ++d) r.push_back(cores_[d].r1);
  return r;
}

int TTOperator::max_rank() const {
  int m = 1;
  for (const auto& c : cores_) m = std::max(m, std::max(c.r0, c.r1));
  return m;
}

TTOperator TTOperator::identity(const std::vector<int>& shape) {
  std::vector<Core4> cores;
  for (int n : shape) {
    Core4 c(1, n, n, 1);
    for (int i = 0; i < n; ++i) c.at(0, i, i, 0) = 1.0;
    cores.push_back(std::move(c));
  }
  return TTOperator(std::move(cores));
}

TTOperator TTOperator::kronecker(const std::vector<MatrixXd>& factors) {
  require(!factors.empty(), "kronecker: no factors");
  std::vector<Core4> cores;
  for (const auto& f : factors) {
    Core4 c(1, static_cast<int>(f.rows()), static_cast<int>(f.cols()), 1);
    for (int j = 0; j < f.cols(); ++j)
      for (int i = 0; i < f.rows(); ++i) c.at(0, i, j, 0) = f(i, j);
    cores.push_back(std::move(c));
  }
  return TTOperator(std::move(cores));
}

TTOperator TTOperator::transpose() const {
  std::vector<Core4> cores;
  for (const auto& c : cores_) {
    Core4 t(c.r0, c.n, c.m, c.r1);
    for (int b = 0; b < c.r1; ++b)
      for (int j = 0; j < c.n; ++j)
        for (int i = 0; i < c.m; ++i)
          for (int a = 0; a < c.r0; ++a) t.at(a, j, i, b) = c.at(a, i, j, b);
    cores.push_back(std::move(t));
  }
  return TTOperator(std::move(cores));
}

namespace {

// Views an operator core as an order-3 core over the merged index (i + m*j).
Core3 as_core3(const Core4& c) {
  Core3 out(c.r0, c.m * c.n, c.r1);
  out.data = c.data;
  return out;
}

Core4 as_core4(const Core3& c, int m, int n) {
  require(c.n == m * n, "as_core4: mode size mismatch");
  Core4 out(c.r0, m, n, c.r1);
  out.data = c.data;
  return out;
}

TTVector op_as_vector(const TTOperator& a) {
  std::vector<Core3> cores;
  for (int d = 0; d < a.order(); ++d) cores.push_back(as_core3(a.core(d)));
  return TTVector(std::move(cores));
}

TTOperator vector_as_op(const TTVector& x, const std::vector<int>& rows,
                        const std::vector<int>& cols) {
  std::vector<Core4> cores;
  for (int d = 0; d < x.order(); ++d) cores.push_back(as_core4(x.core(d), rows[d], cols[d]));
  return TTOperator(std::move(cores));
}

}  // namespace

double TTOperator::norm() const { return op_as_vector(*this).norm(); }

// ---- CanonicalSum ----

void CanonicalSum::check_consistent() const {
  require(!terms.empty(), "CanonicalSum: empty");
  const auto& first = terms.front();
  for (const auto& t : terms) {
    require(t.size() == first.size(), "CanonicalSum: term order mismatch");
    for (size_t d = 0; d < t.size(); ++d)
      require(t[d].rows() == first[d].rows() && t[d].cols() == first[d].cols(),
              "CanonicalSum: factor shape mismatch");
  }
}

// ---- conversions ----

TTVector tt_from_dense(const DenseTensor& t, double tol) {
  require(tol >= 0.0, "tt_from_dense: negative tolerance");
  const int D = t.order();
  require(D >= 1, "tt_from_dense: empty tensor");
  const double nrm = t.norm();
  const double delta =
      std::max(nrm * (D > 1 ? tol / std::sqrt(static_cast<double>(D - 1)) : tol), nrm * 5e-15);

  std::vector<Core3> cores;
  MatrixXd rest = Eigen::Map<const MatrixXd>(t.data().data(), t.shape()[0], t.size() / t.shape()[0]);
  int r_prev = 1;
  for (int d = 0; d < D - 1; ++d) {
    // rest holds (r_prev * n_d) rows after the reshape below
    Eigen::Map<const MatrixXd> unfolding(rest.data(), static_cast<long>(r_prev) * t.shape()[d],
                                         rest.size() / (static_cast<long>(r_prev) * t.shape()[d]));
    ThinSvd svd = thin_svd(unfolding);
    int r = truncation_rank(svd.s, delta);
    if (svd.s[0] == 0.0) r = 1;  // exactly zero tensor
    Core3 c(r_prev, t.shape()[d], r);
    Eigen::Map<MatrixXd>(c.data.data(), unfolding.rows(), r) = svd.u.leftCols(r);
    cores.push_back(std::move(c));
    MatrixXd next = svd.s.head(r).asDiagonal() * svd.v.leftCols(r).transpose();
    rest = next;  // r x (remaining modes product)
    r_prev = r;
  }
  Core3 last(r_prev, t.shape()[D - 1], 1);
  Eigen::Map<MatrixXd>(last.data.data(), r_prev, t.shape()[D - 1]) = rest;
  cores.push_back(std::move(last));
  return TTVector(std::move(cores));
}

DenseTensor tt_to_dense(const TTVector& x, long max_entries) {
  long n = x.dense_size();
  if (n > max_entries) {
    throw std::runtime_error("tt_to_dense: tensor exceeds the dense-oracle cap (" +
                             std::to_string(n) + " > " + std::to_string(max_entries) + ")");
  }
  // Accumulate left-to-right: rows = dense prefix, cols = current rank.
  MatrixXd acc = MatrixXd::Ones(1, 1);
  for (int d = 0; d < x.order(); ++d) {
    const Core3& c = x.core(d);
    // acc (P x r0) * right-unfolding (r0 x n*r1) -> (P x n*r1) -> reshape (P*n x r1)
    MatrixXd grown = acc * c.right();
    acc = Eigen::Map<const MatrixXd>(grown.data(), grown.rows() * c.n, c.r1);
  }
  return DenseTensor(x.shape(), VectorXd(Eigen::Map<const VectorXd>(acc.data(), acc.size())));
}

TTOperator canonical_to_tt(const CanonicalSum& s) {
  s.check_consistent();
  const int D = s.order();
  const int R = static_cast<int>(s.terms.size());
  std::vector<Core4> cores;
  for (int d = 0; d < D; ++d) {
    int m = static_cast<int>(s.terms[0][d].rows());
    int n = static_cast<int>(s.terms[0][d].cols());
    int r0 = d == 0 ? 1 : R;
    int r1 = d == D - 1 ? 1 : R;
    Core4 c(r0, m, n, r1);
    for (int r = 0; r < R; ++r) {
      int a = d == 0 ? 0 : r;
      int b = d == D - 1 ? 0 : r;
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < m; ++i) c.at(a, i, j, b) = s.terms[r][d](i, j);
    }
    cores.push_back(std::move(c));
  }
  return TTOperator(std::move(cores));
}

TTVector canonical_to_tt_vector(const std::vector<std::vector<VectorXd>>& terms) {
  require(!terms.empty(), "canonical_to_tt_vector: empty");
  const int D = static_cast<int>(terms.front().size());
  const int R = static_cast<int>(terms.size());
  std::vector<Core3> cores;
  for (int d = 0; d < D; ++d) {
    int n = static_cast<int>(terms[0][d].size());
    int r0 = d == 0 ? 1 : R;
    int r1 = d == D - 1 ? 1 : R;
    Core3 c(r0, n, r1);
    for (int r = 0; r < R; ++r) {
      require(static_cast<int>(terms[r][d].size()) == n, "canonical_to_tt_vector: factor mismatch");
      int a = d == 0 ? 0 : r;
      int b = d == D - 1 ? 0 : r;
      for (int i = 0; i < n; ++i) c.at(a, i, b) = terms[r][d][i];
    }
    cores.push_back(std::move(c));
  }
  return TTVector(std::move(cores));
}

// ---- rounding ----

TTVector tt_orthogonalize_right(const TTVector& x) {
  const int D = x.order();
  std::vector<Core3> cores = x.cores();
  for (int d = D - 1; d > 0; --d) {
    Core3& c = cores[d];
    Eigen::HouseholderQR<MatrixXd> qr(c.right().transpose());
    MatrixXd q = qr.householderQ() * MatrixXd::Identity(c.right().cols(),
                                                        std::min(c.right().rows(), c.right().cols()));
    MatrixXd rfac =
        qr.matrixQR().topLeftCorner(q.cols(), c.right().rows()).triangularView<Eigen::Upper>();
    int r_new = static_cast<int>(q.cols());
    Core3 repl(r_new, c.n, c.r1);
    Eigen::Map<MatrixXd>(repl.data.data(), r_new, static_cast<long>(c.n) * c.r1) = q.transpose();
    MatrixXd carry = rfac.transpose();
    Core3& p = cores[d - 1];
    Core3 pn(p.r0, p.n, r_new);
    Eigen::Map<MatrixXd>(pn.data.data(), static_cast<long>(p.r0) * p.n, r_new) = p.left() * carry;
    cores[d] = std::move(repl);
    cores[d - 1] = std::move(pn);
  }
  return TTVector(std::move(cores));
}

TTVector tt_round(const TTVector& x, double tol) {
  require(tol >= 0.0, "tt_round: negative tolerance");
  const int D = x.order();
  if (D == 1) return x;

  std::vector<Core3> cores = tt_orthogonalize_right(x).cores();
  const double nrm = Eigen::Map<const VectorXd>(cores[0].data.data(), cores[0].data.size()).norm();
  const double delta = std::max(nrm * tol / std::sqrt(static_cast<double>(D - 1)), nrm * 5e-15);

  // Left-to-right SVD truncation.
  for (int d = 0; d < D - 1; ++d) {
    Core3& c = cores[d];
    ThinSvd svd = thin_svd(c.left());
    int r = truncation_rank(svd.s, delta);
    if (svd.s[0] == 0.0) r = 1;
    Core3 repl(c.r0, c.n, r);
    Eigen::Map<MatrixXd>(repl.data.data(), c.left().rows(), r) = svd.u.leftCols(r);
    MatrixXd carry = svd.s.head(r).asDiagonal() * svd.v.leftCols(r).transpose();  // r x old r1
    Core3& nx = cores[d + 1];
    Core3 nn(r, nx.n, nx.r1);
    Eigen::Map<MatrixXd>(nn.data.data(), r, static_cast<long>(nx.n) * nx.r1) = carry * nx.right();
    cores[d] = std::move(repl);
    cores[d + 1] = std::move(nn);
  }
  return TTVector(std::move(cores));
}

TTOperator tt_op_round(const TTOperator& A, double tol) {
  TTVector v = tt_round(op_as_vector(A), tol);
  return vector_as_op(v, A.row_shape(), A.col_shape());
}

// ---- arithmetic ----

TTVector tt_add(const TTVector& x, const TTVector& y) {
  require(x.shape() == y.shape(), "tt_add: shape mismatch");
  const int D = x.order();
  if (D == 1) {
    Core3 c(1, x.core(0).n, 1);
    c.data = x.core(0).data + y.core(0).data;
    return TTVector({c});
  }
  std::vector<Core3> cores;
  for (int d = 0; d < D; ++d) {
    const Core3& a = x.core(d);
    const Core3& b = y.core(d);
    int r0 = d == 0 ? 1 : a.r0 + b.r0;
    int r1 = d == D - 1 ? 1 : a.r1 + b.r1;
    Core3 c(r0, a.n, r1);
    for (int i = 0; i < a.n; ++i) {
      MatrixXd m = MatrixXd::Zero(r0, r1);
      if (d == 0) {
        m.block(0, 0, 1, a.r1) = a.slice(i);
        m.block(0, a.r1, 1, b.r1) = b.slice(i);
      } else if (d == D - 1) {
        m.block(0, 0, a.r0, 1) = a.slice(i);
        m.block(a.r0, 0, b.r0, 1) = b.slice(i);
      } else {
        m.block(0, 0, a.r0, a.r1) = a.slice(i);
        m.block(a.r0, a.r1, b.r0, b.r1) = b.slice(i);
      }
      c.set_slice(i, m);
    }
    cores.push_back(std::move(c));
  }
  return TTVector(std::move(cores));
}

TTVector tt_scale(const TTVector& x, double s) {
  std::vector<Core3> cores = x.cores();
  cores[0].data *= s;
  return TTVector(std::move(cores));
}

double tt_inner(const TTVector& x, const TTVector& y) {
  require(x.shape() == y.shape(), "tt_inner: shape mismatch");
  MatrixXd v = MatrixXd::Ones(1, 1);
  for (int d = 0; d < x.order(); ++d) {
    const Core3& a = x.core(d);
    const Core3& b = y.core(d);
    // t = v^T-contracted y-core: (rx0 x n*ry1), reshape to (rx0*n x ry1) is free
    MatrixXd t = v * b.right();
    Eigen::Map<const MatrixXd> tmat(t.data(), static_cast<long>(a.r0) * a.n, b.r1);
    v = a.left().transpose() * tmat;  // rx1 x ry1
  }
  return v(0, 0);
}

TTVector tt_hadamard(const TTVector& x, const TTVector& y) {
  require(x.shape() == y.shape(), "tt_hadamard: shape mismatch");
  std::vector<Core3> cores;
  const int D = x.order();
  for (int d = 0; d < D; ++d) {
    const Core3& a = x.core(d);
    const Core3& b = y.core(d);
    Core3 c(a.r0 * b.r0, a.n, a.r1 * b.r1);
    for (int i = 0; i < a.n; ++i) {
      MatrixXd m(c.r0, c.r1);
      // kron with x-index fastest, mirroring the rank pairing used in tt_apply
      for (int bb = 0; bb < b.r1; ++bb)
        for (int ab = 0; ab < a.r1; ++ab)
          for (int ba = 0; ba < b.r0; ++ba)
            for (int aa = 0; aa < a.r0; ++aa)
              m(aa + a.r0 * ba, ab + a.r1 * bb) = a.slice(i)(aa, ab) * b.slice(i)(ba, bb);
      c.set_slice(i, m);
    }
    cores.push_back(std::move(c));
  }
  return TTVector(std::move(cores));
}

TTVector tt_scale_mode(const TTVector& x, int d, const VectorXd& w) {
  require(d >= 0 && d < x.order(), "tt_scale_mode: bad mode");
  require(w.size() == x.core(d).n, "tt_scale_mode: weight length mismatch");
  std::vector<Core3> cores = x.cores();
  Core3& c = cores[d];
  for (int i = 0; i < c.n; ++i)
    for (int b = 0; b < c.r1; ++b)
      for (int a = 0; a < c.r0; ++a) c.at(a, i, b) *= w[i];
  return TTVector(std::move(cores));
}

TTVector tt_apply_mode(const TTVector& x, int d, const MatrixXd& m) {
  require(d >= 0 && d < x.order(), "tt_apply_mode: bad mode");
  const Core3& c = x.core(d);
  require(m.cols() == c.n, "tt_apply_mode: matrix width mismatch");
  Core3 repl(c.r0, static_cast<int>(m.rows()), c.r1);
  for (int i = 0; i < repl.n; ++i) {
    MatrixXd s = MatrixXd::Zero(c.r0, c.r1);
    for (int j = 0; j < c.n; ++j)
      if (m(i, j) != 0.0) s += m(i, j) * c.slice(j);
    repl.set_slice(i, s);
  }
  std::vector<Core3> cores = x.cores();
  cores[d] = std::move(repl);
  return TTVector(std::move(cores));
}

TTVector tt_apply(const TTOperator& A, const TTVector& x, double tol) {
  require(A.col_shape() == x.shape(), "tt_apply: operator/vector shape mismatch");
  const int D = x.order();
  std::vector<Core3> cores;
  for (int d = 0; d < D; ++d) {
    const Core4& a = A.core(d);
    const Core3& v = x.core(d);
    Core3 c(a.r0 * v.r0, a.m, a.r1 * v.r1);
    for (int i = 0; i < a.m; ++i) {
      MatrixXd m = MatrixXd::Zero(c.r0, c.r1);
      for (int j = 0; j < a.n; ++j) {
        auto aslice = a.slice(i, j);
        auto vslice = v.slice(j);
        for (int bb = 0; bb < v.r1; ++bb)
          for (int ab = 0; ab < a.r1; ++ab)
            for (int ba = 0; ba < v.r0; ++ba)
              for (int aa = 0; aa < a.r0; ++aa)
                m(aa + a.r0 * ba, ab + a.r1 * bb) += aslice(aa, ab) * vslice(ba, bb);
      }
      c.set_slice(i, m);
    }
    cores.push_back(std::move(c));
  }
  TTVector y(std::move(cores));
  return tol > 0.0 ? tt_round(y, tol) : y;
}

TTOperator tt_compose(const TTOperator& A, const TTOperator& B, double tol) {
  require(A.col_shape() == B.row_shape(), "tt_compose: inner shape mismatch");
  const int D = A.order();
  std::vector<Core4> cores;
  for (int d = 0; d < D; ++d) {
    const Core4& a = A.core(d);
    const Core4& b = B.core(d);
    Core4 c(a.r0 * b.r0, a.m, b.n, a.r1 * b.r1);
    for (int i = 0; i < a.m; ++i) {
      for (int k = 0; k < b.n; ++k) {
        MatrixXd m = MatrixXd::Zero(c.r0, c.r1);
        for (int j = 0; j < a.n; ++j) {
          auto aslice = a.slice(i, j);
          auto bslice = b.slice(j, k);
          for (int bb = 0; bb < b.r1; ++bb)
            for (int ab = 0; ab < a.r1; ++ab)
              for (int ba = 0; ba < b.r0; ++ba)
                for (int aa = 0; aa < a.r0; ++aa)
                  m(aa + a.r0 * ba, ab + a.r1 * bb) += aslice(aa, ab) * bslice(ba, bb);
        }
        c.set_slice(i, k, m);
      }
    }
    cores.push_back(std::move(c));
  }
  TTOperator out(std::move(cores));
  return tol > 0.0 ? tt_op_round(out, tol) : out;
}

TTOperator tt_op_add(const TTOperator& A, const TTOperator& B) {
  require(A.row_shape() == B.row_shape() && A.col_shape() == B.col_shape(),
          "tt_op_add: shape mismatch");
  TTVector s = tt_add(op_as_vector(A), op_as_vector(B));
  return vector_as_op(s, A.row_shape(), A.col_shape());
}

TTOperator tt_op_scale(const TTOperator& A, double s) {
  TTVector v = tt_scale(op_as_vector(A), s);
  return vector_as_op(v, A.row_shape(), A.col_shape());
}

// ---- reshaping ----

TTVector tt_merge_modes(const TTVector& x, int d) {
  require(d >= 0 && d + 1 < x.order(), "tt_merge_modes: invalid mode index");
  const Core3& a = x.core(d);
  const Core3& b = x.core(d + 1);
  Core3 merged(a.r0, a.n * b.n, b.r1);
  MatrixXd prod = a.left() * b.right();  // (r0*n1) x (n2*r1), flat layout matches merged core
  merged.data = Eigen::Map<const VectorXd>(prod.data(), prod.size());
  std::vector<Core3> cores;
  for (int k = 0; k < x.order(); ++k) {
    if (k == d) cores.push_back(merged);
    else if (k != d + 1) cores.push_back(x.core(k));
  }
  return TTVector(std::move(cores));
}

TTVector tt_split_mode(const TTVector& x, int d, int n1, int n2) {
  require(d >= 0 && d < x.order(), "tt_split_mode: invalid mode index");
  const Core3& c = x.core(d);
  require(c.n == n1 * n2, "tt_split_mode: sizes do not factor the mode");
  // unfolding (r0*n1) x (n2*r1) of the core, exact SVD split
  Eigen::Map<const MatrixXd> unf(c.data.data(), static_cast<long>(c.r0) * n1,
                                 static_cast<long>(n2) * c.r1);
  ThinSvd svd = thin_svd(unf);
  double nrm = svd.s.norm();
  int r = truncation_rank(svd.s, nrm * 1e-14);
  if (svd.s.size() == 0 || svd.s[0] == 0.0) r = 1;
  Core3 first(c.r0, n1, r);
  Eigen::Map<MatrixXd>(first.data.data(), unf.rows(), r) = svd.u.leftCols(r);
  Core3 second(r, n2, c.r1);
  Eigen::Map<MatrixXd>(second.data.data(), r, unf.cols()) =
      MatrixXd(svd.s.head(r).asDiagonal() * svd.v.leftCols(r).transpose());
  std::vector<Core3> cores;
  for (int k = 0; k < x.order(); ++k) {
    if (k == d) {
      cores.push_back(first);
      cores.push_back(second);
    } else {
      cores.push_back(x.core(k));
    }
  }
  return TTVector(std::move(cores));
}

// ---- block vectors ----

BlockTTVector::BlockTTVector(std::vector<int> keys, std::vector<TTVector> blocks)
    : keys_(std::move(keys)), blocks_(std::move(blocks)) {
  require(keys_.size() == blocks_.size(), "BlockTTVector: key/block count mismatch");
  for (size_t i = 0; i < keys_.size(); ++i)
    for (size_t j = i + 1; j < keys_.size(); ++j)
      require(keys_[i] != keys_[j], "BlockTTVector: duplicate block key");
}

double BlockTTVector::norm() const { return std::sqrt(std::max(0.0, block_inner(*this, *this))); }

BlockTTVector block_add(const BlockTTVector& x, const BlockTTVector& y) {
  require(x.keys() == y.keys(), "block_add: key mismatch");
  std::vector<TTVector> blocks;
  for (int i = 0; i < x.num_blocks(); ++i) blocks.push_back(tt_add(x.block(i), y.block(i)));
  return BlockTTVector(x.keys(), std::move(blocks));
}

BlockTTVector block_scale(const BlockTTVector& x, double s) {
  std::vector<TTVector> blocks;
  for (int i = 0; i < x.num_blocks(); ++i) blocks.push_back(tt_scale(x.block(i), s));
  return BlockTTVector(x.keys(), std::move(blocks));
}

BlockTTVector block_axpy(double a, const BlockTTVector& x, const BlockTTVector& y,
                         double round_tol) {
  require(x.keys() == y.keys(), "block_axpy: key mismatch");
  std::vector<TTVector> blocks;
  for (int i = 0; i < x.num_blocks(); ++i) {
    TTVector s = tt_add(tt_scale(x.block(i), a), y.block(i));
    blocks.push_back(round_tol > 0.0 ? tt_round(s, round_tol) : s);
  }
  return BlockTTVector(x.keys(), std::move(blocks));
}

double block_inner(const BlockTTVector& x, const BlockTTVector& y) {
  require(x.keys() == y.keys(), "block_inner: key mismatch");
  double s = 0.0;
  for (int i = 0; i < x.num_blocks(); ++i) s += tt_inner(x.block(i), y.block(i));
  return s;
}

BlockTTVector block_round(const BlockTTVector& x, double tol) {
  std::vector<TTVector> blocks;
  for (int i = 0; i < x.num_blocks(); ++i) blocks.push_back(tt_round(x.block(i), tol));
  return BlockTTVector(x.keys(), std::move(blocks));
}

}  // namespace ttiga
