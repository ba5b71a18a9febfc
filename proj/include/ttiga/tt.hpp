#pragma once

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ttiga {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

/// Dense D-way tensor, lexicographic storage with mode 1 fastest-varying.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(std::vector<int> shape);
  DenseTensor(std::vector<int> shape, VectorXd entries);

  const std::vector<int>& shape() const { return shape_; }
  int order() const { return static_cast<int>(shape_.size()); }
  long size() const { return data_.size(); }
  const VectorXd& data() const { return data_; }
  VectorXd& data() { return data_; }

  double& at(const std::vector<int>& idx) { return data_[offset(idx)]; }
  double at(const std::vector<int>& idx) const { return data_[offset(idx)]; }
  long offset(const std::vector<int>& idx) const;

  double norm() const { return data_.norm(); }

 private:
  std::vector<int> shape_;
  VectorXd data_;
};

/// Order-3 TT core of shape (r0, n, r1), flat index a + r0*(i + n*b).
struct Core3 {
  int r0 = 0, n = 0, r1 = 0;
  VectorXd data;

  Core3() = default;
  Core3(int r0_, int n_, int r1_) : r0(r0_), n(n_), r1(r1_) {
    data = VectorXd::Zero(static_cast<long>(r0) * n * r1);
  }

  double& at(int a, int i, int b) { return data[a + static_cast<long>(r0) * (i + static_cast<long>(n) * b)]; }
  double at(int a, int i, int b) const { return data[a + static_cast<long>(r0) * (i + static_cast<long>(n) * b)]; }

  // (r0*n) x r1 unfolding; shares storage.
  Eigen::Map<const MatrixXd> left() const { return {data.data(), static_cast<long>(r0) * n, r1}; }
  Eigen::Map<MatrixXd> left() { return {data.data(), static_cast<long>(r0) * n, r1}; }
  // r0 x (n*r1) unfolding; shares storage.
  Eigen::Map<const MatrixXd> right() const { return {data.data(), r0, static_cast<long>(n) * r1}; }
  Eigen::Map<MatrixXd> right() { return {data.data(), r0, static_cast<long>(n) * r1}; }
  // r0 x r1 slice at mode index i.
  Eigen::Map<const MatrixXd, 0, Eigen::OuterStride<>> slice(int i) const {
    return {data.data() + static_cast<long>(r0) * i, r0, r1,
            Eigen::OuterStride<>(static_cast<long>(r0) * n)};
  }
  void set_slice(int i, const MatrixXd& m);
};

/// Order-4 TT operator core of shape (r0, m, n, r1), flat a + r0*(i + m*(j + n*b)).
struct Core4 {
  int r0 = 0, m = 0, n = 0, r1 = 0;
  VectorXd data;

  Core4() = default;
  Core4(int r0_, int m_, int n_, int r1_) : r0(r0_), m(m_), n(n_), r1(r1_) {
    data = VectorXd::Zero(static_cast<long>(r0) * m * n * r1);
  }

  double& at(int a, int i, int j, int b) {
    return data[a + static_cast<long>(r0) * (i + static_cast<long>(m) * (j + static_cast<long>(n) * b))];
  }
  double at(int a, int i, int j, int b) const {
    return data[a + static_cast<long>(r0) * (i + static_cast<long>(m) * (j + static_cast<long>(n) * b))];
  }
  // r0 x r1 slice at row index i, column index j.
  Eigen::Map<const MatrixXd, 0, Eigen::OuterStride<>> slice(int i, int j) const {
    return {data.data() + static_cast<long>(r0) * (i + static_cast<long>(m) * j), r0, r1,
            Eigen::OuterStride<>(static_cast<long>(r0) * m * n)};
  }
  void set_slice(int i, int j, const MatrixXd& v);
};

/// Tensor in TT format: chain of order-3 cores with boundary ranks 1.
class TTVector {
 public:
  TTVector() = default;
  explicit TTVector(std::vector<Core3> cores);

  static TTVector zero(const std::vector<int>& shape);
  static TTVector rank_one(const std::vector<VectorXd>& factors);
  static TTVector unit(const std::vector<int>& shape, const std::vector<int>& idx);
  static TTVector random(const std::vector<int>& shape, const std::vector<int>& ranks,
                         std::mt19937_64& rng);

  int order() const { return static_cast<int>(cores_.size()); }
  std::vector<int> shape() const;
  /// Interior ranks (R_1, ..., R_{D-1}).
  std::vector<int> ranks() const;
  int max_rank() const;

  const Core3& core(int d) const { return cores_[d]; }
  Core3& core(int d) { return cores_[d]; }
  const std::vector<Core3>& cores() const { return cores_; }

  double norm() const;
  long dense_size() const;

  void check_consistent() const;

 private:
  std::vector<Core3> cores_;
};

/// Linear operator in TT format: chain of order-4 cores.
class TTOperator {
 public:
  TTOperator() = default;
  explicit TTOperator(std::vector<Core4> cores);

  static TTOperator identity(const std::vector<int>& shape);
  /// Single Kronecker-product term A_1 (x) ... (x) A_D.
  static TTOperator kronecker(const std::vector<MatrixXd>& factors);

  int order() const { return static_cast<int>(cores_.size()); }
  std::vector<int> row_shape() const;
  std::vector<int> col_shape() const;
  std::vector<int> ranks() const;
  int max_rank() const;

  const Core4& core(int d) const { return cores_[d]; }
  Core4& core(int d) { return cores_[d]; }

  TTOperator transpose() const;
  double norm() const;

  void check_consistent() const;

 private:
  std::vector<Core4> cores_;
};

/// Sum of Kronecker-product terms; term t holds one factor matrix per dimension.
struct CanonicalSum {
  std::vector<std::vector<MatrixXd>> terms;

  int order() const { return terms.empty() ? 0 : static_cast<int>(terms.front().size()); }
  void check_consistent() const;
};

// ---- conversion ----

/// TT-SVD with relative tolerance; per-unfolding threshold tol*norm/sqrt(D-1).
TTVector tt_from_dense(const DenseTensor& t, double tol);

/// Dense reconstruction; throws when the entry count exceeds max_entries.
DenseTensor tt_to_dense(const TTVector& x, long max_entries = 1000000);

TTOperator canonical_to_tt(const CanonicalSum& s);
TTVector canonical_to_tt_vector(const std::vector<std::vector<VectorXd>>& terms);

// ---- arithmetic ----

TTVector tt_round(const TTVector& x, double tol);
/// First half of TT rounding: right-orthogonalizes all cores but the first;
/// the Frobenius norm then sits entirely in core 0.
TTVector tt_orthogonalize_right(const TTVector& x);
TTVector tt_add(const TTVector& x, const TTVector& y);
TTVector tt_scale(const TTVector& x, double s);
double tt_inner(const TTVector& x, const TTVector& y);
/// Entrywise product; ranks multiply.
TTVector tt_hadamard(const TTVector& x, const TTVector& y);
/// Scales mode-d fibers entrywise: y(i_1,..,i_D) = x(i_1,..,i_D) * w[i_d].
TTVector tt_scale_mode(const TTVector& x, int d, const VectorXd& w);

TTVector tt_apply(const TTOperator& A, const TTVector& x, double tol);
TTOperator tt_compose(const TTOperator& A, const TTOperator& B, double tol);
TTOperator tt_op_add(const TTOperator& A, const TTOperator& B);
TTOperator tt_op_scale(const TTOperator& A, double s);
TTOperator tt_op_round(const TTOperator& A, double tol);

/// Applies a dense matrix to mode d: y(..,i_d',..) = sum_i m(i_d',i_d) x(..,i_d,..).
TTVector tt_apply_mode(const TTVector& x, int d, const MatrixXd& m);

// ---- reshaping ----

/// Merges modes d and d+1 into one of size n_d*n_{d+1} (mode d fastest); lossless.
TTVector tt_merge_modes(const TTVector& x, int d);
/// Splits mode d into (n1, n2) with n1*n2 = n_d; exact (rank from zero-threshold SVD).
TTVector tt_split_mode(const TTVector& x, int d, int n1, int n2);

// ---- block vectors ----

/// Ordered list of TT vectors keyed by patch or interface id.
class BlockTTVector {
 public:
  BlockTTVector() = default;
  BlockTTVector(std::vector<int> keys, std::vector<TTVector> blocks);

  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  const std::vector<int>& keys() const { return keys_; }
  const TTVector& block(int i) const { return blocks_[i]; }
  TTVector& block(int i) { return blocks_[i]; }

  double norm() const;

 private:
  std::vector<int> keys_;
  std::vector<TTVector> blocks_;
};

BlockTTVector block_add(const BlockTTVector& x, const BlockTTVector& y);
BlockTTVector block_scale(const BlockTTVector& x, double s);
BlockTTVector block_axpy(double a, const BlockTTVector& x, const BlockTTVector& y,
                         double round_tol);
double block_inner(const BlockTTVector& x, const BlockTTVector& y);
BlockTTVector block_round(const BlockTTVector& x, double tol);

}  // namespace ttiga
