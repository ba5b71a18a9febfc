#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ttiga/tt.hpp"

namespace ttiga {

/// Open knot vector on [0,1]: end knots repeated degree+1 times, interior
/// multiplicities at most the degree.
class KnotVector {
 public:
  KnotVector() = default;
  KnotVector(int degree, std::vector<double> knots);

  int degree() const { return degree_; }
  const std::vector<double>& knots() const { return knots_; }
  int num_basis() const { return static_cast<int>(knots_.size()) - degree_ - 1; }

  /// Knot span index i with knots[i] <= x < knots[i+1]; the last nonempty span
  /// is closed so x = 1 is valid.
  int find_span(double x) const;

  /// Distinct breakpoints, including 0 and 1.
  std::vector<double> breakpoints() const;
  std::vector<double> interior_knots() const;

  bool operator==(const KnotVector& o) const {
    return degree_ == o.degree_ && knots_ == o.knots_;
  }

 private:
  int degree_ = 0;
  std::vector<double> knots_;
};

KnotVector make_open_knot_vector(int degree, const std::vector<double>& interior_knots);

/// Univariate B-spline space; evaluation returns full coefficient vectors.
class SplineSpace {
 public:
  SplineSpace() = default;
  explicit SplineSpace(KnotVector kv) : kv_(std::move(kv)) {}

  const KnotVector& knot_vector() const { return kv_; }
  int degree() const { return kv_.degree(); }
  int size() const { return kv_.num_basis(); }

  VectorXd eval_basis(double x) const;
  VectorXd eval_basis_deriv(double x, int order) const;

  std::vector<double> greville_points() const;

 private:
  KnotVector kv_;
};

MatrixXd collocation_matrix(const SplineSpace& s, const std::vector<double>& points);

/// Uniformly inserts k knots into every nonempty span.
SplineSpace h_refine(const SplineSpace& s, int k);

/// Knot-insertion matrix Z with B_fine(x)^T (Z c) = B_coarse(x)^T c for all x.
MatrixXd refinement_matrix(const SplineSpace& coarse, const SplineSpace& fine);

/// Per-span Gauss nodes and weights on the union breakpoints of two spaces.
struct QuadratureGrid {
  std::vector<double> nodes;
  std::vector<double> weights;
  int points_per_span = 0;
};

QuadratureGrid gauss_quadrature(const SplineSpace& s1, const SplineSpace& s2, int q);

/// Gauss-Legendre rule on [0,1].
void gauss_legendre_01(int q, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace ttiga
