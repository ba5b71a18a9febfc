#pragma once

#include <array>
#include <functional>

#include "ttiga/cross.hpp"
#include "ttiga/geometry.hpp"

namespace ttiga {

/// Scalar field on the parameter cube.
using ParamField = std::function<double(const Vec3&)>;
/// Scalar field on the physical domain.
using PhysField = std::function<double(const Vec3&)>;

struct AssemblyOptions {
  double eps = 1e-8;          // weight-interpolation tolerance
  int quad_points = 0;        // Gauss points per span; 0 means degree+1
  int interp_degree_bump = 2; // weight space degree = solution degree + bump
  long dense_cap = 1000000;   // sampling grids below this are densified
  unsigned long seed = 20240601ULL;
};

/// Low-rank interpolant of a weight function on the tensor Greville grid of
/// the interpolation spaces; coeffs reproduce the field at the nodes to eps.
struct WeightTT {
  TTVector coeffs;
  std::array<SplineSpace, 3> interp_spaces;
  double node_residual = 0.0;  // max |interp - field| on a random node subset
  double sample_scale = 1.0;   // max |field| over the checked nodes
};

/// Evaluates the interpolant W : Bhat(xhat).
double weight_eval(const WeightTT& w, const Vec3& xhat);

WeightTT interpolate_weight(const Patch& patch, const ParamField& field,
                            const std::array<SplineSpace, 3>& interp_spaces,
                            const AssemblyOptions& opts);

/// entry (i,j) = int_0^1 (w . Bhat)(x) d^da beta^test_i d^db beta^trial_j dx
MatrixXd univariate_weighted_matrix(const SplineSpace& trial, const SplineSpace& test,
                                    const VectorXd& weight_coeffs,
                                    const SplineSpace& interp_space, int da, int db,
                                    int quad_points = 0);

/// One patch of the discrete problem: solution spaces and Dirichlet trim
/// flags (low/high per dimension; interface faces stay untrimmed).
struct PatchDiscretization {
  const Patch* patch = nullptr;
  std::array<SplineSpace, 3> spaces;
  std::array<bool, 6> trim{};  // low1, high1, low2, high2, low3, high3

  int trim_start(int d) const { return trim[2 * d] ? 1 : 0; }
  int trimmed_size(int d) const {
    return spaces[d].size() - (trim[2 * d] ? 1 : 0) - (trim[2 * d + 1] ? 1 : 0);
  }
  std::array<int, 3> trimmed_sizes() const {
    return {trimmed_size(0), trimmed_size(1), trimmed_size(2)};
  }
  /// The paper-style DoF count per patch: interior basis functions only.
  long reported_dofs() const {
    long n = 1;
    for (int d = 0; d < 3; ++d) n *= spaces[d].size() - 2;
    return n;
  }
};

/// Removes the first/last index in each trimmed dimension by slicing factor
/// matrices; rank-preserving.
TTVector dirichlet_trim(const TTVector& full, const PatchDiscretization& disc);
TTOperator dirichlet_trim(const TTOperator& full, const PatchDiscretization& disc);

/// Trimmed mass and stiffness in TT form plus the canonical mass factors
/// (kept unrounded for the control preconditioner).
struct PatchOperators {
  TTOperator mass;
  TTOperator stiffness;
  std::array<int, 3> trimmed_sizes{};
  // canonical univariate mass factors per dimension, indexed like the weight
  // TT cores: dim 0 by r1, dim 1 by (r1 + R1*r2), dim 2 by r2
  std::array<std::vector<MatrixXd>, 3> mass_factors;
  std::array<int, 2> mass_weight_ranks{1, 1};
};

TTOperator assemble_mass(const PatchDiscretization& disc, const AssemblyOptions& opts,
                         PatchOperators* factors_out = nullptr);
TTOperator assemble_stiffness(const PatchDiscretization& disc, const AssemblyOptions& opts);
TTVector assemble_rhs(const PatchDiscretization& disc, const PhysField& f,
                      const AssemblyOptions& opts);

PatchOperators assemble_patch(const PatchDiscretization& disc, const AssemblyOptions& opts);

/// Interpolation spaces for the weight functions: solution degree + bump,
/// geometry knots; rational patches also inherit the solution knots.
std::array<SplineSpace, 3> weight_interp_spaces(const PatchDiscretization& disc,
                                                const AssemblyOptions& opts);

}  // namespace ttiga
