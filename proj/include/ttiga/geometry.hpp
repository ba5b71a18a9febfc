#pragma once

#include <array>
#include <optional>
#include <string>

#include "ttiga/splines.hpp"

namespace ttiga {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Tensor-product spline (optionally rational) mapping [0,1]^3 -> R^3.
class Patch {
 public:
  Patch() = default;
  /// control_points in lexicographic order, dimension 1 fastest; weights
  /// (when rational) in the same order, all positive.
  Patch(std::array<SplineSpace, 3> spaces, std::vector<Vec3> control_points,
        std::vector<double> weights = {});

  const SplineSpace& space(int d) const { return spaces_[d]; }
  bool rational() const { return !weights_.empty(); }
  const std::vector<Vec3>& control_points() const { return control_points_; }
  const std::vector<double>& weights() const { return weights_; }

  Vec3 eval(const Vec3& xhat) const;
  Mat3 jacobian(const Vec3& xhat) const;
  /// |det grad G|; throws on singular parameterizations.
  double omega(const Vec3& xhat) const;
  /// (grad G^T grad G)^{-1} |det grad G|, symmetric positive definite.
  Mat3 Q(const Vec3& xhat) const;

 private:
  void eval_with_jacobian(const Vec3& xhat, Vec3& g, Mat3& jac) const;

  std::array<SplineSpace, 3> spaces_;
  std::vector<Vec3> control_points_;
  std::vector<double> weights_;
};

enum class Side { low, high };

/// Declared interface between patches j < k, connected in dimension d1;
/// side_j/side_k name the touching parameter faces (opposite by convention).
struct Interface {
  int j = 0, k = 0;
  int d1 = 1;  // connection dimension, 1-based
  Side side_j = Side::high;
  Side side_k = Side::low;
  // per spanning dimension (ascending order d2 < d3): true when the solution
  // knot vectors of both patches match on the interface
  std::array<bool, 2> conforming{true, true};
  // patch id whose solution space is the finer one (used when nonconforming)
  int finer_patch = 0;

  std::array<int, 2> spanning_dims() const {
    std::array<int, 2> s{};
    int idx = 0;
    for (int d = 1; d <= 3; ++d)
      if (d != d1) s[idx++] = d;
    return s;
  }
};

struct MultiPatch {
  std::vector<Patch> patches;
  std::vector<Interface> interfaces;
  /// per patch, six flags (low1, high1, low2, high2, low3, high3): true when
  /// that face lies on the outer Dirichlet boundary
  std::vector<std::array<bool, 6>> boundary_trim;

  int num_patches() const { return static_cast<int>(patches.size()); }
};

struct ValidationIssue {
  std::string what;
  int interface_index = -1;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
};

/// Checks interface coincidence by sampling, face/trim consistency, and (when
/// solution spaces are supplied) the conforming/nested-knot declarations.
ValidationReport validate_multipatch(
    const MultiPatch& m, double tol,
    const std::vector<std::array<SplineSpace, 3>>* solution_spaces = nullptr);

/// Built-in geometries: three_cubes, four_cuboids, two_annuli.
MultiPatch builtin_geometry(const std::string& name);

/// JSON geometry file I/O (1-based indices on disk).
MultiPatch load_geometry(const std::string& path);
void save_geometry(const MultiPatch& m, const std::string& path);

}  // namespace ttiga
