#include "ttiga/splines.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ttiga {

KnotVector::KnotVector(int degree, std::vector<double> knots)
    : degree_(degree), knots_(std::move(knots)) {
  require(degree_ >= 0, "KnotVector: negative degree");
  require(static_cast<int>(knots_.size()) >= 2 * (degree_ + 1), "KnotVector: too few knots");
  for (size_t i = 0; i + 1 < knots_.size(); ++i)
    require(knots_[i] <= knots_[i + 1] + 1e-15, "KnotVector: knots not nondecreasing");
  for (int i = 0; i <= degree_; ++i) {
    require(knots_[i] == 0.0, "KnotVector: start knots must be 0 repeated degree+1 times");
    require(knots_[knots_.size() - 1 - i] == 1.0,
            "KnotVector: end knots must be 1 repeated degree+1 times");
  }
  require(knots_[degree_ + 1] > 0.0 && knots_[knots_.size() - degree_ - 2] < 1.0,
          "KnotVector: end knot multiplicity exceeds degree+1");
  // interior multiplicity check
  int run = 1;
  for (size_t i = degree_ + 2; i + degree_ + 1 < knots_.size(); ++i) {
    run = (knots_[i] == knots_[i - 1]) ? run + 1 : 1;
    require(run <= degree_, "KnotVector: interior multiplicity exceeds degree");
  }
}

int KnotVector::find_span(double x) const {
  require(x >= 0.0 && x <= 1.0, "find_span: x outside [0,1]");
  int n = num_basis();
  if (x >= 1.0) {
    int i = static_cast<int>(knots_.size()) - degree_ - 2;
    while (knots_[i] == knots_[i + 1]) --i;
    return i;
  }
  // binary search over [degree, n]
  int lo = degree_, hi = n;
  while (lo < hi) {
    int mid = (lo + hi + 1) / 2;
    if (knots_[mid] <= x) lo = mid;
    else hi = mid - 1;
  }
  return lo;
}

std::vector<double> KnotVector::breakpoints() const {
  std::vector<double> b;
  for (double k : knots_)
    if (b.empty() || k > b.back()) b.push_back(k);
  return b;
}

std::vector<double> KnotVector::interior_knots() const {
  std::vector<double> b;
  for (double k : knots_)
    if (k > 0.0 && k < 1.0) b.push_back(k);
  return b;
}

KnotVector make_open_knot_vector(int degree, const std::vector<double>& interior_knots) {
  for (size_t i = 0; i < interior_knots.size(); ++i) {
    require(interior_knots[i] > 0.0 && interior_knots[i] < 1.0,
            "make_open_knot_vector: interior knot outside (0,1)");
    if (i > 0)
      require(interior_knots[i] >= interior_knots[i - 1],
              "make_open_knot_vector: interior knots not nondecreasing");
  }
  std::vector<double> knots(degree + 1, 0.0);
  knots.insert(knots.end(), interior_knots.begin(), interior_knots.end());
  knots.insert(knots.end(), degree + 1, 1.0);
  return KnotVector(degree, std::move(knots));
}

// Cox-de Boor: nonzero basis values on the span of x (Piegl-Tiller BasisFuns).
static void basis_funs(const KnotVector& kv, int span, double x, std::vector<double>& out) {
  const int p = kv.degree();
  const auto& U = kv.knots();
  out.assign(p + 1, 0.0);
  std::vector<double> left(p + 1), right(p + 1);
  out[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - U[span + 1 - j];
    right[j] = U[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      double tmp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    out[j] = saved;
  }
}

// Piegl-Tiller DersBasisFuns: values and derivatives up to order k.
static void basis_ders(const KnotVector& kv, int span, double x, int k,
                       std::vector<std::vector<double>>& ders) {
  const int p = kv.degree();
  const auto& U = kv.knots();
  std::vector<std::vector<double>> ndu(p + 1, std::vector<double>(p + 1, 0.0));
  std::vector<double> left(p + 1), right(p + 1);
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - U[span + 1 - j];
    right[j] = U[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      double tmp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    ndu[j][j] = saved;
  }
  ders.assign(k + 1, std::vector<double>(p + 1, 0.0));
  for (int j = 0; j <= p; ++j) ders[0][j] = ndu[j][p];
  std::vector<std::vector<double>> a(2, std::vector<double>(p + 1, 0.0));
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a[0][0] = 1.0;
    for (int kk = 1; kk <= k; ++kk) {
      double d = 0.0;
      int rk = r - kk, pk = p - kk;
      if (r >= kk) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      int j1 = rk >= -1 ? 1 : -rk;
      int j2 = r - 1 <= pk ? kk - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][kk] = -a[s1][kk - 1] / ndu[pk + 1][r];
        d += a[s2][kk] * ndu[r][pk];
      }
      ders[kk][r] = d;
      std::swap(s1, s2);
    }
  }
  double f = p;
  for (int kk = 1; kk <= k; ++kk) {
    for (int j = 0; j <= p; ++j) ders[kk][j] *= f;
    f *= (p - kk);
  }
}

VectorXd SplineSpace::eval_basis(double x) const {
  const int p = degree();
  int span = kv_.find_span(x);
  std::vector<double> vals;
  basis_funs(kv_, span, x, vals);
  VectorXd out = VectorXd::Zero(size());
  for (int j = 0; j <= p; ++j) out[span - p + j] = vals[j];
  return out;
}

VectorXd SplineSpace::eval_basis_deriv(double x, int order) const {
  require(order >= 0 && order <= degree(), "eval_basis_deriv: order exceeds degree");
  const int p = degree();
  int span = kv_.find_span(x);
  std::vector<std::vector<double>> ders;
  basis_ders(kv_, span, x, order, ders);
  VectorXd out = VectorXd::Zero(size());
  for (int j = 0; j <= p; ++j) out[span - p + j] = ders[order][j];
  return out;
}

std::vector<double> SplineSpace::greville_points() const {
  const int p = degree();
  const auto& U = kv_.knots();
  std::vector<double> g(size());
  for (int i = 0; i < size(); ++i) {
    double s = 0.0;
    for (int j = 1; j <= p; ++j) s += U[i + j];
    g[i] = p > 0 ? s / p : 0.5 * (U[i] + U[i + 1]);
    g[i] = std::clamp(g[i], 0.0, 1.0);
  }
  return g;
}

MatrixXd collocation_matrix(const SplineSpace& s, const std::vector<double>& points) {
  require(static_cast<int>(points.size()) == s.size(),
          "collocation_matrix: need one point per basis function");
  MatrixXd c(s.size(), s.size());
  for (int a = 0; a < s.size(); ++a) c.row(a) = s.eval_basis(points[a]).transpose();
  return c;
}

SplineSpace h_refine(const SplineSpace& s, int k) {
  require(k >= 0, "h_refine: negative insertion count");
  if (k == 0) return s;
  auto breaks = s.knot_vector().breakpoints();
  std::vector<double> interior = s.knot_vector().interior_knots();
  for (size_t i = 0; i + 1 < breaks.size(); ++i) {
    double a = breaks[i], b = breaks[i + 1];
    for (int j = 1; j <= k; ++j) interior.push_back(a + (b - a) * j / (k + 1));
  }
  std::sort(interior.begin(), interior.end());
  return SplineSpace(make_open_knot_vector(s.degree(), interior));
}

// Single-knot-insertion coefficient matrix (Boehm's algorithm).
static MatrixXd insertion_step(int p, const std::vector<double>& U, double xbar) {
  const int n = static_cast<int>(U.size()) - p - 1;
  // span k with U[k] <= xbar < U[k+1]
  int k = p;
  while (k + 1 < static_cast<int>(U.size()) - 1 && U[k + 1] <= xbar) ++k;
  MatrixXd z = MatrixXd::Zero(n + 1, n);
  for (int i = 0; i <= n; ++i) {
    double alpha;
    if (i <= k - p) alpha = 1.0;
    else if (i >= k + 1) alpha = 0.0;
    else alpha = (xbar - U[i]) / (U[i + p] - U[i]);
    if (alpha > 0.0) z(i, i) = alpha;
    if (alpha < 1.0 && i > 0) z(i, i - 1) = 1.0 - alpha;
  }
  return z;
}

MatrixXd refinement_matrix(const SplineSpace& coarse, const SplineSpace& fine) {
  require(coarse.degree() == fine.degree(), "refinement_matrix: degree mismatch");
  // fine knots must contain the coarse knots (with multiplicity, up to 1e-12)
  std::vector<double> remaining = fine.knot_vector().knots();
  for (double u : coarse.knot_vector().knots()) {
    auto it = std::find_if(remaining.begin(), remaining.end(),
                           [u](double v) { return std::abs(v - u) <= 1e-12; });
    require(it != remaining.end(), "refinement_matrix: knot vectors not nested");
    remaining.erase(it);
  }
  const int p = coarse.degree();
  std::vector<double> knots = coarse.knot_vector().knots();
  MatrixXd z = MatrixXd::Identity(coarse.size(), coarse.size());
  std::sort(remaining.begin(), remaining.end());
  for (double xbar : remaining) {
    z = insertion_step(p, knots, xbar) * z;
    knots.insert(std::upper_bound(knots.begin(), knots.end(), xbar), xbar);
  }
  return z;
}

void gauss_legendre_01(int q, std::vector<double>& nodes, std::vector<double>& weights) {
  require(q >= 1, "gauss_legendre_01: need at least one point");
  // Golub-Welsch on the Jacobi matrix for Legendre polynomials.
  MatrixXd J = MatrixXd::Zero(q, q);
  for (int i = 1; i < q; ++i) {
    double b = i / std::sqrt(4.0 * i * i - 1.0);
    J(i, i - 1) = b;
    J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(J);
  nodes.resize(q);
  weights.resize(q);
  for (int i = 0; i < q; ++i) {
    nodes[i] = 0.5 * (es.eigenvalues()[i] + 1.0);
    double v = es.eigenvectors()(0, i);
    weights[i] = v * v;  // on [0,1] the weights 2*v^2 are halved by the interval map
  }
}

QuadratureGrid gauss_quadrature(const SplineSpace& s1, const SplineSpace& s2, int q) {
  require(q >= 1, "gauss_quadrature: need at least one point per span");
  std::set<double> bp;
  for (double b : s1.knot_vector().breakpoints()) bp.insert(b);
  for (double b : s2.knot_vector().breakpoints()) bp.insert(b);
  std::vector<double> breaks(bp.begin(), bp.end());
  std::vector<double> gx, gw;
  gauss_legendre_01(q, gx, gw);
  QuadratureGrid grid;
  grid.points_per_span = q;
  for (size_t i = 0; i + 1 < breaks.size(); ++i) {
    double a = breaks[i], h = breaks[i + 1] - breaks[i];
    if (h <= 0.0) continue;
    for (int j = 0; j < q; ++j) {
      grid.nodes.push_back(a + h * gx[j]);
      grid.weights.push_back(h * gw[j]);
    }
  }
  return grid;
}

}  // namespace ttiga
