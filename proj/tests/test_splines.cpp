#include <doctest.h>

#include <cmath>
#include <random>

#include "ttiga/splines.hpp"

using namespace ttiga;

namespace {
std::mt19937_64 rng(777);

// Independent Cox-de Boor recursion, straight from the definition.
double cox_de_boor(const std::vector<double>& U, int i, int p, double x) {
  if (p == 0) {
    bool last = (i + 2 == static_cast<int>(U.size())) ||
                (U[i + 1] == 1.0 && x == 1.0 && U[i] < 1.0);
    return (x >= U[i] && x < U[i + 1]) || (last && x == 1.0) ? 1.0 : 0.0;
  }
  double a = 0.0, b = 0.0;
  if (U[i + p] > U[i]) a = (x - U[i]) / (U[i + p] - U[i]) * cox_de_boor(U, i, p - 1, x);
  if (U[i + p + 1] > U[i + 1])
    b = (U[i + p + 1] - x) / (U[i + p + 1] - U[i + 1]) * cox_de_boor(U, i + 1, p - 1, x);
  return a + b;
}

SplineSpace random_space(int p, int n_interior) {
  std::vector<double> interior;
  std::uniform_real_distribution<double> d(0.05, 0.95);
  for (int i = 0; i < n_interior; ++i) interior.push_back(d(rng));
  std::sort(interior.begin(), interior.end());
  return SplineSpace(make_open_knot_vector(p, interior));
}
}  // namespace

TEST_CASE("make_open_knot_vector: p=1 with midpoint") {
  KnotVector kv = make_open_knot_vector(1, {0.5});
  CHECK(kv.knots() == std::vector<double>{0, 0, 0.5, 1, 1});
  CHECK(kv.num_basis() == 3);
}

TEST_CASE("make_open_knot_vector: p=2 no interior") {
  KnotVector kv = make_open_knot_vector(2, {});
  CHECK(kv.knots() == std::vector<double>{0, 0, 0, 1, 1, 1});
  CHECK(kv.num_basis() == 3);
}

TEST_CASE("make_open_knot_vector: degree-5 with two uniform interior knots") {
  // coarsest patch space of the three-cube experiments: 6 interior DoFs per dim
  KnotVector kv = make_open_knot_vector(5, {1.0 / 3.0, 2.0 / 3.0});
  CHECK(kv.num_basis() == 8);
  int trimmed = kv.num_basis() - 2;
  CHECK(trimmed * trimmed * trimmed == 216);
}

TEST_CASE("make_open_knot_vector: invalid interior knots throw") {
  CHECK_THROWS_AS(make_open_knot_vector(1, {1.5}), std::invalid_argument);
  CHECK_THROWS_AS(make_open_knot_vector(1, {0.5, 0.5}), std::invalid_argument);  // mult > p
}

TEST_CASE("eval_basis: hat functions at midpoint") {
  SplineSpace s(make_open_knot_vector(1, {}));
  VectorXd v = s.eval_basis(0.5);
  CHECK(v[0] == doctest::Approx(0.5));
  CHECK(v[1] == doctest::Approx(0.5));
}

TEST_CASE("eval_basis: partition of unity and nonnegativity at random points") {
  for (int p : {1, 2, 3, 5}) {
    SplineSpace s = random_space(p, 4);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
      double x = k == 0 ? 0.0 : (k == 1 ? 1.0 : d(rng));
      VectorXd v = s.eval_basis(x);
      CHECK(v.sum() == doctest::Approx(1.0).epsilon(1e-13));
      CHECK(v.minCoeff() >= -1e-14);
      int nnz = 0;
      for (int i = 0; i < v.size(); ++i) nnz += v[i] != 0.0;
      CHECK(nnz <= p + 1);
    }
  }
}

TEST_CASE("eval_basis: matches independent Cox-de Boor recursion") {
  SplineSpace s(make_open_knot_vector(2, {0.5}));
  const auto& U = s.knot_vector().knots();
  for (double x : {0.25, 0.1, 0.5, 0.75, 0.999, 1.0}) {
    VectorXd v = s.eval_basis(x);
    for (int i = 0; i < s.size(); ++i)
      CHECK(v[i] == doctest::Approx(cox_de_boor(U, i, 2, x)).epsilon(1e-12));
  }
}

TEST_CASE("eval_basis: local support") {
  SplineSpace s(make_open_knot_vector(3, {0.2, 0.4, 0.6, 0.8}));
  const auto& U = s.knot_vector().knots();
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    double x = d(rng);
    VectorXd v = s.eval_basis(x);
    for (int i = 0; i < s.size(); ++i)
      if (x < U[i] || x > U[i + 3 + 1]) CHECK(v[i] == 0.0);
  }
}

TEST_CASE("eval_basis: outside [0,1] throws") {
  SplineSpace s(make_open_knot_vector(1, {}));
  CHECK_THROWS_AS(s.eval_basis(-0.1), std::invalid_argument);
  CHECK_THROWS_AS(s.eval_basis(1.1), std::invalid_argument);
}

TEST_CASE("eval_basis_deriv: hat function slopes") {
  SplineSpace s(make_open_knot_vector(1, {}));
  VectorXd d1 = s.eval_basis_deriv(0.3, 1);
  CHECK(d1[0] == doctest::Approx(-1.0));
  CHECK(d1[1] == doctest::Approx(1.0));
}

TEST_CASE("eval_basis_deriv: derivative sum vanishes at interior points") {
  for (int p : {2, 3, 5}) {
    SplineSpace s = random_space(p, 3);
    for (double x : {0.13, 0.42, 0.77}) {
      CHECK(std::abs(s.eval_basis_deriv(x, 1).sum()) <= 1e-11);
    }
  }
}

TEST_CASE("eval_basis_deriv: central finite-difference check") {
  SplineSpace s = random_space(3, 4);
  const double h = 1e-6;
  for (double x : {0.2, 0.5, 0.9}) {
    VectorXd d1 = s.eval_basis_deriv(x, 1);
    VectorXd fd = (s.eval_basis(x + h) - s.eval_basis(x - h)) / (2 * h);
    CHECK((d1 - fd).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("eval_basis_deriv: order above degree throws") {
  SplineSpace s(make_open_knot_vector(2, {}));
  CHECK_THROWS_AS(s.eval_basis_deriv(0.5, 3), std::invalid_argument);
}

TEST_CASE("greville_points: simple cases") {
  SplineSpace s1(make_open_knot_vector(1, {}));
  CHECK(s1.greville_points() == std::vector<double>{0.0, 1.0});
  SplineSpace s2(make_open_knot_vector(2, {}));
  auto g = s2.greville_points();
  CHECK(g[0] == doctest::Approx(0.0));
  CHECK(g[1] == doctest::Approx(0.5));
  CHECK(g[2] == doctest::Approx(1.0));
}

TEST_CASE("greville_points: collocation matrix is nonsingular") {
  for (int p : {1, 2, 3, 5}) {
    SplineSpace s = random_space(p, 5);
    MatrixXd c = collocation_matrix(s, s.greville_points());
    CHECK(std::abs(c.fullPivLu().determinant()) > 1e-12);
  }
}

TEST_CASE("collocation_matrix: identity for p=1 at Greville points") {
  SplineSpace s(make_open_knot_vector(1, {}));
  MatrixXd c = collocation_matrix(s, s.greville_points());
  CHECK((c - MatrixXd::Identity(2, 2)).norm() <= 1e-14);
}

TEST_CASE("collocation_matrix: rows sum to one, reproduces spline coefficients") {
  SplineSpace s = random_space(3, 4);
  MatrixXd c = collocation_matrix(s, s.greville_points());
  for (int a = 0; a < c.rows(); ++a) CHECK(c.row(a).sum() == doctest::Approx(1.0).epsilon(1e-13));

  std::normal_distribution<double> d(0.0, 1.0);
  VectorXd coeffs(s.size());
  for (int i = 0; i < s.size(); ++i) coeffs[i] = d(rng);
  VectorXd samples(s.size());
  auto g = s.greville_points();
  for (int a = 0; a < s.size(); ++a) samples[a] = s.eval_basis(g[a]).dot(coeffs);
  VectorXd rec = c.partialPivLu().solve(samples);
  CHECK((rec - coeffs).norm() <= 1e-10 * coeffs.norm());
}

TEST_CASE("h_refine: k=0 identity, p=1 midpoint insertion") {
  SplineSpace s(make_open_knot_vector(1, {}));
  CHECK(h_refine(s, 0).knot_vector() == s.knot_vector());
  SplineSpace r = h_refine(s, 1);
  CHECK(r.knot_vector().knots() == std::vector<double>{0, 0, 0.5, 1, 1});
}

TEST_CASE("h_refine: degree-5 sweep reaches the experiment endpoint sizes") {
  // base space: 2 interior knots -> 6 trimmed DoFs per dim; inserting k knots
  // per span walks 6, 9, 12, ... up to 60 (216000 DoFs per patch at the top)
  SplineSpace base(make_open_knot_vector(5, {1.0 / 3.0, 2.0 / 3.0}));
  for (int k = 0; k <= 18; ++k) {
    SplineSpace r = h_refine(base, k);
    CHECK(r.size() - 2 == 6 + 3 * k);
  }
  SplineSpace top = h_refine(base, 18);
  long trimmed = top.size() - 2;
  CHECK(trimmed * trimmed * trimmed == 216000);
}

TEST_CASE("refinement_matrix: fine == coarse gives identity") {
  SplineSpace s = random_space(2, 3);
  MatrixXd z = refinement_matrix(s, s);
  CHECK((z - MatrixXd::Identity(s.size(), s.size())).norm() <= 1e-14);
}

TEST_CASE("refinement_matrix: p=1 midpoint insertion matches hand formula") {
  SplineSpace coarse(make_open_knot_vector(1, {}));
  SplineSpace fine(make_open_knot_vector(1, {0.5}));
  MatrixXd z = refinement_matrix(coarse, fine);
  MatrixXd expect(3, 2);
  expect << 1, 0, 0.5, 0.5, 0, 1;
  CHECK((z - expect).norm() <= 1e-14);
}

TEST_CASE("refinement_matrix: reproduction property on random nested pairs") {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int rep = 0; rep < 3; ++rep) {
    int p = 2 + rep;
    SplineSpace coarse = random_space(p, 3);
    SplineSpace fine = h_refine(coarse, 1 + rep % 2);
    MatrixXd z = refinement_matrix(coarse, fine);
    CHECK(z.minCoeff() >= -1e-14);
    for (int i = 0; i < z.rows(); ++i) CHECK(z.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));

    std::normal_distribution<double> nd(0.0, 1.0);
    VectorXd c(coarse.size());
    for (int i = 0; i < c.size(); ++i) c[i] = nd(rng);
    VectorXd fc = z * c;
    for (int k = 0; k < 100; ++k) {
      double x = d(rng);
      double v_coarse = coarse.eval_basis(x).dot(c);
      double v_fine = fine.eval_basis(x).dot(fc);
      CHECK(std::abs(v_fine - v_coarse) <= 1e-12 * (std::abs(v_coarse) + 1));
    }
  }
}

TEST_CASE("refinement_matrix: non-nested pair throws") {
  SplineSpace coarse(make_open_knot_vector(1, {0.3}));
  SplineSpace fine(make_open_knot_vector(1, {0.5}));
  CHECK_THROWS_AS(refinement_matrix(coarse, fine), std::invalid_argument);
}

TEST_CASE("gauss_quadrature: integrates constants and basis exactly") {
  SplineSpace s = random_space(2, 3);
  QuadratureGrid g = gauss_quadrature(s, s, 3);
  double total = 0.0;
  for (double w : g.weights) total += w;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-13));

  // partition of unity integrated: sum over basis integrals is 1
  double sum = 0.0;
  for (size_t q = 0; q < g.nodes.size(); ++q) sum += g.weights[q] * s.eval_basis(g.nodes[q]).sum();
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));
  for (double w : g.weights) CHECK(w > 0.0);
}

TEST_CASE("gauss_quadrature: p=1 single-span mass matrix") {
  SplineSpace s(make_open_knot_vector(1, {}));
  QuadratureGrid g = gauss_quadrature(s, s, 2);
  MatrixXd m = MatrixXd::Zero(2, 2);
  for (size_t q = 0; q < g.nodes.size(); ++q) {
    VectorXd b = s.eval_basis(g.nodes[q]);
    m += g.weights[q] * b * b.transpose();
  }
  MatrixXd expect(2, 2);
  expect << 1.0 / 3, 1.0 / 6, 1.0 / 6, 1.0 / 3;
  CHECK((m - expect).norm() <= 1e-14);
}

TEST_CASE("gauss_legendre_01: exact for polynomials of degree 2q-1") {
  for (int q = 1; q <= 8; ++q) {
    std::vector<double> x, w;
    gauss_legendre_01(q, x, w);
    for (int deg = 0; deg <= 2 * q - 1; ++deg) {
      double sum = 0.0;
      for (int i = 0; i < q; ++i) sum += w[i] * std::pow(x[i], deg);
      CHECK(sum == doctest::Approx(1.0 / (deg + 1)).epsilon(1e-12));
    }
  }
}
