#include <doctest.h>

#include <cmath>
#include <random>

#include "ttiga/geometry.hpp"

using namespace ttiga;

namespace {
std::mt19937_64 rng(4242);

Patch identity_cube() {
  std::vector<Vec3> cp;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) cp.emplace_back(i, j, k);
  SplineSpace lin(make_open_knot_vector(1, {}));
  return Patch({lin, lin, lin}, std::move(cp));
}

Patch scaled_cube(double sx) {
  std::vector<Vec3> cp;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) cp.emplace_back(sx * i, j, k);
  SplineSpace lin(make_open_knot_vector(1, {}));
  return Patch({lin, lin, lin}, std::move(cp));
}

// mildly distorted but invertible patch
Patch wavy_patch() {
  SplineSpace q(make_open_knot_vector(2, {0.5}));
  SplineSpace lin(make_open_knot_vector(1, {}));
  std::array<SplineSpace, 3> sp{q, q, lin};
  auto g1 = q.greville_points();
  std::vector<Vec3> cp;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < (int)g1.size(); ++j)
      for (int i = 0; i < (int)g1.size(); ++i) {
        double x = g1[i], y = g1[j];
        cp.emplace_back(x + 0.1 * std::sin(M_PI * y), y + 0.08 * x * (1 - x), k * 1.0 + 0.05 * x);
      }
  return Patch(sp, std::move(cp));
}

Vec3 random_point() {
  std::uniform_real_distribution<double> d(0.05, 0.95);
  return {d(rng), d(rng), d(rng)};
}
}  // namespace

TEST_CASE("eval_geometry: identity cube") {
  Patch p = identity_cube();
  for (int k = 0; k < 20; ++k) {
    Vec3 x = random_point();
    CHECK((p.eval(x) - x).norm() <= 1e-14);
  }
}

TEST_CASE("eval_geometry: affine scaling") {
  Patch p = scaled_cube(2.0);
  Vec3 x = random_point();
  Vec3 g = p.eval(x);
  CHECK(g[0] == doctest::Approx(2 * x[0]));
  CHECK(g[1] == doctest::Approx(x[1]));
  CHECK(g[2] == doctest::Approx(x[2]));
}

TEST_CASE("eval_geometry: rational quarter arc keeps radius") {
  MultiPatch m = builtin_geometry("two_annuli");
  const Patch& p = m.patches[0];
  for (double t : {0.0, 0.25, 0.5, 0.8, 1.0}) {
    Vec3 g = p.eval({t, 0.0, 0.3});
    CHECK(std::hypot(g[0], g[1]) == doctest::Approx(1.0).epsilon(1e-12));
    Vec3 g2 = p.eval({t, 1.0, 0.3});
    CHECK(std::hypot(g2[0], g2[1]) == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("eval_jacobian: identity and affine") {
  CHECK((identity_cube().jacobian(random_point()) - Mat3::Identity()).norm() <= 1e-13);
  Mat3 j = scaled_cube(2.0).jacobian(random_point());
  Mat3 expect = Vec3(2, 1, 1).asDiagonal();
  CHECK((j - expect).norm() <= 1e-13);
}

TEST_CASE("eval_jacobian: finite-difference check on curved patches") {
  const double h = 1e-6;
  for (const Patch& p : {wavy_patch(), builtin_geometry("two_annuli").patches[0]}) {
    for (int rep = 0; rep < 20; ++rep) {
      Vec3 x = random_point();
      Mat3 j = p.jacobian(x);
      for (int d = 0; d < 3; ++d) {
        Vec3 xp = x, xm = x;
        xp[d] += h;
        xm[d] -= h;
        Vec3 fd = (p.eval(xp) - p.eval(xm)) / (2 * h);
        CHECK((j.col(d) - fd).cwiseAbs().maxCoeff() <= 1e-5);
      }
    }
  }
}

TEST_CASE("eval_omega: identity, scaling, FD cross-check") {
  CHECK(identity_cube().omega(random_point()) == doctest::Approx(1.0));
  CHECK(scaled_cube(2.0).omega(random_point()) == doctest::Approx(2.0));
  Patch p = wavy_patch();
  const double h = 1e-6;
  for (int rep = 0; rep < 10; ++rep) {
    Vec3 x = random_point();
    Mat3 fd;
    for (int d = 0; d < 3; ++d) {
      Vec3 xp = x, xm = x;
      xp[d] += h;
      xm[d] -= h;
      fd.col(d) = (p.eval(xp) - p.eval(xm)) / (2 * h);
    }
    CHECK(p.omega(x) == doctest::Approx(std::abs(fd.determinant())).epsilon(1e-5));
  }
}

TEST_CASE("eval_Q: identity and scaling") {
  CHECK((identity_cube().Q(random_point()) - Mat3::Identity()).norm() <= 1e-13);
  Mat3 q = scaled_cube(2.0).Q(random_point());
  Mat3 expect = Vec3(0.5, 2.0, 2.0).asDiagonal();
  CHECK((q - expect).norm() <= 1e-12);
}

TEST_CASE("eval_Q: symmetric positive definite on curved patches") {
  for (const Patch& p : {wavy_patch(), builtin_geometry("two_annuli").patches[1]}) {
    for (int rep = 0; rep < 20; ++rep) {
      Vec3 x = random_point();
      Mat3 q = p.Q(x);
      CHECK((q - q.transpose()).norm() <= 1e-13 * q.norm());
      Eigen::LLT<Mat3> llt(q);
      CHECK(llt.info() == Eigen::Success);
    }
  }
}

TEST_CASE("degenerate parameterization reports singular Jacobian") {
  // collapse one face to a line: Jacobian singular at that face
  std::vector<Vec3> cp;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) cp.emplace_back(i, j * (i == 0 ? 0.0 : 1.0), k);
  SplineSpace lin(make_open_knot_vector(1, {}));
  Patch p({lin, lin, lin}, std::move(cp));
  CHECK_THROWS_AS(p.omega({0.0, 0.5, 0.5}), std::runtime_error);
}

TEST_CASE("builtin three_cubes: structure and validation") {
  MultiPatch m = builtin_geometry("three_cubes");
  CHECK(m.num_patches() == 3);
  CHECK(m.interfaces.size() == 2);
  for (const auto& f : m.interfaces) CHECK(f.d1 == 1);
  CHECK(validate_multipatch(m, 1e-10).ok());
}

TEST_CASE("builtin four_cuboids: structure and validation") {
  MultiPatch m = builtin_geometry("four_cuboids");
  CHECK(m.num_patches() == 4);
  CHECK(m.interfaces.size() == 4);
  CHECK(validate_multipatch(m, 1e-10).ok());
}

TEST_CASE("builtin two_annuli: structure and validation") {
  MultiPatch m = builtin_geometry("two_annuli");
  CHECK(m.num_patches() == 2);
  CHECK(m.interfaces.size() == 1);
  CHECK(m.interfaces[0].d1 == 3);
  CHECK(validate_multipatch(m, 1e-10).ok());
}

TEST_CASE("builtin_geometry: unknown name throws") {
  CHECK_THROWS_AS(builtin_geometry("five_spheres"), std::invalid_argument);
}

TEST_CASE("validate_multipatch: perturbed interface control point is caught") {
  MultiPatch m = builtin_geometry("three_cubes");
  // rebuild patch 2 with a nudged corner on the shared face x=1
  std::vector<Vec3> cp = m.patches[1].control_points();
  cp[0] += Vec3(0, 1e-3, 0);
  SplineSpace lin(make_open_knot_vector(1, {}));
  m.patches[1] = Patch({lin, lin, lin}, std::move(cp));
  ValidationReport rep = validate_multipatch(m, 1e-10);
  CHECK(!rep.ok());
  CHECK(rep.issues[0].interface_index == 0);
}

TEST_CASE("validate_multipatch: conforming declaration vs knot mismatch is flagged") {
  MultiPatch m = builtin_geometry("three_cubes");
  std::vector<std::array<SplineSpace, 3>> sol(3);
  SplineSpace base(make_open_knot_vector(3, {1.0 / 3, 2.0 / 3}));
  for (int j = 0; j < 3; ++j) sol[j] = {base, base, base};
  sol[1][1] = h_refine(base, 1);  // mismatch in a spanning dimension of interface (1,2)
  ValidationReport rep = validate_multipatch(m, 1e-10, &sol);
  CHECK(!rep.ok());
}

TEST_CASE("geometry file round-trip") {
  MultiPatch m = builtin_geometry("two_annuli");
  std::string path = "geom_roundtrip_test.json";
  save_geometry(m, path);
  MultiPatch back = load_geometry(path);
  CHECK(back.num_patches() == 2);
  CHECK(back.interfaces.size() == 1);
  CHECK(back.patches[0].rational());
  for (int rep = 0; rep < 10; ++rep) {
    Vec3 x = random_point();
    CHECK((back.patches[0].eval(x) - m.patches[0].eval(x)).norm() <= 1e-14);
  }
  CHECK(validate_multipatch(back, 1e-10).ok());
  std::remove(path.c_str());
}
