#include "ttiga/geometry.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace ttiga {

Patch::Patch(std::array<SplineSpace, 3> spaces, std::vector<Vec3> control_points,
             std::vector<double> weights)
    : spaces_(std::move(spaces)),
      control_points_(std::move(control_points)),
      weights_(std::move(weights)) {
  long n = static_cast<long>(spaces_[0].size()) * spaces_[1].size() * spaces_[2].size();
  require(static_cast<long>(control_points_.size()) == n,
          "Patch: control net does not match basis counts");
  if (!weights_.empty()) {
    require(static_cast<long>(weights_.size()) == n, "Patch: weight count mismatch");
    for (double w : weights_) require(w > 0.0, "Patch: weights must be positive");
  }
}

void Patch::eval_with_jacobian(const Vec3& xhat, Vec3& g, Mat3& jac) const {
  std::array<VectorXd, 3> b, db;
  for (int d = 0; d < 3; ++d) {
    b[d] = spaces_[d].eval_basis(xhat[d]);
    db[d] = spaces_[d].eval_basis_deriv(xhat[d], 1);
  }
  const int n1 = spaces_[0].size(), n2 = spaces_[1].size(), n3 = spaces_[2].size();

  Vec3 num = Vec3::Zero();
  Mat3 dnum = Mat3::Zero();  // column d = d(num)/dxhat_d
  double den = 1.0;
  Vec3 dden = Vec3::Zero();
  bool rat = rational();
  double den_acc = 0.0;

  long idx = 0;
  for (int k = 0; k < n3; ++k)
    for (int j = 0; j < n2; ++j)
      for (int i = 0; i < n1; ++i, ++idx) {
        double w = rat ? weights_[idx] : 1.0;
        double v = b[0][i] * b[1][j] * b[2][k];
        double wv = w * v;
        num += wv * control_points_[idx];
        den_acc += wv;
        Vec3 dv(db[0][i] * b[1][j] * b[2][k], b[0][i] * db[1][j] * b[2][k],
                b[0][i] * b[1][j] * db[2][k]);
        dnum += (w * control_points_[idx]) * dv.transpose();
        dden += w * dv;
      }
  if (rat) {
    den = den_acc;
    g = num / den;
    jac = (dnum - g * dden.transpose()) / den;
  } else {
    g = num;
    jac = dnum;
  }
}

Vec3 Patch::eval(const Vec3& xhat) const {
  Vec3 g;
  Mat3 jac;
  eval_with_jacobian(xhat, g, jac);
  return g;
}

Mat3 Patch::jacobian(const Vec3& xhat) const {
  Vec3 g;
  Mat3 jac;
  eval_with_jacobian(xhat, g, jac);
  return jac;
}

double Patch::omega(const Vec3& xhat) const {
  double det = jacobian(xhat).determinant();
  if (std::abs(det) < 1e-14)
    throw std::runtime_error("Patch: singular Jacobian at (" + std::to_string(xhat[0]) + ", " +
                             std::to_string(xhat[1]) + ", " + std::to_string(xhat[2]) + ")");
  return std::abs(det);
}

Mat3 Patch::Q(const Vec3& xhat) const {
  Mat3 jac = jacobian(xhat);
  double det = jac.determinant();
  if (std::abs(det) < 1e-14)
    throw std::runtime_error("Patch: singular Jacobian at (" + std::to_string(xhat[0]) + ", " +
                             std::to_string(xhat[1]) + ", " + std::to_string(xhat[2]) + ")");
  Mat3 gram = jac.transpose() * jac;
  Mat3 q = gram.inverse() * std::abs(det);
  return 0.5 * (q + q.transpose());
}

// ---- validation ----

namespace {

Vec3 face_point(int d1, Side side, double u, double v) {
  // u runs along the smaller spanning dimension, v along the larger
  Vec3 x;
  double fixed = side == Side::low ? 0.0 : 1.0;
  switch (d1) {
    case 1: x = Vec3(fixed, u, v); break;
    case 2: x = Vec3(u, fixed, v); break;
    default: x = Vec3(u, v, fixed); break;
  }
  return x;
}

int face_flag_index(int d1, Side side) { return 2 * (d1 - 1) + (side == Side::high ? 1 : 0); }

}  // namespace

ValidationReport validate_multipatch(
    const MultiPatch& m, double tol,
    const std::vector<std::array<SplineSpace, 3>>* solution_spaces) {
  ValidationReport rep;
  auto complain = [&](int idx, const std::string& what) {
    rep.issues.push_back({what, idx});
  };

  std::vector<std::pair<int, int>> seen;
  for (size_t c = 0; c < m.interfaces.size(); ++c) {
    const Interface& f = m.interfaces[c];
    if (f.j >= f.k) {
      complain(static_cast<int>(c), "interface patch ids must satisfy j < k");
      continue;
    }
    if (f.j < 1 || f.k > m.num_patches()) {
      complain(static_cast<int>(c), "interface references a missing patch");
      continue;
    }
    if (f.side_j == f.side_k)
      complain(static_cast<int>(c), "interface sides must be opposite faces");
    for (auto& s : seen)
      if (s.first == f.j && s.second == f.k)
        complain(static_cast<int>(c), "duplicate interface for patch pair");
    seen.emplace_back(f.j, f.k);

    const Patch& pj = m.patches[f.j - 1];
    const Patch& pk = m.patches[f.k - 1];
    const int ns = 7;
    double worst = 0.0;
    for (int a = 0; a <= ns; ++a)
      for (int b = 0; b <= ns; ++b) {
        double u = static_cast<double>(a) / ns, v = static_cast<double>(b) / ns;
        Vec3 xj = pj.eval(face_point(f.d1, f.side_j, u, v));
        Vec3 xk = pk.eval(face_point(f.d1, f.side_k, u, v));
        worst = std::max(worst, (xj - xk).norm());
      }
    if (worst > tol)
      complain(static_cast<int>(c), "interface " + std::to_string(f.j) + "-" + std::to_string(f.k) +
                                        " surfaces do not coincide (max gap " +
                                        std::to_string(worst) + ")");

    // trim consistency: faces on an interface must not be trimmed
    if (!m.boundary_trim.empty()) {
      if (m.boundary_trim[f.j - 1][face_flag_index(f.d1, f.side_j)] ||
          m.boundary_trim[f.k - 1][face_flag_index(f.d1, f.side_k)])
        complain(static_cast<int>(c), "interface face is marked as Dirichlet-trimmed");
    }

    if (solution_spaces) {
      auto span = f.spanning_dims();
      for (int s = 0; s < 2; ++s) {
        int d = span[s] - 1;
        const KnotVector& kj = (*solution_spaces)[f.j - 1][d].knot_vector();
        const KnotVector& kk = (*solution_spaces)[f.k - 1][d].knot_vector();
        bool equal = kj == kk;
        if (f.conforming[s]) {
          if (!equal)
            complain(static_cast<int>(c),
                     "declared conforming but knot vectors differ in dimension " +
                         std::to_string(span[s]));
        } else {
          if (f.finer_patch != f.j && f.finer_patch != f.k) {
            complain(static_cast<int>(c), "nonconforming interface without finer_patch");
            continue;
          }
          int fine = f.finer_patch, coarse = fine == f.j ? f.k : f.j;
          const SplineSpace& sf = (*solution_spaces)[fine - 1][d];
          const SplineSpace& sc = (*solution_spaces)[coarse - 1][d];
          try {
            refinement_matrix(sc, sf);
          } catch (const std::exception&) {
            complain(static_cast<int>(c),
                     "nonconforming knots are not nested in dimension " + std::to_string(span[s]));
          }
        }
      }
    }
  }
  return rep;
}

// ---- builtin geometries ----

namespace {

SplineSpace linear_space() { return SplineSpace(make_open_knot_vector(1, {})); }

// Axis-aligned box [lo, hi] as a trilinear patch.
Patch box_patch(const Vec3& lo, const Vec3& hi) {
  std::vector<Vec3> cp;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i)
        cp.emplace_back(i ? hi[0] : lo[0], j ? hi[1] : lo[1], k ? hi[2] : lo[2]);
  return Patch({linear_space(), linear_space(), linear_space()}, std::move(cp));
}

// Quarter-annulus slab: radii [r0, r1], first quadrant, z in [z0, z1].
// Dimension 1 is the circumferential arc (rational quadratic), dimension 2
// radial, dimension 3 vertical.
Patch quarter_annulus_patch(double r0, double r1, double z0, double z1) {
  SplineSpace arc(make_open_knot_vector(2, {}));
  std::array<SplineSpace, 3> sp{arc, linear_space(), linear_space()};
  const double s = 1.0 / std::sqrt(2.0);
  // quadratic rational quarter circle: (1,0) -> (1,1)/|.| -> (0,1)
  std::vector<Vec3> cp;
  std::vector<double> w;
  for (int k = 0; k < 2; ++k) {
    double z = k ? z1 : z0;
    for (int j = 0; j < 2; ++j) {
      double r = j ? r1 : r0;
      cp.emplace_back(r, 0.0, z);
      w.push_back(1.0);
      cp.emplace_back(r, r, z);
      w.push_back(s);
      cp.emplace_back(0.0, r, z);
      w.push_back(1.0);
    }
  }
  return Patch(sp, std::move(cp), std::move(w));
}

}  // namespace

MultiPatch builtin_geometry(const std::string& name) {
  MultiPatch m;
  if (name == "three_cubes") {
    // three unit cubes tiling [0,3] x [0,1]^2 along x
    for (int j = 0; j < 3; ++j)
      m.patches.push_back(box_patch(Vec3(j, 0, 0), Vec3(j + 1, 1, 1)));
    Interface f12;
    f12.j = 1;
    f12.k = 2;
    f12.d1 = 1;
    f12.side_j = Side::high;
    f12.side_k = Side::low;
    Interface f23 = f12;
    f23.j = 2;
    f23.k = 3;
    m.interfaces = {f12, f23};
    m.boundary_trim = {
        {true, false, true, true, true, true},   // patch 1: x=0 on boundary, x=1 interface
        {false, false, true, true, true, true},  // patch 2: both x faces are interfaces
        {false, true, true, true, true, true},   // patch 3: x=3 on boundary
    };
  } else if (name == "four_cuboids") {
    // [0,1]^3 split 2x2 in (x,y) into 0.5 x 0.5 x 1 cuboids
    // patch order: (x-,y-), (x+,y-), (x-,y+), (x+,y+)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i)
        m.patches.push_back(
            box_patch(Vec3(0.5 * i, 0.5 * j, 0), Vec3(0.5 * (i + 1), 0.5 * (j + 1), 1)));
    auto iface = [](int j, int k, int d1) {
      Interface f;
      f.j = j;
      f.k = k;
      f.d1 = d1;
      f.side_j = Side::high;
      f.side_k = Side::low;
      return f;
    };
    m.interfaces = {iface(1, 2, 1), iface(1, 3, 2), iface(2, 4, 2), iface(3, 4, 1)};
    m.boundary_trim = {
        {true, false, true, false, true, true},
        {false, true, true, false, true, true},
        {true, false, false, true, true, true},
        {false, true, false, true, true, true},
    };
  } else if (name == "two_annuli") {
    // two 90-degree annulus segments (radii 1..2) stacked along z
    m.patches.push_back(quarter_annulus_patch(1.0, 2.0, 0.0, 1.0));
    m.patches.push_back(quarter_annulus_patch(1.0, 2.0, 1.0, 2.0));
    Interface f;
    f.j = 1;
    f.k = 2;
    f.d1 = 3;
    f.side_j = Side::high;
    f.side_k = Side::low;
    m.interfaces = {f};
    m.boundary_trim = {
        {true, true, true, true, true, false},
        {true, true, true, true, false, true},
    };
  } else {
    throw std::invalid_argument("builtin_geometry: unknown name '" + name + "'");
  }
  return m;
}

// ---- file I/O ----

using nlohmann::json;

MultiPatch load_geometry(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "load_geometry: cannot open " + path);
  json doc = json::parse(in);
  MultiPatch m;
  for (const auto& jp : doc.at("patches")) {
    std::array<SplineSpace, 3> sp;
    auto degrees = jp.at("degrees");
    auto knots = jp.at("knots");
    for (int d = 0; d < 3; ++d)
      sp[d] = SplineSpace(KnotVector(degrees.at(d).get<int>(),
                                     knots.at(d).get<std::vector<double>>()));
    std::vector<Vec3> cp;
    for (const auto& p : jp.at("control_points"))
      cp.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
    std::vector<double> w;
    if (jp.contains("weights")) w = jp.at("weights").get<std::vector<double>>();
    m.patches.emplace_back(sp, std::move(cp), std::move(w));
  }
  for (const auto& ji : doc.at("interfaces")) {
    Interface f;
    f.j = ji.at("j").get<int>();
    f.k = ji.at("k").get<int>();
    f.d1 = ji.at("d1").get<int>();
    f.side_j = ji.at("side_j").get<std::string>() == "high" ? Side::high : Side::low;
    f.side_k = ji.at("side_k").get<std::string>() == "high" ? Side::high : Side::low;
    if (ji.contains("finer")) f.finer_patch = ji.at("finer").get<int>();
    m.interfaces.push_back(f);
  }
  if (doc.contains("boundary_trim"))
    for (const auto& jt : doc.at("boundary_trim")) {
      std::array<bool, 6> t{};
      for (int i = 0; i < 6; ++i) t[i] = jt.at(i).get<bool>();
      m.boundary_trim.push_back(t);
    }
  return m;
}

void save_geometry(const MultiPatch& m, const std::string& path) {
  json doc;
  doc["patches"] = json::array();
  for (const auto& p : m.patches) {
    json jp;
    jp["degrees"] = {p.space(0).degree(), p.space(1).degree(), p.space(2).degree()};
    jp["knots"] = {p.space(0).knot_vector().knots(), p.space(1).knot_vector().knots(),
                   p.space(2).knot_vector().knots()};
    jp["control_points"] = json::array();
    for (const auto& c : p.control_points()) jp["control_points"].push_back({c[0], c[1], c[2]});
    if (p.rational()) jp["weights"] = p.weights();
    doc["patches"].push_back(jp);
  }
  doc["interfaces"] = json::array();
  for (const auto& f : m.interfaces) {
    json ji;
    ji["j"] = f.j;
    ji["k"] = f.k;
    ji["d1"] = f.d1;
    ji["side_j"] = f.side_j == Side::high ? "high" : "low";
    ji["side_k"] = f.side_k == Side::high ? "high" : "low";
    if (f.finer_patch) ji["finer"] = f.finer_patch;
    doc["interfaces"].push_back(ji);
  }
  doc["boundary_trim"] = json::array();
  for (const auto& t : m.boundary_trim) {
    json jt = json::array();
    for (bool b : t) jt.push_back(b);
    doc["boundary_trim"].push_back(jt);
  }
  std::ofstream out(path);
  require(out.good(), "save_geometry: cannot write " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace ttiga
