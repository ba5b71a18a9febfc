#include "ttiga/assembly.hpp"

#include <cmath>
#include <set>

namespace ttiga {

namespace {

std::vector<double> union_interior(const KnotVector& a, const KnotVector& b) {
  std::vector<double> out = a.interior_knots();
  for (double k : b.interior_knots()) {
    bool dup = false;
    for (double e : out) dup = dup || std::abs(e - k) <= 1e-12;
    if (!dup) out.push_back(k);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Quadrature data for one dimension: nodes on the union spans, basis values
// and first derivatives of the solution space, values of the interp space.
struct UniQuad {
  VectorXd wq;
  MatrixXd b0, b1;  // solution basis: (n x nq)
  MatrixXd bhat;    // interpolation basis: (nhat x nq)
};

UniQuad make_uniquad(const SplineSpace& sol, const SplineSpace& interp, int q) {
  QuadratureGrid g = gauss_quadrature(sol, interp, q);
  const int nq = static_cast<int>(g.nodes.size());
  UniQuad u;
  u.wq = Eigen::Map<const VectorXd>(g.weights.data(), nq);
  u.b0.resize(sol.size(), nq);
  u.b1.resize(sol.size(), nq);
  u.bhat.resize(interp.size(), nq);
  for (int k = 0; k < nq; ++k) {
    u.b0.col(k) = sol.eval_basis(g.nodes[k]);
    u.b1.col(k) = sol.eval_basis_deriv(g.nodes[k], 1);
    u.bhat.col(k) = interp.eval_basis(g.nodes[k]);
  }
  return u;
}

MatrixXd weighted_matrix(const UniQuad& u, const VectorXd& wcoef, int da, int db) {
  VectorXd what = u.bhat.transpose() * wcoef;  // interpolant at the nodes
  VectorXd scale = what.cwiseProduct(u.wq);
  const MatrixXd& rows = da == 0 ? u.b0 : u.b1;
  const MatrixXd& cols = db == 0 ? u.b0 : u.b1;
  return rows * scale.asDiagonal() * cols.transpose();
}

TTVector sample_param_field(const std::array<std::vector<double>, 3>& nodes,
                            const ParamField& field, double tol, long cap, unsigned long seed) {
  std::vector<int> shape{static_cast<int>(nodes[0].size()), static_cast<int>(nodes[1].size()),
                         static_cast<int>(nodes[2].size())};
  CrossOptions copts;
  copts.tol = tol;
  copts.dense_cap = cap;
  copts.seed = seed;
  TensorSampler sampler = [&](const std::vector<int>& idx) {
    return field(Vec3(nodes[0][idx[0]], nodes[1][idx[1]], nodes[2][idx[2]]));
  };
  CrossReport rep;
  return tt_cross(sampler, shape, copts, &rep);
}

}  // namespace

std::array<SplineSpace, 3> weight_interp_spaces(const PatchDiscretization& disc,
                                                const AssemblyOptions& opts) {
  std::array<SplineSpace, 3> out;
  for (int d = 0; d < 3; ++d) {
    int degree = disc.spaces[d].degree() + opts.interp_degree_bump;
    std::vector<double> interior;
    if (disc.patch->rational()) {
      interior =
          union_interior(disc.patch->space(d).knot_vector(), disc.spaces[d].knot_vector());
    } else {
      interior = disc.patch->space(d).knot_vector().interior_knots();
    }
    out[d] = SplineSpace(make_open_knot_vector(degree, interior));
  }
  return out;
}

double weight_eval(const WeightTT& w, const Vec3& xhat) {
  MatrixXd v = MatrixXd::Ones(1, 1);
  for (int d = 0; d < 3; ++d) {
    VectorXd b = w.interp_spaces[d].eval_basis(xhat[d]);
    const Core3& c = w.coeffs.core(d);
    MatrixXd contracted = MatrixXd::Zero(c.r0, c.r1);
    for (int i = 0; i < c.n; ++i)
      if (b[i] != 0.0) contracted += b[i] * c.slice(i);
    v = v * contracted;
  }
  return v(0, 0);
}

WeightTT interpolate_weight(const Patch& patch, const ParamField& field,
                            const std::array<SplineSpace, 3>& interp_spaces,
                            const AssemblyOptions& opts) {
  (void)patch;
  std::array<std::vector<double>, 3> grev;
  for (int d = 0; d < 3; ++d) grev[d] = interp_spaces[d].greville_points();

  TTVector samples = sample_param_field(grev, field, opts.eps * 0.1, opts.dense_cap, opts.seed);

  // apply the inverse univariate collocation operators core-wise
  TTVector coeffs = samples;
  for (int d = 0; d < 3; ++d) {
    MatrixXd c = collocation_matrix(interp_spaces[d], grev[d]);
    Eigen::PartialPivLU<MatrixXd> lu(c);
    coeffs = tt_apply_mode(coeffs, d, lu.inverse());
  }
  coeffs = tt_round(coeffs, opts.eps * 1e-3);

  WeightTT w{coeffs, interp_spaces, 0.0, 1.0};

  // verify the node-residual contract on a random node subset
  std::mt19937_64 rng(opts.seed ^ 0x5eedULL);
  double max_res = 0.0, scale = 0.0;
  for (int k = 0; k < 64; ++k) {
    Vec3 x;
    for (int d = 0; d < 3; ++d) {
      int i = std::uniform_int_distribution<int>(0, interp_spaces[d].size() - 1)(rng);
      x[d] = grev[d][i];
    }
    double fx = field(x);
    max_res = std::max(max_res, std::abs(weight_eval(w, x) - fx));
    scale = std::max(scale, std::abs(fx));
  }
  w.node_residual = max_res;
  w.sample_scale = std::max(scale, 1e-300);
  if (max_res > opts.eps * std::max(scale, 1.0) * 10)
    throw std::runtime_error("interpolate_weight: node residual " + std::to_string(max_res) +
                             " exceeds tolerance");
  return w;
}

MatrixXd univariate_weighted_matrix(const SplineSpace& trial, const SplineSpace& test,
                                    const VectorXd& weight_coeffs,
                                    const SplineSpace& interp_space, int da, int db,
                                    int quad_points) {
  require(weight_coeffs.size() == interp_space.size(),
          "univariate_weighted_matrix: weight coefficient count mismatch");
  int q = quad_points > 0 ? quad_points
                          : std::max({trial.degree(), test.degree(), interp_space.degree()}) + 1;
  // union of all three breakpoint sets via a degree-0 carrier space
  SplineSpace carrier(
      make_open_knot_vector(0, union_interior(test.knot_vector(), trial.knot_vector())));
  QuadratureGrid g = gauss_quadrature(carrier, interp_space, q);
  const int nq = static_cast<int>(g.nodes.size());
  MatrixXd m = MatrixXd::Zero(test.size(), trial.size());
  for (int k = 0; k < nq; ++k) {
    double what = interp_space.eval_basis(g.nodes[k]).dot(weight_coeffs);
    VectorXd r = da == 0 ? test.eval_basis(g.nodes[k]) : test.eval_basis_deriv(g.nodes[k], da);
    VectorXd c = db == 0 ? trial.eval_basis(g.nodes[k]) : trial.eval_basis_deriv(g.nodes[k], db);
    m += (g.weights[k] * what) * r * c.transpose();
  }
  return m;
}

namespace {

// TT operator from per-dimension factor lists following the weight TT rank
// structure: dim 0 indexed by a (R1), dim 1 by a + R1*b, dim 2 by b (R2).
TTOperator operator_from_factors(const std::array<std::vector<MatrixXd>, 3>& factors, int R1,
                                 int R2) {
  std::vector<Core4> cores(3);
  {
    const auto& f = factors[0];
    Core4 c(1, static_cast<int>(f[0].rows()), static_cast<int>(f[0].cols()), R1);
    for (int a = 0; a < R1; ++a)
      for (int j = 0; j < c.n; ++j)
        for (int i = 0; i < c.m; ++i) c.at(0, i, j, a) = f[a](i, j);
    cores[0] = std::move(c);
  }
  {
    const auto& f = factors[1];
    Core4 c(R1, static_cast<int>(f[0].rows()), static_cast<int>(f[0].cols()), R2);
    for (int b = 0; b < R2; ++b)
      for (int a = 0; a < R1; ++a)
        for (int j = 0; j < c.n; ++j)
          for (int i = 0; i < c.m; ++i) c.at(a, i, j, b) = f[a + R1 * b](i, j);
    cores[1] = std::move(c);
  }
  {
    const auto& f = factors[2];
    Core4 c(R2, static_cast<int>(f[0].rows()), static_cast<int>(f[0].cols()), 1);
    for (int b = 0; b < R2; ++b)
      for (int j = 0; j < c.n; ++j)
        for (int i = 0; i < c.m; ++i) c.at(b, i, j, 0) = f[b](i, j);
    cores[2] = std::move(c);
  }
  return TTOperator(std::move(cores));
}

VectorXd weight_slice(const TTVector& w, int d, int a, int b) {
  const Core3& c = w.core(d);
  VectorXd v(c.n);
  for (int i = 0; i < c.n; ++i) v[i] = c.at(a, i, b);
  return v;
}

struct PatchWorkspace {
  std::array<SplineSpace, 3> interp;
  std::array<UniQuad, 3> quad;
};

PatchWorkspace make_workspace(const PatchDiscretization& disc, const AssemblyOptions& opts) {
  PatchWorkspace ws;
  ws.interp = weight_interp_spaces(disc, opts);
  int q = opts.quad_points > 0 ? opts.quad_points : disc.spaces[0].degree() + 1;
  for (int d = 0; d < 3; ++d) ws.quad[d] = make_uniquad(disc.spaces[d], ws.interp[d], q);
  return ws;
}

// sum_r (x)_d factor(w_r^{(d)}, da_d, db_d) for one weight field, trimmed.
TTOperator weighted_operator(const PatchDiscretization& disc, const PatchWorkspace& ws,
                             const WeightTT& w, const std::array<int, 3>& da,
                             const std::array<int, 3>& db,
                             std::array<std::vector<MatrixXd>, 3>* factors_out = nullptr) {
  const auto ranks = w.coeffs.ranks();
  const int R1 = ranks[0], R2 = ranks[1];
  auto trim_block = [&](const MatrixXd& m, int d) {
    int s = disc.trim_start(d), n = disc.trimmed_size(d);
    return MatrixXd(m.block(s, s, n, n));
  };
  std::array<std::vector<MatrixXd>, 3> factors;
  for (int a = 0; a < R1; ++a)
    factors[0].push_back(
        trim_block(weighted_matrix(ws.quad[0], weight_slice(w.coeffs, 0, 0, a), da[0], db[0]), 0));
  for (int b = 0; b < R2; ++b)
    for (int a = 0; a < R1; ++a)
      factors[1].push_back(trim_block(
          weighted_matrix(ws.quad[1], weight_slice(w.coeffs, 1, a, b), da[1], db[1]), 1));
  for (int b = 0; b < R2; ++b)
    factors[2].push_back(
        trim_block(weighted_matrix(ws.quad[2], weight_slice(w.coeffs, 2, b, 0), da[2], db[2]), 2));
  if (factors_out) *factors_out = factors;
  return operator_from_factors(factors, R1, R2);
}

}  // namespace

TTOperator assemble_mass(const PatchDiscretization& disc, const AssemblyOptions& opts,
                         PatchOperators* factors_out) {
  PatchWorkspace ws = make_workspace(disc, opts);
  WeightTT w = interpolate_weight(
      *disc.patch, [&](const Vec3& x) { return disc.patch->omega(x); }, ws.interp, opts);
  std::array<std::vector<MatrixXd>, 3> factors;
  TTOperator m = weighted_operator(disc, ws, w, {0, 0, 0}, {0, 0, 0}, &factors);
  if (factors_out) {
    factors_out->mass_factors = factors;
    auto ranks = w.coeffs.ranks();
    factors_out->mass_weight_ranks = {ranks[0], ranks[1]};
  }
  return tt_op_round(m, opts.eps);
}

TTOperator assemble_stiffness(const PatchDiscretization& disc, const AssemblyOptions& opts) {
  PatchWorkspace ws = make_workspace(disc, opts);
  // the six distinct entries of the symmetric matrix Q, each interpolated
  // independently
  std::array<std::array<WeightTT, 3>, 3> q;
  for (int k = 0; k < 3; ++k)
    for (int l = k; l < 3; ++l)
      q[k][l] = interpolate_weight(
          *disc.patch, [&](const Vec3& x) { return disc.patch->Q(x)(k, l); }, ws.interp, opts);
  TTOperator sum;
  bool first = true;
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l) {
      const WeightTT& w = q[std::min(k, l)][std::max(k, l)];
      std::array<int, 3> da{}, db{};
      da[k] = 1;
      db[l] = 1;
      TTOperator term = weighted_operator(disc, ws, w, da, db);
      sum = first ? term : tt_op_add(sum, term);
      first = false;
    }
  return tt_op_round(sum, opts.eps);
}

TTVector assemble_rhs(const PatchDiscretization& disc, const PhysField& f,
                      const AssemblyOptions& opts) {
  int q = opts.quad_points > 0 ? opts.quad_points : disc.spaces[0].degree() + 2;
  std::array<std::vector<double>, 3> nodes;
  std::array<MatrixXd, 3> moment;  // (n_d x nq_d): basis values times weights
  for (int d = 0; d < 3; ++d) {
    QuadratureGrid g = gauss_quadrature(disc.spaces[d], disc.patch->space(d), q);
    nodes[d] = g.nodes;
    const int nq = static_cast<int>(g.nodes.size());
    moment[d].resize(disc.spaces[d].size(), nq);
    for (int k = 0; k < nq; ++k)
      moment[d].col(k) = g.weights[k] * disc.spaces[d].eval_basis(g.nodes[k]);
  }
  ParamField integrand = [&](const Vec3& xhat) {
    return f(disc.patch->eval(xhat)) * disc.patch->omega(xhat);
  };
  TTVector fq = sample_param_field(nodes, integrand, opts.eps * 0.01, opts.dense_cap, opts.seed);
  TTVector rhs = fq;
  for (int d = 0; d < 3; ++d) rhs = tt_apply_mode(rhs, d, moment[d]);
  return tt_round(dirichlet_trim(rhs, disc), opts.eps * 0.01);
}

TTVector dirichlet_trim(const TTVector& full, const PatchDiscretization& disc) {
  require(full.order() == 3, "dirichlet_trim: expected a 3-mode tensor");
  std::vector<Core3> cores;
  for (int d = 0; d < 3; ++d) {
    const Core3& c = full.core(d);
    require(c.n == disc.spaces[d].size(), "dirichlet_trim: size mismatch");
    int s = disc.trim_start(d), n = disc.trimmed_size(d);
    Core3 t(c.r0, n, c.r1);
    for (int i = 0; i < n; ++i) t.set_slice(i, c.slice(s + i));
    cores.push_back(std::move(t));
  }
  return TTVector(std::move(cores));
}

TTOperator dirichlet_trim(const TTOperator& full, const PatchDiscretization& disc) {
  require(full.order() == 3, "dirichlet_trim: expected a 3-mode operator");
  std::vector<Core4> cores;
  for (int d = 0; d < 3; ++d) {
    const Core4& c = full.core(d);
    require(c.m == disc.spaces[d].size() && c.n == disc.spaces[d].size(),
            "dirichlet_trim: size mismatch");
    int s = disc.trim_start(d), n = disc.trimmed_size(d);
    Core4 t(c.r0, n, n, c.r1);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) t.set_slice(i, j, c.slice(s + i, s + j));
    cores.push_back(std::move(t));
  }
  return TTOperator(std::move(cores));
}

PatchOperators assemble_patch(const PatchDiscretization& disc, const AssemblyOptions& opts) {
  PatchOperators ops;
  ops.mass = assemble_mass(disc, opts, &ops);
  ops.stiffness = assemble_stiffness(disc, opts);
  ops.trimmed_sizes = disc.trimmed_sizes();
  return ops;
}

}  // namespace ttiga
