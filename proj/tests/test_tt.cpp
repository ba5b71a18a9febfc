#include <doctest.h>

#include <random>

#include "oracle.hpp"
#include "ttiga/tt.hpp"

using namespace ttiga;

namespace {
std::mt19937_64 rng(12345);

VectorXd random_vec(int n) {
  std::normal_distribution<double> d(0.0, 1.0);
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}
}  // namespace

TEST_CASE("tt_from_dense: rank-one outer product gives unit ranks") {
  auto t = oracle::outer({random_vec(4), random_vec(4), random_vec(4)});
  TTVector x = tt_from_dense(t, 1e-12);
  CHECK(x.ranks() == std::vector<int>{1, 1});
  CHECK((tt_to_dense(x).data() - t.data()).norm() <= 1e-12 * t.norm());
}

TEST_CASE("tt_from_dense: zero tensor") {
  DenseTensor t({3, 3, 3});
  TTVector x = tt_from_dense(t, 1e-10);
  CHECK(x.ranks() == std::vector<int>{1, 1});
  CHECK(x.norm() == 0.0);
}

TEST_CASE("tt_from_dense: tol=0 round-trip on random tensor") {
  auto t = oracle::random_tensor({4, 4, 4}, rng);
  TTVector x = tt_from_dense(t, 0.0);
  auto back = tt_to_dense(x);
  CHECK((back.data() - t.data()).norm() <= 1e-13 * t.norm());
}

TEST_CASE("tt_from_dense: error bound holds for a range of tolerances") {
  auto t = oracle::random_tensor({5, 6, 4, 3}, rng);
  for (double tol : {1e-1, 1e-3, 1e-6, 1e-10}) {
    TTVector x = tt_from_dense(t, tol);
    CHECK((tt_to_dense(x).data() - t.data()).norm() <= tol * t.norm() * (1 + 1e-12));
  }
}

TEST_CASE("tt_to_dense: size cap enforced") {
  TTVector x = TTVector::zero({100, 100, 101});
  CHECK_THROWS_AS(tt_to_dense(x), std::runtime_error);
}

TEST_CASE("tt_round: x+x keeps the ranks of x") {
  auto t = oracle::random_tensor({4, 5, 4}, rng);
  TTVector x = tt_from_dense(t, 1e-8);
  TTVector s = tt_round(tt_add(x, x), 1e-12);
  CHECK(s.ranks() == x.ranks());
  CHECK((tt_to_dense(s).data() - 2.0 * t.data()).norm() <= 1e-10 * t.norm());
}

TEST_CASE("tt_round: tol=0 preserves the norm") {
  auto t = oracle::random_tensor({4, 4, 4, 4}, rng);
  TTVector x = tt_from_dense(t, 0.0);
  TTVector r = tt_round(x, 0.0);
  CHECK(r.norm() == doctest::Approx(x.norm()).epsilon(1e-13));
}

TEST_CASE("tt_round: sum of R rank-one terms rounds to rank <= R") {
  const int R = 3;
  TTVector acc = TTVector::zero({5, 5, 5});
  for (int k = 0; k < R; ++k)
    acc = tt_add(acc, TTVector::rank_one({random_vec(5), random_vec(5), random_vec(5)}));
  TTVector r = tt_round(acc, 0.0);
  for (int rank : r.ranks()) CHECK(rank <= R);
}

TEST_CASE("tt_round: relative error bound against dense oracle") {
  auto t = oracle::random_tensor({6, 5, 6}, rng);
  TTVector x = tt_from_dense(t, 0.0);
  for (double tol : {1e-2, 1e-5}) {
    TTVector r = tt_round(x, tol);
    CHECK((tt_to_dense(r).data() - t.data()).norm() <= tol * t.norm() * (1 + 1e-12));
    auto rx = r.ranks();
    auto xx = x.ranks();
    for (size_t i = 0; i < rx.size(); ++i) CHECK(rx[i] <= xx[i]);
  }
}

TEST_CASE("tt_add: entrywise sum and rank bound") {
  auto ta = oracle::random_tensor({3, 4, 3}, rng);
  auto tb = oracle::random_tensor({3, 4, 3}, rng);
  TTVector a = tt_from_dense(ta, 1e-13);
  TTVector b = tt_from_dense(tb, 1e-13);
  TTVector s = tt_add(a, b);
  CHECK((tt_to_dense(s).data() - (ta.data() + tb.data())).norm() <= 1e-11 * ta.norm());
  auto rs = s.ranks();
  auto ra = a.ranks();
  auto rb = b.ranks();
  for (size_t i = 0; i < rs.size(); ++i) CHECK(rs[i] <= ra[i] + rb[i]);

  TTVector z = tt_round(tt_add(a, TTVector::zero({3, 4, 3})), 0.0);
  CHECK((tt_to_dense(z).data() - ta.data()).norm() <= 1e-12 * ta.norm());
  CHECK(tt_add(a, a).norm() == doctest::Approx(2 * a.norm()).epsilon(1e-12));
}

TEST_CASE("tt_add: shape mismatch throws") {
  TTVector a = TTVector::zero({3, 4});
  TTVector b = TTVector::zero({4, 3});
  CHECK_THROWS_AS(tt_add(a, b), std::invalid_argument);
}

TEST_CASE("tt_inner: matches dense inner product") {
  auto ta = oracle::random_tensor({3, 3, 3}, rng);
  auto tb = oracle::random_tensor({3, 3, 3}, rng);
  TTVector a = tt_from_dense(ta, 0.0);
  TTVector b = tt_from_dense(tb, 0.0);
  double dense = ta.data().dot(tb.data());
  CHECK(tt_inner(a, b) == doctest::Approx(dense).epsilon(1e-13));
  CHECK(tt_inner(a, a) == doctest::Approx(ta.data().squaredNorm()).epsilon(1e-13));
}

TEST_CASE("tt_inner: unit tensor against all-ones") {
  TTVector e = TTVector::unit({4, 5, 6}, {1, 2, 3});
  TTVector ones = TTVector::rank_one(
      {VectorXd::Ones(4), VectorXd::Ones(5), VectorXd::Ones(6)});
  CHECK(tt_inner(e, ones) == doctest::Approx(1.0));
}

TEST_CASE("tt_inner: symmetric and bilinear on random triples") {
  for (int rep = 0; rep < 5; ++rep) {
    auto ta = oracle::random_tensor({3, 4, 5}, rng);
    auto tb = oracle::random_tensor({3, 4, 5}, rng);
    auto tc = oracle::random_tensor({3, 4, 5}, rng);
    TTVector a = tt_from_dense(ta, 0.0), b = tt_from_dense(tb, 0.0), c = tt_from_dense(tc, 0.0);
    double scale = std::abs(tt_inner(a, b)) + 1.0;
    CHECK(tt_inner(a, b) == doctest::Approx(tt_inner(b, a)).epsilon(1e-12));
    double lhs = tt_inner(tt_add(a, tt_scale(c, 0.7)), b);
    double rhs = tt_inner(a, b) + 0.7 * tt_inner(c, b);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * scale * 10);
  }
}

TEST_CASE("tt_apply: identity operator returns x") {
  auto t = oracle::random_tensor({3, 4, 3}, rng);
  TTVector x = tt_from_dense(t, 0.0);
  TTVector y = tt_apply(TTOperator::identity({3, 4, 3}), x, 0.0);
  CHECK((tt_to_dense(y).data() - t.data()).norm() <= 1e-13 * t.norm());
}

TEST_CASE("tt_apply: Kronecker operator maps outer product factorwise") {
  MatrixXd a1 = MatrixXd::Random(3, 4), a2 = MatrixXd::Random(2, 5), a3 = MatrixXd::Random(4, 3);
  VectorXd u = random_vec(4), v = random_vec(5), w = random_vec(3);
  TTOperator k = TTOperator::kronecker({a1, a2, a3});
  TTVector x = TTVector::rank_one({u, v, w});
  TTVector y = tt_apply(k, x, 0.0);
  auto expect = oracle::outer({a1 * u, a2 * v, a3 * w});
  CHECK((tt_to_dense(y).data() - expect.data()).norm() <= 1e-12 * expect.norm());
}

TEST_CASE("tt_apply: random operator matches dense matvec") {
  std::vector<int> shape{3, 3, 3};
  auto t = oracle::random_tensor(shape, rng);
  TTVector x = tt_from_dense(t, 0.0);
  CanonicalSum s;
  for (int r = 0; r < 3; ++r)
    s.terms.push_back({MatrixXd::Random(3, 3), MatrixXd::Random(3, 3), MatrixXd::Random(3, 3)});
  TTOperator a = canonical_to_tt(s);
  TTVector y = tt_apply(a, x, 1e-14);
  MatrixXd am = oracle::op_to_matrix(a);
  VectorXd expect = am * t.data();
  CHECK((tt_to_dense(y).data() - expect).norm() <= 1e-12 * expect.norm());
}

TEST_CASE("tt_apply: shape mismatch throws") {
  TTOperator id = TTOperator::identity({3, 3});
  CHECK_THROWS_AS(tt_apply(id, TTVector::zero({3, 4}), 0.0), std::invalid_argument);
}

TEST_CASE("tt_compose: identity neutral and dense matmul equivalence") {
  CanonicalSum s;
  for (int r = 0; r < 2; ++r)
    s.terms.push_back({MatrixXd::Random(3, 4), MatrixXd::Random(2, 3), MatrixXd::Random(3, 2)});
  TTOperator a = canonical_to_tt(s);
  TTOperator ai = tt_compose(a, TTOperator::identity({4, 3, 2}), 0.0);
  CHECK((oracle::op_to_matrix(ai) - oracle::op_to_matrix(a)).norm() <=
        1e-13 * oracle::op_to_matrix(a).norm());

  CanonicalSum s2;
  for (int r = 0; r < 2; ++r)
    s2.terms.push_back({MatrixXd::Random(4, 3), MatrixXd::Random(3, 3), MatrixXd::Random(2, 4)});
  TTOperator b = canonical_to_tt(s2);
  TTOperator ab = tt_compose(a, b, 1e-14);
  MatrixXd dense = oracle::op_to_matrix(a) * oracle::op_to_matrix(b);
  CHECK((oracle::op_to_matrix(ab) - dense).norm() <= 1e-12 * dense.norm());
}

TEST_CASE("tt_compose: Kronecker factors compose factorwise") {
  MatrixXd a1 = MatrixXd::Random(3, 3), a2 = MatrixXd::Random(4, 4);
  MatrixXd b1 = MatrixXd::Random(3, 3), b2 = MatrixXd::Random(4, 4);
  TTOperator ab = tt_compose(TTOperator::kronecker({a1, a2}), TTOperator::kronecker({b1, b2}), 0.0);
  TTOperator expect = TTOperator::kronecker({a1 * b1, a2 * b2});
  CHECK((oracle::op_to_matrix(ab) - oracle::op_to_matrix(expect)).norm() <=
        1e-12 * oracle::op_to_matrix(expect).norm());
}

TEST_CASE("canonical_to_tt: single term has unit ranks, sums match dense kron") {
  CanonicalSum one;
  one.terms.push_back({MatrixXd::Random(3, 2), MatrixXd::Random(2, 4), MatrixXd::Random(3, 3)});
  TTOperator a1 = canonical_to_tt(one);
  CHECK(a1.ranks() == std::vector<int>{1, 1});

  CanonicalSum two = one;
  two.terms.push_back({MatrixXd::Random(3, 2), MatrixXd::Random(2, 4), MatrixXd::Random(3, 3)});
  TTOperator a2 = canonical_to_tt(two);
  for (int r : a2.ranks()) CHECK(r <= 2);
  MatrixXd dense = oracle::kron_tensor_order(two.terms[0]) + oracle::kron_tensor_order(two.terms[1]);
  CHECK((oracle::op_to_matrix(a2) - dense).norm() <= 1e-13 * dense.norm());
}

TEST_CASE("canonical_to_tt: inconsistent factor shapes throw") {
  CanonicalSum bad;
  bad.terms.push_back({MatrixXd::Random(3, 2), MatrixXd::Random(2, 4)});
  bad.terms.push_back({MatrixXd::Random(3, 2), MatrixXd::Random(3, 4)});
  CHECK_THROWS_AS(canonical_to_tt(bad), std::invalid_argument);
}

TEST_CASE("tt_merge_modes: singleton merge keeps entries") {
  auto t = oracle::random_tensor({1, 4, 5}, rng);
  TTVector x = tt_from_dense(t, 0.0);
  TTVector m = tt_merge_modes(x, 0);
  CHECK(m.shape() == std::vector<int>{4, 5});
  CHECK((tt_to_dense(m).data() - t.data()).norm() <= 1e-13 * t.norm());
}

TEST_CASE("tt_merge_modes then split restores shape and entries") {
  auto t = oracle::random_tensor({3, 4, 5}, rng);
  TTVector x = tt_from_dense(t, 0.0);
  TTVector m = tt_merge_modes(x, 1);
  CHECK(m.shape() == std::vector<int>{3, 20});
  TTVector s = tt_split_mode(m, 1, 4, 5);
  CHECK(s.shape() == std::vector<int>{3, 4, 5});
  CHECK((tt_to_dense(s).data() - t.data()).norm() <= 1e-12 * t.norm());
}

TEST_CASE("tt_merge_modes: rank-one stays rank-one") {
  TTVector x = TTVector::rank_one({random_vec(3), random_vec(4), random_vec(5)});
  TTVector m = tt_merge_modes(x, 0);
  CHECK(m.ranks() == std::vector<int>{1});
}

TEST_CASE("tt_merge_modes: invalid index throws") {
  TTVector x = TTVector::zero({3, 4});
  CHECK_THROWS_AS(tt_merge_modes(x, 1), std::invalid_argument);
}

TEST_CASE("tt_hadamard matches dense entrywise product") {
  auto ta = oracle::random_tensor({3, 4, 3}, rng);
  auto tb = oracle::random_tensor({3, 4, 3}, rng);
  TTVector h = tt_hadamard(tt_from_dense(ta, 0.0), tt_from_dense(tb, 0.0));
  VectorXd expect = ta.data().cwiseProduct(tb.data());
  CHECK((tt_to_dense(h).data() - expect).norm() <= 1e-12 * expect.norm());
}

TEST_CASE("tt_scale_mode and tt_apply_mode match dense") {
  auto t = oracle::random_tensor({3, 4, 5}, rng);
  TTVector x = tt_from_dense(t, 0.0);
  VectorXd w = random_vec(4);
  TTVector sm = tt_scale_mode(x, 1, w);
  DenseTensor expect = t;
  for (int k = 0; k < 5; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 3; ++i) expect.at({i, j, k}) *= w[j];
  CHECK((tt_to_dense(sm).data() - expect.data()).norm() <= 1e-12 * expect.norm());

  MatrixXd m = MatrixXd::Random(2, 4);
  TTVector am = tt_apply_mode(x, 1, m);
  CHECK(am.shape() == std::vector<int>{3, 2, 5});
  DenseTensor ex2({3, 2, 5});
  for (int k = 0; k < 5; ++k)
    for (int i2 = 0; i2 < 2; ++i2)
      for (int i = 0; i < 3; ++i) {
        double s = 0;
        for (int j = 0; j < 4; ++j) s += m(i2, j) * t.at({i, j, k});
        ex2.at({i, i2, k}) = s;
      }
  CHECK((tt_to_dense(am).data() - ex2.data()).norm() <= 1e-12 * ex2.norm());
}

TEST_CASE("rank chain is validated after operations") {
  auto t = oracle::random_tensor({4, 4, 4}, rng);
  TTVector x = tt_from_dense(t, 1e-6);
  x.check_consistent();
  tt_add(x, x).check_consistent();
  tt_round(x, 1e-3).check_consistent();
}

TEST_CASE("BlockTTVector: keys stay ordered, inner sums per block") {
  auto ta = oracle::random_tensor({3, 3}, rng);
  auto tb = oracle::random_tensor({4, 2}, rng);
  BlockTTVector x({7, 2}, {tt_from_dense(ta, 0.0), tt_from_dense(tb, 0.0)});
  CHECK(x.keys() == std::vector<int>{7, 2});
  double expect = ta.data().squaredNorm() + tb.data().squaredNorm();
  CHECK(block_inner(x, x) == doctest::Approx(expect).epsilon(1e-13));
  CHECK(x.norm() == doctest::Approx(std::sqrt(expect)).epsilon(1e-13));

  BlockTTVector y = block_scale(x, -1.0);
  BlockTTVector s = block_add(x, y);
  CHECK(s.norm() <= 1e-13 * x.norm());
}

TEST_CASE("BlockTTVector: duplicate keys rejected") {
  CHECK_THROWS_AS(BlockTTVector({1, 1}, {TTVector::zero({2}), TTVector::zero({2})}),
                  std::invalid_argument);
}
