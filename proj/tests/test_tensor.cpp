#include "ertn/tensor.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "ertn/errors.hpp"
#include "ertn/network.hpp"
#include "test_support.hpp"

using namespace ertn;
using test::max_abs_diff;
using test::naive_contract;
using test::random_tensor;

TEST_CASE("contract: identity matrix leaves a vector unchanged") {
  DenseTensor id(std::vector<int>{2, 2});
  id[0] = 1.0;
  id[3] = 1.0;
  DenseTensor vec(std::vector<int>{2});
  vec[0] = 1.0;
  std::vector<std::pair<int, int>> pairs{{1, 0}};
  DenseTensor out = contract(id, vec, pairs);
  CHECK(out.rank() == 1);
  CHECK(std::abs(out[0] - cplx{1.0, 0.0}) < 1e-15);
  CHECK(std::abs(out[1]) < 1e-15);
}

TEST_CASE("contract: full self-contraction equals squared Frobenius norm") {
  std::mt19937_64 rng(11);
  DenseTensor t = random_tensor({2, 2, 2}, rng);
  DenseTensor tc = t.conjugated();
  std::vector<std::pair<int, int>> pairs{{0, 0}, {1, 1}, {2, 2}};
  DenseTensor prod = contract(tc, t, pairs);
  DenseTensor oracle = naive_contract(tc, t, pairs);
  CHECK(std::abs(prod[0] - oracle[0]) < 1e-12);
  CHECK(std::abs(prod[0].real() - t.norm() * t.norm()) < 1e-12);
  CHECK(std::abs(prod[0].imag()) < 1e-12);
}

TEST_CASE("contract: identity-seeded disentangler acts as the identity map") {
  DenseTensor u = seed_tensor(NodeKind::Disentangler);
  std::mt19937_64 rng(5);
  DenseTensor state = random_tensor({2, 2}, rng);
  // feed the state into the out legs; the result appears on the in legs
  std::vector<std::pair<int, int>> pairs{{2, 0}, {3, 1}};
  DenseTensor out = contract(u, state, pairs);
  CHECK(max_abs_diff(out, state) < 1e-15);
}

TEST_CASE("contract: bilinearity in the first argument") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    DenseTensor a = random_tensor({2, 3, 2}, rng);
    DenseTensor b = random_tensor({3, 2, 2}, rng);
    cplx alpha{0.7, -1.3};
    DenseTensor a_scaled = a;
    a_scaled *= alpha;
    std::vector<std::pair<int, int>> pairs{{1, 0}, {2, 1}};
    DenseTensor lhs = contract(a_scaled, b, pairs);
    DenseTensor rhs = contract(a, b, pairs);
    rhs *= alpha;
    CHECK(max_abs_diff(lhs, rhs) < 1e-12);
  }
}

TEST_CASE("contract agrees with the nested-loop oracle on random tensors") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> rank_a(1, 3), rank_b(1, 3), npairs_dist(1, 2);
  for (int trial = 0; trial < 30; ++trial) {
    int ra = rank_a(rng) + 2, rb = rank_b(rng) + 2;  // ranks 3..5, all dims 2
    DenseTensor a = random_tensor(std::vector<int>(ra, 2), rng);
    DenseTensor b = random_tensor(std::vector<int>(rb, 2), rng);
    int np = std::min({npairs_dist(rng) + 1, ra, rb});
    std::vector<std::pair<int, int>> pairs;
    for (int k = 0; k < np; ++k) pairs.push_back({k, k});
    DenseTensor got = contract(a, b, pairs);
    DenseTensor want = naive_contract(a, b, pairs);
    CHECK(max_abs_diff(got, want) < 1e-12);
  }
}

TEST_CASE("contract errors: dimension mismatch and duplicate pairing") {
  DenseTensor a(std::vector<int>{2, 3});
  DenseTensor b(std::vector<int>{2, 2});
  std::vector<std::pair<int, int>> bad_dim{{1, 0}};
  CHECK_THROWS_AS(contract(a, b, bad_dim), ConfigError);
  std::vector<std::pair<int, int>> dup{{0, 0}, {0, 1}};
  CHECK_THROWS_AS(contract(a, b, dup), ConfigError);
}

TEST_CASE("svd: 2x2 identity has singular values (1,1)") {
  DenseTensor id(std::vector<int>{2, 2});
  id[0] = 1.0;
  id[3] = 1.0;
  auto res = svd(id, MatrixView{{0}, {1}});
  REQUIRE(res.s.size() == 2);
  CHECK(res.s[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.s[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("svd: diag(3,0) reconstructs exactly") {
  DenseTensor d(std::vector<int>{2, 2});
  d[0] = 3.0;
  auto res = svd(d, MatrixView{{0}, {1}});
  CHECK(res.s[0] == doctest::Approx(3.0));
  CHECK(res.s[1] == doctest::Approx(0.0));
  // rebuild u . diag(s) . w
  DenseTensor us = res.u;
  for (int r = 0; r < 2; ++r)
    for (int k = 0; k < 2; ++k) us[static_cast<std::size_t>(r) * 2 + k] *= res.s[k];
  std::vector<std::pair<int, int>> pairs{{1, 0}};
  DenseTensor rebuilt = contract(us, res.w, pairs);
  CHECK(max_abs_diff(rebuilt, d) < 1e-12);
}

TEST_CASE("svd: random 4x2 checked against the Gram eigen-decomposition oracle") {
  std::mt19937_64 rng(31);
  DenseTensor t = random_tensor({2, 2, 2}, rng);  // view (0,1)|(2): 4x2
  MatrixView view{{0, 1}, {2}};
  auto res = svd(t, view);

  // orthonormal columns of u
  Eigen::MatrixXcd um = matrixize(res.u, MatrixView{{0, 1}, {2}});
  Eigen::MatrixXcd gram = um.adjoint() * um;
  CHECK((gram - Eigen::MatrixXcd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);

  // reconstruction
  DenseTensor us = res.u;
  for (int r = 0; r < 4; ++r)
    for (int k = 0; k < 2; ++k) us[static_cast<std::size_t>(r) * 2 + k] *= res.s[k];
  std::vector<std::pair<int, int>> pairs{{2, 0}};
  DenseTensor rebuilt = contract(us, res.w, pairs);
  CHECK(max_abs_diff(rebuilt, t) < 1e-10);

  // eigenvalues of t^dag t are the squared singular values
  Eigen::MatrixXcd m = matrixize(t, view);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m.adjoint() * m);
  CHECK(std::abs(es.eigenvalues()(1) - res.s[0] * res.s[0]) < 1e-10);
  CHECK(std::abs(es.eigenvalues()(0) - res.s[1] * res.s[1]) < 1e-10);
  CHECK(res.s[0] >= res.s[1]);
}

TEST_CASE("svd rejects non-finite input") {
  DenseTensor t(std::vector<int>{2, 2});
  t[0] = cplx(std::nan(""), 0.0);
  CHECK_THROWS_AS(svd(t, MatrixView{{0}, {1}}), NumericError);
}

TEST_CASE("random_isometry: 4x2 isometry condition") {
  std::mt19937_64 rng(41);
  DenseTensor t = random_isometry({2, 2, 2}, MatrixView{{0, 1}, {2}}, rng);
  CHECK(isometry_deviation(t, MatrixView{{0, 1}, {2}}) < 1e-12);
}

TEST_CASE("random_isometry: 4x4 unitary satisfies both conditions") {
  std::mt19937_64 rng(43);
  MatrixView view{{0, 1}, {2, 3}};
  DenseTensor t = random_isometry({2, 2, 2, 2}, view, rng);
  CHECK(isometry_deviation(t, view) < 1e-12);
  CHECK(coisometry_deviation(t, view) < 1e-12);
}

TEST_CASE("random_isometry: 4x1 top tensor has unit norm") {
  std::mt19937_64 rng(47);
  DenseTensor t = random_isometry({2, 2}, MatrixView{{0, 1}, {}}, rng);
  CHECK(std::abs(t.norm() - 1.0) < 1e-12);
}

TEST_CASE("random_isometry rejects impossible shapes") {
  std::mt19937_64 rng(53);
  CHECK_THROWS_AS(random_isometry({2, 2, 2}, MatrixView{{0}, {1, 2}}, rng), ConfigError);
}

TEST_CASE("permute round-trip and element order") {
  std::mt19937_64 rng(59);
  DenseTensor t = random_tensor({2, 3, 4}, rng);
  std::vector<int> order{2, 0, 1};
  DenseTensor p = t.permuted(order);
  CHECK(p.dims() == std::vector<int>{4, 2, 3});
  std::vector<int> inv{1, 2, 0};
  DenseTensor back = p.permuted(inv);
  CHECK(max_abs_diff(back, t) == 0.0);
}
