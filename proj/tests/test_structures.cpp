#include <doctest.h>

#include <Eigen/Dense>
#include <cstdio>
#include <random>

#include "riskmap/spatial_graph.hpp"
#include "riskmap/structures.hpp"
#include "support/oracles.hpp"

using namespace riskmap;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("rw2 structure is D'D with nullity 2") {
  const auto s = rw2_structure(4);
  MatrixXd d(2, 4);
  d << 1, -2, 1, 0, 0, 1, -2, 1;
  CHECK(MatrixXd(s.entries).isApprox((d.transpose() * d).eval()));
  CHECK(s.rank_deficiency == 2);
  verify_structure(s, "rw2-4");

  // interior rows follow the [1,-4,6,-4,1] pattern once T >= 5
  const auto s5 = rw2_structure(5);
  CHECK(MatrixXd(s5.entries)(2, 2) == doctest::Approx(6.0));
  CHECK(MatrixXd(s5.entries)(2, 0) == doctest::Approx(1.0));
  CHECK(MatrixXd(s5.entries)(2, 1) == doctest::Approx(-4.0));

  CHECK_THROWS_AS(rw2_structure(2), Error);
}

TEST_CASE("rw2 annihilates linear sequences") {
  for (const int T : {3, 4, 7, 30}) {
    const auto s = rw2_structure(T);
    VectorXd lin(T);
    for (int t = 0; t < T; ++t) lin[t] = 2.5 - 0.75 * t;
    CHECK((s.entries * lin).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("rw2 at the study length has rank T-2") {
  const auto s = rw2_structure(182);
  CHECK(oracles::numerical_rank(MatrixXd(s.entries)) == 180);
  verify_structure(s, "rw2-182");
}

TEST_CASE("iid structure") {
  CHECK(MatrixXd(iid_structure(1).entries) == MatrixXd::Identity(1, 1));
  const auto s5 = iid_structure(5);
  CHECK(MatrixXd(s5.entries).isApprox(MatrixXd::Identity(5, 5)));
  CHECK(s5.rank_deficiency == 0);
  CHECK(oracles::numerical_rank(MatrixXd(s5.entries)) == 5);
  CHECK(MatrixXd(iid_structure(42).entries).isApprox(MatrixXd::Identity(42, 42)));
}

TEST_CASE("interaction kind I is exactly the exchangeable structure") {
  const auto r_s = icar_structure(oracles::path_graph(3));
  const auto r_t = rw2_structure(4);
  const auto s = interaction_structure(InteractionKind::I, r_s, r_t);
  const auto id = iid_structure(12);
  CHECK(MatrixXd(s.entries) == MatrixXd(id.entries));
  CHECK(s.rank_deficiency == 0);
}

TEST_CASE("interaction kind IV: rank is the product of factor ranks") {
  const auto r_s = icar_structure(oracles::path_graph(3));  // rank 2
  const auto r_t = rw2_structure(4);                        // rank 2
  const auto s = interaction_structure(InteractionKind::IV, r_s, r_t);
  CHECK(s.dim == 12);
  CHECK(s.rank_deficiency == 8);
  CHECK(oracles::numerical_rank(MatrixXd(s.entries)) == 4);
  verify_structure(s, "kron-iv");
}

TEST_CASE("interaction kind III: constant-in-space null modes per time unit") {
  const auto r_s = icar_structure(oracles::path_graph(3));
  const auto r_t = rw2_structure(4);
  const auto s = interaction_structure(InteractionKind::III, r_s, r_t);
  CHECK(s.rank_deficiency == 4);
  // explicit construction: 1_3 (x) e_t, time-fastest layout
  for (int t = 0; t < 4; ++t) {
    VectorXd v = VectorXd::Zero(12);
    for (int i = 0; i < 3; ++i) v[i * 4 + t] = 1.0 / std::sqrt(3.0);
    CHECK((s.entries * v).cwiseAbs().maxCoeff() <= 1e-10);
  }
  verify_structure(s, "kron-iii");
}

TEST_CASE("all four kinds match the dense Kronecker brute force") {
  for (const int n : {3, 4, 5}) {
    for (const int T : {3, 4, 5}) {
      const auto r_s = icar_structure(oracles::path_graph(n));
      const auto r_t = rw2_structure(T);
      const MatrixXd ds = MatrixXd(r_s.entries);
      const MatrixXd dt = MatrixXd(r_t.entries);
      const MatrixXd eye_n = MatrixXd::Identity(n, n);
      const MatrixXd eye_t = MatrixXd::Identity(T, T);
      const std::pair<InteractionKind, MatrixXd> cases[] = {
          {InteractionKind::I, oracles::dense_kron(eye_n, eye_t)},
          {InteractionKind::II, oracles::dense_kron(eye_n, dt)},
          {InteractionKind::III, oracles::dense_kron(ds, eye_t)},
          {InteractionKind::IV, oracles::dense_kron(ds, dt)},
      };
      for (const auto& [kind, dense] : cases) {
        const auto s = interaction_structure(kind, r_s, r_t);
        CHECK((MatrixXd(s.entries) - dense).cwiseAbs().maxCoeff() <= 1e-12);
        const int expected_nullity = n * T - oracles::numerical_rank(dense);
        CHECK(s.rank_deficiency == expected_nullity);
        verify_structure(s, "kron-" + to_string(kind));
      }
    }
  }
}

TEST_CASE("kronecker identity (A x B) vec(X) = vec(B X A')") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 5; ++rep) {
    const int n = 3 + static_cast<int>(rng() % 3);
    const int T = 3 + static_cast<int>(rng() % 3);
    const auto r_s = icar_structure(oracles::path_graph(n));
    const auto r_t = rw2_structure(T);
    const auto s = interaction_structure(InteractionKind::IV, r_s, r_t);
    MatrixXd x(T, n);
    for (int i = 0; i < T; ++i)
      for (int j = 0; j < n; ++j) x(i, j) = normal(rng);
    // layout is time-fastest: position (i, t) = i*T + t, i.e. vec by columns of X
    VectorXd vec_x(n * T);
    for (int j = 0; j < n; ++j) vec_x.segment(j * T, T) = x.col(j);
    const MatrixXd rhs_mat = MatrixXd(r_t.entries) * x * MatrixXd(r_s.entries).transpose();
    VectorXd rhs(n * T);
    for (int j = 0; j < n; ++j) rhs.segment(j * T, T) = rhs_mat.col(j);
    CHECK(((s.entries * vec_x) - rhs).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("constraint sets mirror the null spaces") {
  const auto icar = icar_structure(oracles::path_graph(5));
  const auto c1 = constraint_set(icar);
  CHECK(c1.count() == 1);
  // sum-to-zero: projecting any vector makes its mean 0
  VectorXd x(5);
  x << 1, 2, 3, 4, 5;
  c1.project(x);
  CHECK(std::abs(x.sum()) <= 1e-12);

  const auto rw2 = rw2_structure(4);
  const auto c2 = constraint_set(rw2);
  CHECK(c2.count() == 2);
  VectorXd y(4);
  y << 4, -1, 7, 2;
  c2.project(y);
  CHECK(std::abs(y.sum()) <= 1e-12);
  double tsum = 0.0;
  for (int t = 0; t < 4; ++t) tsum += (t + 1) * y[t];
  CHECK(std::abs(tsum) <= 1e-11);
  CHECK(c2.max_violation(y) <= 1e-12);

  const auto kron4 = interaction_structure(InteractionKind::IV,
                                           icar_structure(oracles::path_graph(3)),
                                           rw2_structure(4));
  CHECK(constraint_set(kron4).count() == 8);
}

TEST_CASE("rank mismatch is a hard error") {
  auto s = rw2_structure(5);
  s.rank_deficiency = 3;  // lie about the nullity
  s.null_basis = Eigen::MatrixXd::Zero(5, 3);
  CHECK_THROWS_AS(verify_structure(s, "bad"), Error);
}

TEST_CASE("matrix market export round-trips through a text parse") {
  const auto s = icar_structure(oracles::path_graph(3));
  const std::string path = "/tmp/riskmap_test_icar.mtx";
  write_matrix_market(path, s.entries);
  std::FILE* f = std::fopen(path.c_str(), "r");
  REQUIRE(f != nullptr);
  char header[128];
  REQUIRE(std::fgets(header, sizeof header, f) != nullptr);
  CHECK(std::string(header).find("MatrixMarket") != std::string::npos);
  int rows = 0, cols = 0, nnz = 0;
  REQUIRE(std::fscanf(f, "%d %d %d", &rows, &cols, &nnz) == 3);
  CHECK(rows == 3);
  CHECK(cols == 3);
  CHECK(nnz == 5);  // lower triangle of the path Laplacian
  std::fclose(f);
}
