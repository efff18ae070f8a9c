#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "riskmap/geometry.hpp"
#include "riskmap/spatial_graph.hpp"
#include "support/oracles.hpp"

using namespace riskmap;

namespace {
const std::string kDataDir = RISKMAP_DATA_DIR;
}

TEST_CASE("path graph degrees") {
  const auto g = oracles::path_graph(3);
  CHECK(g.neighbor_counts == std::vector<int>{1, 2, 1});
  CHECK(g.warnings.empty());
}

TEST_CASE("star graph degrees") {
  const auto rs = oracles::make_regions(4);
  const auto g = build_adjacency_from_pairs(
      rs, {{"r00", "r01"}, {"r00", "r02"}, {"r00", "r03"}});
  CHECK(g.neighbor_counts == std::vector<int>{3, 1, 1, 1});
}

TEST_CASE("duplicate edges are deduplicated, unknown ids and self-loops rejected") {
  const auto rs = oracles::make_regions(3);
  const auto g = build_adjacency_from_pairs(
      rs, {{"r00", "r01"}, {"r01", "r00"}, {"r00", "r01"}});
  CHECK(g.edges.size() == 1);
  CHECK_THROWS_WITH_AS(build_adjacency_from_pairs(rs, {{"r00", "zz"}}),
                       doctest::Contains("unknown region id"), Error);
  CHECK_THROWS_WITH_AS(build_adjacency_from_pairs(rs, {{"r00", "r00"}}),
                       doctest::Contains("self-loop"), Error);
}

TEST_CASE("isolated regions warn and produce zero weight rows") {
  const auto rs = oracles::make_regions(3);
  const auto g = build_adjacency_from_pairs(rs, {{"r00", "r01"}});
  REQUIRE(g.warnings.size() == 1);
  CHECK(g.warnings[0].find("r02") != std::string::npos);
  const auto w = row_standardize(g);
  CHECK(w.w.row(2).sum() == 0.0);
}

TEST_CASE("row standardization") {
  const auto path3 = oracles::path_graph(3);
  const auto w = row_standardize(path3);
  CHECK(w.w.coeff(1, 0) == doctest::Approx(0.5));
  CHECK(w.w.coeff(1, 2) == doctest::Approx(0.5));
  CHECK(w.w.coeff(1, 1) == 0.0);

  const auto rs = oracles::make_regions(4);
  const auto star = build_adjacency_from_pairs(
      rs, {{"r00", "r01"}, {"r00", "r02"}, {"r00", "r03"}});
  const auto ws = row_standardize(star);
  for (int j = 1; j < 4; ++j) CHECK(ws.w.coeff(0, j) == doctest::Approx(1.0 / 3.0));

  // single isolated region: 1x1 zero matrix
  const auto lone = build_adjacency_from_pairs(oracles::make_regions(1), {});
  CHECK(row_standardize(lone).w.nonZeros() == 0);
}

TEST_CASE("icar structure of the path graph") {
  const auto s = icar_structure(oracles::path_graph(3));
  Eigen::MatrixXd expected(3, 3);
  expected << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  CHECK(Eigen::MatrixXd(s.entries).isApprox(expected));
  CHECK(s.rank_deficiency == 1);
  CHECK(oracles::numerical_rank(Eigen::MatrixXd(s.entries)) == 2);
  verify_structure(s, "path3");
}

TEST_CASE("disconnected components give one null vector each") {
  const auto rs = oracles::make_regions(4);
  const auto g = build_adjacency_from_pairs(rs, {{"r00", "r01"}, {"r02", "r03"}});
  const auto s = icar_structure(g);
  CHECK(s.rank_deficiency == 2);
  CHECK(oracles::numerical_rank(Eigen::MatrixXd(s.entries)) == 2);
  // component indicators are annihilated
  Eigen::VectorXd v = Eigen::VectorXd::Zero(4);
  v[0] = v[1] = 3.7;
  CHECK((s.entries * v).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  verify_structure(s, "two-pairs");
}

TEST_CASE("icar invariants on random graphs") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 2 + static_cast<int>(rng() % 25);
    const auto rs = oracles::make_regions(n);
    std::vector<std::pair<std::string, std::string>> pairs;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng() % 4 == 0) pairs.emplace_back(rs.regions[i].id, rs.regions[j].id);
    const auto g = build_adjacency_from_pairs(rs, pairs);
    const auto s = icar_structure(g);
    verify_structure(s, "random");

    // row sums exactly zero
    const Eigen::VectorXd row_sums = s.entries * Eigen::VectorXd::Ones(n);
    CHECK(row_sums.cwiseAbs().maxCoeff() == 0.0);

    // R = diag(N)(I - W) on rows with neighbours
    const auto w = row_standardize(g);
    Eigen::MatrixXd lhs = Eigen::MatrixXd(s.entries);
    Eigen::MatrixXd rhs =
        Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      if (g.neighbor_counts[i] > 0)
        rhs.row(i) = g.neighbor_counts[i] *
                     (Eigen::MatrixXd::Identity(n, n).row(i) - Eigen::MatrixXd(w.w).row(i));
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("catalonia fixture: 42 connected regions, rank 41") {
  const auto regions = read_regions_csv(kDataDir + "/catalonia/regions.csv");
  CHECK(regions.size() == 42);
  CHECK(regions.total_population() == doctest::Approx(7619494.0));

  const auto g = build_adjacency(regions, kDataDir + "/catalonia/neighbors.csv");
  CHECK(g.n == 42);
  CHECK(g.n_components() == 1);
  CHECK(g.warnings.empty());

  const auto s = icar_structure(g);
  CHECK(s.rank_deficiency == 1);
  CHECK(oracles::numerical_rank(Eigen::MatrixXd(s.entries)) == 41);
}

TEST_CASE("contiguity from polygons matches the neighbor file (rook mode)") {
  const auto regions = read_regions_csv(kDataDir + "/catalonia/regions.csv");
  const auto shapes = read_region_shapes(kDataDir + "/catalonia/regions.geojson");
  const auto from_file = build_adjacency(regions, kDataDir + "/catalonia/neighbors.csv");
  const auto rook = adjacency_from_polygons(regions, shapes, ContiguityMode::Rook);
  CHECK(rook.edges == from_file.edges);
  // queen adds the diagonal contacts of the rectangular tiling
  const auto queen = adjacency_from_polygons(regions, shapes, ContiguityMode::Queen);
  CHECK(queen.edges.size() > rook.edges.size());
}
