#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "riskmap/model.hpp"
#include "support/oracles.hpp"

using namespace riskmap;

namespace {

const std::string kFixtureDir = RISKMAP_FIXTURE_DIR;

// 4 regions x 21 days with BYM-free truth; enough for every model id.
Panel test_panel(riskmap::RngStream& rng) {
  oracles::SyntheticTruth truth;
  truth.mu = 0.1;
  truth.beta = {0.3, -0.2, 0.1, 0.05};
  return oracles::synthetic_panel(4, 21, truth, true, rng);
}

Eigen::VectorXd zero_theta(const ModelSpec& spec) {
  return Eigen::VectorXd::Zero(spec.registry.dim);
}

}  // namespace

TEST_CASE("model compositions match the checked-in audit fixture") {
  RngStream rng(5, 0);
  const Panel panel = test_panel(rng);
  const auto graph = oracles::grid_graph(2, 2);

  std::ifstream fixture(kFixtureDir + "/model_compositions.txt");
  REQUIRE(fixture.good());
  for (int id = 1; id <= 12; ++id) {
    const ModelSpec spec = build_model(id, panel, graph, {});
    std::string expected;
    REQUIRE(std::getline(fixture, expected));
    CHECK(spec.describe() == expected);
  }
}

TEST_CASE("model 1: three covariates plus intercept, no random blocks") {
  RngStream rng(6, 0);
  const Panel panel = test_panel(rng);
  const auto graph = oracles::grid_graph(2, 2);
  const ModelSpec spec = build_model(1, panel, graph, {});
  CHECK(spec.fixed_columns.size() == 3);
  CHECK(spec.n_fixed() == 4);
  CHECK(spec.blocks.empty());
  CHECK(spec.registry.dim == 4);
}

TEST_CASE("model 9: daily effects with a type I interaction of full dimension") {
  RngStream rng(7, 0);
  const Panel panel = test_panel(rng);
  const auto graph = oracles::grid_graph(2, 2);
  const ModelSpec spec = build_model(9, panel, graph, {});
  CHECK(spec.resolution == TemporalResolution::Daily);
  CHECK(spec.interaction == InteractionKind::I);
  CHECK(spec.block("delta").dim() == 4 * 21);
  CHECK(spec.block("gamma").dim() == 21);
  CHECK(spec.registry.find("tau_delta").size == 1);
}

TEST_CASE("model 5: weekly delta dimension is regions x weeks") {
  RngStream rng(8, 0);
  const Panel panel = test_panel(rng);
  const auto graph = oracles::grid_graph(2, 2);
  const ModelSpec spec = build_model(5, panel, graph, {});
  CHECK(spec.resolution == TemporalResolution::Weekly);
  CHECK(spec.n_units == 3);  // 21 days -> 3 weeks
  CHECK(spec.block("delta").dim() == 4 * 3);
  // time-fastest layout
  CHECK(spec.block("delta").position(1, 2) == 1 * 3 + 2);
}

TEST_CASE("build_model validates its inputs") {
  RngStream rng(9, 0);
  const Panel panel = test_panel(rng);
  CHECK_THROWS_AS(build_model(0, panel, oracles::grid_graph(2, 2), {}), Error);
  CHECK_THROWS_AS(build_model(13, panel, oracles::grid_graph(2, 2), {}), Error);
  CHECK_THROWS_WITH_AS(build_model(3, panel, oracles::path_graph(5), {}),
                       doctest::Contains("regions"), Error);
}

TEST_CASE("null model: eta equals the offset") {
  RngStream rng(10, 0);
  const Panel panel = test_panel(rng);
  const ModelSpec spec = build_model(1, panel, oracles::grid_graph(2, 2), {});
  const auto eta = linear_predictor(spec, zero_theta(spec), panel);
  CHECK((eta - panel.expected).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("linear predictor composes offset, fixed and random terms") {
  RngStream rng(11, 0);
  Panel panel = test_panel(rng);
  const auto graph = oracles::grid_graph(2, 2);
  Panel prepared;
  const ModelSpec spec = build_model(5, panel, graph, {}, &prepared);
  Eigen::VectorXd theta(spec.registry.dim);
  for (int j = 0; j < spec.registry.dim; ++j) theta[j] = 0.05 * (j % 7) - 0.1;

  const auto eta = linear_predictor(spec, theta, prepared);
  for (const auto [i, t] : {std::pair{0, 0}, {1, 5}, {3, 20}}) {
    double lp = std::log(prepared.expected(i, t)) + theta[0];
    for (std::size_t j = 0; j < spec.fixed_columns.size(); ++j)
      lp += theta[1 + static_cast<long>(j)] *
            prepared.covariate(spec.fixed_columns[j]).values(i, t);
    const int w = spec.unit_of_day[static_cast<std::size_t>(t)];
    lp += theta[spec.registry.find("u").offset + i];
    lp += theta[spec.registry.find("v").offset + i];
    lp += theta[spec.registry.find("gamma").offset + w];
    lp += theta[spec.registry.find("phi").offset + w];
    lp += theta[spec.registry.find("delta").offset + i * spec.n_units + w];
    CHECK(eta(i, t) == doctest::Approx(std::exp(lp)).epsilon(1e-12));
  }

  // single-cell arithmetic: mu 0.1, sum beta x = -0.3, u+v = 0.2, rest 0
  // gives eta = E * exp(0)
  CHECK(2.0 * std::exp(0.1 - 0.3 + 0.2) == doctest::Approx(2.0));
}

TEST_CASE("structural zeros are excluded and doubling E doubles eta") {
  RngStream rng(12, 0);
  Panel panel = test_panel(rng);
  panel.expected.col(3).setZero();  // a zero-case day
  const ModelSpec spec = build_model(2, panel, oracles::grid_graph(2, 2), {});
  Eigen::VectorXd theta = zero_theta(spec);
  theta[0] = 0.4;
  const auto eta = linear_predictor(spec, theta, panel);
  for (int i = 0; i < 4; ++i) CHECK(eta(i, 3) == 0.0);

  Panel doubled = panel;
  doubled.expected *= 2.0;
  const auto eta2 = linear_predictor(spec, theta, doubled);
  CHECK((eta2 - 2.0 * eta).abs().maxCoeff() <= 1e-12);

  // excluded cells do not contribute to the likelihood
  const double with_zero_day = log_likelihood(spec, theta, panel);
  Panel only_zero_col = panel;
  only_zero_col.observed.col(3).setZero();
  CHECK(log_likelihood(spec, theta, only_zero_col) == doctest::Approx(with_zero_day));
}

TEST_CASE("single-cell log likelihood values") {
  // 1 region, 1 day, E = 1 so that zero parameters give eta = 1
  Panel panel;
  panel.n_regions = 1;
  panel.n_days = 1;
  panel.region_ids = {"r00"};
  panel.populations = {1000.0};
  panel.dates = {parse_date("2020-02-25", "test")};
  panel.week_of_day = {1};
  panel.n_weeks = 1;
  panel.in_window = {1};
  panel.observed = Eigen::ArrayXXd::Zero(1, 1);
  panel.expected = Eigen::ArrayXXd::Ones(1, 1);
  panel.standardized = true;
  for (const char* base : {"solar_exposure", "mean_temperature", "wind_speed"}) {
    CovariateColumn col;
    col.label = base;
    col.base = base;
    col.values = Eigen::ArrayXXd::Zero(1, 1);
    col.imputed = {0};
    panel.covariates.push_back(std::move(col));
  }
  const auto lone = build_adjacency_from_pairs(oracles::make_regions(1), {});
  const ModelSpec spec = build_model(1, panel, lone, {});

  SUBCASE("O = 0, eta = 1 contributes -1") {
    CHECK(log_likelihood(spec, zero_theta(spec), panel) == doctest::Approx(-1.0));
  }
  SUBCASE("O = 3, eta = 3") {
    panel.observed(0, 0) = 3.0;
    panel.expected(0, 0) = 3.0;
    const double expected = -3.0 + 3.0 * std::log(3.0) - std::log(6.0);
    CHECK(log_likelihood(spec, zero_theta(spec), panel) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("fast likelihood equals the reference summation") {
  RngStream rng(13, 0);
  Panel panel = test_panel(rng);
  const auto graph = oracles::grid_graph(2, 2);
  for (const int id : {1, 3, 5, 9}) {
    Panel prepared;
    const ModelSpec spec = build_model(id, panel, graph, {}, &prepared);
    Eigen::VectorXd theta(spec.registry.dim);
    for (int j = 0; j < spec.registry.dim; ++j) theta[j] = 0.1 * rng.normal();
    const double fast = log_likelihood(spec, theta, prepared);
    const double ref = log_likelihood_reference(spec, theta, prepared);
    CHECK(std::abs(fast - ref) <= 1e-10 * std::abs(ref));
  }
}

TEST_CASE("nesting: zeroing the extra parameters reproduces the smaller model") {
  RngStream rng(14, 0);
  Panel panel = test_panel(rng);
  const auto graph = oracles::grid_graph(2, 2);
  Panel p1, p2, p3, p5;
  const ModelSpec m1 = build_model(1, panel, graph, {}, &p1);
  const ModelSpec m2 = build_model(2, panel, graph, {}, &p2);
  const ModelSpec m3 = build_model(3, panel, graph, {}, &p3);
  const ModelSpec m5 = build_model(5, panel, graph, {}, &p5);

  Eigen::VectorXd theta1(m1.registry.dim);
  theta1 << 0.2, 0.3, -0.2, 0.1;

  Eigen::VectorXd theta2 = Eigen::VectorXd::Zero(m2.registry.dim);
  theta2.head(4) = theta1;
  const auto eta1 = linear_predictor(m1, theta1, p1);
  const auto eta2 = linear_predictor(m2, theta2, p2);
  CHECK((eta1 - eta2).abs().maxCoeff() <= 1e-12);

  Eigen::VectorXd theta3 = Eigen::VectorXd::Zero(m3.registry.dim);
  theta3.head(5) = theta2.head(5);
  const auto eta3 = linear_predictor(m3, theta3, p3);
  CHECK((eta2 - eta3).abs().maxCoeff() <= 1e-12);

  Eigen::VectorXd theta5 = Eigen::VectorXd::Zero(m5.registry.dim);
  theta5.head(5) = theta2.head(5);
  const auto eta5 = linear_predictor(m5, theta5, p5);
  CHECK((eta3 - eta5).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("non-finite predictors are reported with the offending cell") {
  RngStream rng(15, 0);
  Panel panel = test_panel(rng);
  const ModelSpec spec = build_model(1, panel, oracles::grid_graph(2, 2), {});
  Eigen::VectorXd theta = zero_theta(spec);
  theta[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(log_likelihood(spec, theta, panel),
                       doctest::Contains("non-finite"), Error);
}

TEST_CASE("registry covers the vector exactly and labels are unique") {
  RngStream rng(16, 0);
  const Panel panel = test_panel(rng);
  const ModelSpec spec = build_model(8, panel, oracles::grid_graph(2, 2), {});
  int total = 0;
  std::set<std::string> seen;
  for (const auto& e : spec.registry.entries) {
    CHECK(e.offset == total);
    total += e.size;
    CHECK(seen.insert(e.label).second);
  }
  CHECK(total == spec.registry.dim);
  CHECK(spec.registry.scalar_labels().size() == static_cast<std::size_t>(spec.registry.dim));
}
