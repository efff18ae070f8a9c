#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "riskmap/panel.hpp"
#include "riskmap/spatial_graph.hpp"
#include "riskmap/structures.hpp"

namespace riskmap {

enum class TemporalResolution { None, Weekly, Daily };

std::string to_string(TemporalResolution r);

struct ModelOptions {
  int lag_days = 0;
  int poly_degree = 1;
  WeeksMode weeks_mode = WeeksMode::Ceil7;
  // Optional proper surrogate for the flat fixed-effect priors.
  bool proper_fixed_prior = false;
  double fixed_prior_variance = 1e6;
};

struct RegistryEntry {
  std::string label;
  int offset = 0;
  int size = 0;
};

// Index registry over the concatenated parameter vector
// (mu, beta..., u, v, gamma, phi, delta, tau_u..tau_delta).
struct ParameterRegistry {
  std::vector<RegistryEntry> entries;
  int dim = 0;

  int add(const std::string& label, int size);
  const RegistryEntry& find(const std::string& label) const;
  bool has(const std::string& label) const;
  std::vector<std::string> scalar_labels() const;  // one per vector element
};

// One of Models 1..12, assembled against a concrete panel and graph:
// fixed-effect design, random-effect blocks with structures, priors and
// constraints, and the cell bookkeeping for the Poisson likelihood.
struct ModelSpec {
  int model_id = 0;
  TemporalResolution resolution = TemporalResolution::None;
  InteractionKind interaction = InteractionKind::None;
  ModelOptions options;

  std::vector<std::string> fixed_columns;  // panel covariate labels, no intercept
  std::vector<RandomEffectBlock> blocks;
  ParameterRegistry registry;

  int n_regions = 0;
  int n_days = 0;
  int n_units = 0;               // weekly: n_weeks, daily: n_days
  std::vector<int> unit_of_day;  // 0-based time unit per day

  int n_fixed() const { return 1 + static_cast<int>(fixed_columns.size()); }
  bool has_block(const std::string& label) const;
  const RandomEffectBlock& block(const std::string& label) const;
  std::string describe() const;  // one-line composition, audited against a fixture
};

// Cell-major arrays backing likelihood evaluation (cell = region * n_days + day).
struct LikelihoodData {
  Eigen::VectorXd log_expected;  // 0 stored where excluded
  Eigen::VectorXd observed;
  Eigen::VectorXd included;  // 1 when in-window and E > 0
  Eigen::MatrixXd design;    // n_cells x n_fixed, intercept first
  std::vector<int> region_of_cell;
  std::vector<int> unit_of_cell;
  double lgamma_const = 0.0;  // sum of lgamma(O+1) over included cells
  long n_included = 0;
};

// Exact Table-1 composition for `id`, with Gamma(1, 5e-5) precision priors
// and flat fixed-effect priors. Applies lag / standardization / expansion to
// a copy of the panel when not already applied (conflicts are errors) and
// returns the prepared panel through `prepared`.
ModelSpec build_model(int id, const Panel& panel, const AdjacencyGraph& graph,
                      const ModelOptions& options, Panel* prepared = nullptr);

LikelihoodData build_likelihood_data(const ModelSpec& spec, const Panel& panel);

// log eta over cells: log E + mu + X beta + [u+v] + [gamma+phi] + [delta].
Eigen::VectorXd log_linear_predictor(const ModelSpec& spec, const LikelihoodData& data,
                                     const Eigen::VectorXd& theta);

// eta_it matrix; structural zeros (excluded cells) carry eta = 0.
Eigen::ArrayXXd linear_predictor(const ModelSpec& spec, const Eigen::VectorXd& theta,
                                 const Panel& panel);

// sum over included cells of O log eta - eta - lgamma(O+1); throws on a
// non-finite predictor naming the offending cell.
double log_likelihood(const ModelSpec& spec, const Eigen::VectorXd& theta,
                      const Panel& panel);

// Straightforward per-cell reference with its own predictor assembly and a
// different summation order; kept for the tests and the benchmark.
double log_likelihood_reference(const ModelSpec& spec, const Eigen::VectorXd& theta,
                                const Panel& panel);

}  // namespace riskmap
