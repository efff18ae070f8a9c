#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "riskmap/model.hpp"

namespace riskmap {

// Per-chain deterministic random stream derived from (seed, stream index).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  double normal();
  double uniform();
  double gamma(double shape, double rate);
  long poisson(double mean);

 private:
  std::mt19937_64 engine_;
};

struct SamplerConfig {
  int n_chains = 4;
  int n_iterations = 20000;
  int burn_in = 10000;
  int thinning = 5;
  std::uint64_t seed = 1;
  double target_accept_block = 0.234;
  double target_accept_scalar = 0.44;
  int adapt_interval = 50;    // burn-in only
  int refresh_interval = 500; // recompute the predictor from scratch

  int kept_per_chain() const { return (n_iterations - burn_in) / thinning; }
  void validate() const;
};

struct ChainResult {
  Eigen::MatrixXd draws;  // kept x registry dim
  std::map<std::string, double> acceptance;
};

struct PosteriorSamples {
  ParameterRegistry registry;
  std::vector<std::string> scalar_labels;
  std::vector<ChainResult> chains;
  SamplerConfig config;

  int kept_per_chain() const { return static_cast<int>(chains.front().draws.rows()); }
  long total_draws() const { return static_cast<long>(chains.size()) * kept_per_chain(); }
  // All chains pooled, one column of the draw matrix.
  std::vector<double> pooled(int param) const;
};

// Conjugate precision step: Gamma(shape + rank/2, rate + x' R x / 2).
double gibbs_precision_draw(const RandomEffectBlock& block, const Eigen::VectorXd& x,
                            RngStream& rng);

// Metropolis-within-Gibbs: random-walk block updates for the fixed effects
// and each latent block (region-sliced for delta) with projected increments
// keeping the hard constraints exact, conjugate Gibbs steps for the
// precisions, and burn-in-only adaptive step scaling. Deterministic given
// the seed; chains run in parallel on independent streams.
PosteriorSamples fit_mcmc(const ModelSpec& spec, const Panel& panel,
                          const SamplerConfig& config);

double deviance(const ModelSpec& spec, const Eigen::VectorXd& theta, const Panel& panel);

struct DicResult {
  double dic = 0.0;
  double p_d = 0.0;
  double dbar = 0.0;
  double dhat = 0.0;
};

// Dbar = mean deviance over draws; theta_hat = componentwise posterior mean
// with precisions averaged on the log scale; p_D = Dbar - D(theta_hat).
DicResult dic(const PosteriorSamples& samples, const ModelSpec& spec, const Panel& panel);

struct SummaryRow {
  std::string label;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q500 = 0.0;
  double q975 = 0.0;
  double rhat = 1.0;
  bool sig95 = false;       // 95% interval excludes 0
  bool degenerate = false;  // constant draws
};

std::vector<SummaryRow> posterior_summary(const PosteriorSamples& samples);

struct FitSummary {
  int model_id = 0;
  int lag = 0;
  int degree = 1;
  double dic = 0.0;
  double p_d = 0.0;
  double dbar = 0.0;
  double dhat = 0.0;
  double max_rhat = 1.0;
  std::vector<std::string> flags;  // empty when clean
};

FitSummary summarize_fit(const PosteriorSamples& samples, const ModelSpec& spec,
                         const Panel& panel);

// Ascending DIC; rows with flags are listed after the clean ones, annotated
// rather than ranked.
std::vector<FitSummary> compare_models(std::vector<FitSummary> summaries);
void write_comparison_csv(const std::string& path, const std::vector<FitSummary>& ranked);

// Fit directory: manifest.json + one CSV draw matrix per chain + summary.csv
// + fit.json. Identical inputs and seed give bit-identical files.
void save_fit(const std::string& dir, const ModelSpec& spec, const Panel& panel,
              const PosteriorSamples& samples, const FitSummary& summary);

struct LoadedFit {
  PosteriorSamples samples;
  FitSummary summary;
  // enough of the spec to rebuild report indices
  int model_id = 0;
  TemporalResolution resolution = TemporalResolution::None;
  InteractionKind interaction = InteractionKind::None;
  int n_regions = 0;
  int n_days = 0;
  int n_units = 0;
  std::vector<int> unit_of_day;
  std::vector<std::string> region_ids;
  std::vector<int> week_of_day;
  std::vector<std::string> dates;
};

LoadedFit load_fit(const std::string& dir);
FitSummary load_fit_summary(const std::string& dir);

}  // namespace riskmap
