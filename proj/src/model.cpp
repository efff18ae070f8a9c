#include "riskmap/model.hpp"

#include <algorithm>
#include <cmath>

#include "riskmap/kernels.hpp"

namespace riskmap {

std::string to_string(TemporalResolution r) {
  switch (r) {
    case TemporalResolution::None: return "none";
    case TemporalResolution::Weekly: return "weekly";
    case TemporalResolution::Daily: return "daily";
  }
  return "?";
}

int ParameterRegistry::add(const std::string& label, int size) {
  entries.push_back({label, dim, size});
  dim += size;
  return entries.back().offset;
}

const RegistryEntry& ParameterRegistry::find(const std::string& label) const {
  for (const auto& e : entries)
    if (e.label == label) return e;
  throw Error("registry has no entry '" + label + "'");
}

bool ParameterRegistry::has(const std::string& label) const {
  for (const auto& e : entries)
    if (e.label == label) return true;
  return false;
}

std::vector<std::string> ParameterRegistry::scalar_labels() const {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(dim));
  for (const auto& e : entries) {
    if (e.size == 1) {
      out.push_back(e.label);
    } else {
      for (int k = 0; k < e.size; ++k)
        out.push_back(e.label + "[" + std::to_string(k) + "]");
    }
  }
  return out;
}

bool ModelSpec::has_block(const std::string& label) const {
  for (const auto& b : blocks)
    if (b.label == label) return true;
  return false;
}

const RandomEffectBlock& ModelSpec::block(const std::string& label) const {
  for (const auto& b : blocks)
    if (b.label == label) return b;
  throw Error("model " + std::to_string(model_id) + " has no '" + label + "' block");
}

std::string ModelSpec::describe() const {
  std::string s = "model " + std::to_string(model_id) + ": intercept + env_covariates";
  if (model_id >= 2) s += " + density";
  if (model_id >= 3) {
    const std::string res = resolution == TemporalResolution::Weekly ? "weekly" : "daily";
    s += " + u + v + gamma[" + res + "] + phi[" + res + "]";
    if (interaction != InteractionKind::None)
      s += " + delta[" + res + ", type " + to_string(interaction) + "]";
  }
  return s;
}

ModelSpec build_model(int id, const Panel& panel_in, const AdjacencyGraph& graph,
                      const ModelOptions& options, Panel* prepared) {
  if (id < 1 || id > 12) throw Error("model id must be in 1..12");
  if (graph.n != panel_in.n_regions)
    throw Error("graph has " + std::to_string(graph.n) + " regions, panel has " +
                std::to_string(panel_in.n_regions));

  Panel panel = panel_in;
  if (panel.weeks_mode != options.weeks_mode) {
    if (panel.dates.empty())
      throw Error("cannot switch weeks mode without calendar dates");
    panel.weeks_mode = options.weeks_mode;
    for (int t = 1; t <= panel.n_days; ++t)
      panel.week_of_day[static_cast<std::size_t>(t - 1)] =
          week_index(t, panel.n_days, options.weeks_mode, panel.dates);
    panel.n_weeks = panel.week_of_day.back();
  }
  if (panel.lag_applied != options.lag_days) {
    if (panel.lag_applied != 0)
      throw Error("panel lag " + std::to_string(panel.lag_applied) +
                  " conflicts with requested lag " + std::to_string(options.lag_days));
    lag_covariates(panel, options.lag_days);
  }
  standardize(panel);
  polynomial_expand(panel, options.poly_degree);

  ModelSpec spec;
  spec.model_id = id;
  spec.options = options;
  spec.n_regions = panel.n_regions;
  spec.n_days = panel.n_days;

  // Table-1 composition
  const bool with_density = id >= 2;
  const bool with_st = id >= 3;
  spec.resolution = !with_st ? TemporalResolution::None
                    : (id == 3 || (id >= 5 && id <= 8)) ? TemporalResolution::Weekly
                                                        : TemporalResolution::Daily;
  spec.interaction = InteractionKind::None;
  if (id >= 5) {
    static const InteractionKind kinds[] = {InteractionKind::I, InteractionKind::II,
                                            InteractionKind::III, InteractionKind::IV};
    spec.interaction = kinds[(id - 5) % 4];
  }

  for (const auto& col : panel.covariates) {
    if (col.base == "density" && !with_density) continue;
    spec.fixed_columns.push_back(col.label);
  }
  if (with_density && !panel.has_density())
    throw Error("model " + std::to_string(id) + " needs the density covariate");

  spec.unit_of_day.resize(static_cast<std::size_t>(panel.n_days));
  if (spec.resolution == TemporalResolution::Weekly) {
    spec.n_units = panel.n_weeks;
    for (int t = 0; t < panel.n_days; ++t)
      spec.unit_of_day[static_cast<std::size_t>(t)] =
          panel.week_of_day[static_cast<std::size_t>(t)] - 1;
  } else {
    spec.n_units = panel.n_days;
    for (int t = 0; t < panel.n_days; ++t) spec.unit_of_day[static_cast<std::size_t>(t)] = t;
  }

  spec.registry.add("mu", 1);
  for (const auto& col : spec.fixed_columns) spec.registry.add("b_" + col, 1);

  if (with_st) {
    const StructureMatrix r_s = icar_structure(graph);
    verify_structure(r_s, "icar");
    const StructureMatrix r_t = rw2_structure(spec.n_units);
    verify_structure(r_t, "rw2");

    RandomEffectBlock u{"u", r_s, 1.0, 5e-5, constraint_set(r_s),
                        EffectLayout::PerRegion, spec.n_regions, 1};
    RandomEffectBlock v{"v", iid_structure(spec.n_regions), 1.0, 5e-5, ConstraintSet{},
                        EffectLayout::PerRegion, spec.n_regions, 1};
    RandomEffectBlock gamma{"gamma", r_t, 1.0, 5e-5, constraint_set(r_t),
                            EffectLayout::PerTimeUnit, 1, spec.n_units};
    RandomEffectBlock phi{"phi", iid_structure(spec.n_units), 1.0, 5e-5, ConstraintSet{},
                          EffectLayout::PerTimeUnit, 1, spec.n_units};
    spec.blocks = {u, v, gamma, phi};

    if (spec.interaction != InteractionKind::None) {
      StructureMatrix r_delta = interaction_structure(spec.interaction, r_s, r_t);
      verify_structure(r_delta, "delta type " + to_string(spec.interaction));
      RandomEffectBlock delta{"delta", std::move(r_delta), 1.0, 5e-5, ConstraintSet{},
                              EffectLayout::SpaceTime, spec.n_regions, spec.n_units};
      delta.constraints = constraint_set(delta.structure);
      spec.blocks.push_back(std::move(delta));
    }
    for (const auto& b : spec.blocks) spec.registry.add(b.label, b.dim());
    for (const auto& b : spec.blocks) spec.registry.add("tau_" + b.label, 1);
  }

  if (prepared) *prepared = std::move(panel);
  return spec;
}

LikelihoodData build_likelihood_data(const ModelSpec& spec, const Panel& panel) {
  if (panel.n_regions != spec.n_regions || panel.n_days != spec.n_days)
    throw Error("panel does not match the model dimensions");
  const int n_cells = spec.n_regions * spec.n_days;
  LikelihoodData data;
  data.log_expected = Eigen::VectorXd::Zero(n_cells);
  data.observed = Eigen::VectorXd::Zero(n_cells);
  data.included = Eigen::VectorXd::Zero(n_cells);
  data.design = Eigen::MatrixXd::Zero(n_cells, spec.n_fixed());
  data.region_of_cell.resize(static_cast<std::size_t>(n_cells));
  data.unit_of_cell.resize(static_cast<std::size_t>(n_cells));

  std::vector<const CovariateColumn*> cols;
  for (const auto& label : spec.fixed_columns) cols.push_back(&panel.covariate(label));

  for (int i = 0; i < spec.n_regions; ++i) {
    for (int t = 0; t < spec.n_days; ++t) {
      const int c = panel.cell(i, t);
      data.region_of_cell[static_cast<std::size_t>(c)] = i;
      data.unit_of_cell[static_cast<std::size_t>(c)] =
          spec.unit_of_day[static_cast<std::size_t>(t)];
      const double e = panel.expected(i, t);
      const bool inc = panel.in_window[static_cast<std::size_t>(t)] && e > 0.0;
      data.included[c] = inc ? 1.0 : 0.0;
      data.observed[c] = panel.observed(i, t);
      data.log_expected[c] = inc ? std::log(e) : 0.0;
      data.design(c, 0) = 1.0;
      for (std::size_t j = 0; j < cols.size(); ++j)
        data.design(c, static_cast<int>(j) + 1) = cols[j]->values(i, t);
      if (inc) {
        data.lgamma_const += std::lgamma(data.observed[c] + 1.0);
        ++data.n_included;
      }
    }
  }
  return data;
}

Eigen::VectorXd log_linear_predictor(const ModelSpec& spec, const LikelihoodData& data,
                                     const Eigen::VectorXd& theta) {
  if (theta.size() != spec.registry.dim)
    throw Error("parameter vector has dimension " + std::to_string(theta.size()) +
                ", registry expects " + std::to_string(spec.registry.dim));
  Eigen::VectorXd log_eta = data.log_expected;
  log_eta.noalias() += data.design * theta.head(spec.n_fixed());
  const long n_cells = data.log_expected.size();
  for (const auto& b : spec.blocks) {
    const auto seg = theta.segment(spec.registry.find(b.label).offset, b.dim());
    for (long c = 0; c < n_cells; ++c)
      log_eta[c] += seg[b.position(data.region_of_cell[static_cast<std::size_t>(c)],
                                   data.unit_of_cell[static_cast<std::size_t>(c)])];
  }
  return log_eta;
}

Eigen::ArrayXXd linear_predictor(const ModelSpec& spec, const Eigen::VectorXd& theta,
                                 const Panel& panel) {
  const LikelihoodData data = build_likelihood_data(spec, panel);
  const Eigen::VectorXd log_eta = log_linear_predictor(spec, data, theta);
  Eigen::ArrayXXd eta(spec.n_regions, spec.n_days);
  for (int i = 0; i < spec.n_regions; ++i)
    for (int t = 0; t < spec.n_days; ++t) {
      const int c = panel.cell(i, t);
      eta(i, t) = data.included[c] > 0.5 ? std::exp(log_eta[c]) : 0.0;
    }
  return eta;
}

double log_likelihood(const ModelSpec& spec, const Eigen::VectorXd& theta,
                      const Panel& panel) {
  const LikelihoodData data = build_likelihood_data(spec, panel);
  const Eigen::VectorXd log_eta = log_linear_predictor(spec, data, theta);
  for (long c = 0; c < log_eta.size(); ++c)
    if (data.included[c] > 0.5 && !std::isfinite(log_eta[c]))
      throw Error("non-finite linear predictor at region " +
                  std::to_string(data.region_of_cell[static_cast<std::size_t>(c)]) +
                  ", day " + std::to_string(c % spec.n_days + 1));
  return kernels::poisson_loglik_core(log_eta, data.observed, data.included) -
         data.lgamma_const;
}

double log_likelihood_reference(const ModelSpec& spec, const Eigen::VectorXd& theta,
                                const Panel& panel) {
  std::vector<const CovariateColumn*> cols;
  for (const auto& label : spec.fixed_columns) cols.push_back(&panel.covariate(label));
  double total = 0.0;
  for (int i = 0; i < spec.n_regions; ++i) {
    for (int t = 0; t < spec.n_days; ++t) {
      const double e = panel.expected(i, t);
      if (!panel.in_window[static_cast<std::size_t>(t)] || e <= 0.0) continue;
      double lp = std::log(e) + theta[0];
      for (std::size_t j = 0; j < cols.size(); ++j)
        lp += theta[static_cast<long>(j) + 1] * cols[j]->values(i, t);
      const int unit = spec.unit_of_day[static_cast<std::size_t>(t)];
      for (const auto& b : spec.blocks)
        lp += theta[spec.registry.find(b.label).offset + b.position(i, unit)];
      const double y = panel.observed(i, t);
      total += y * lp - std::exp(lp) - std::lgamma(y + 1.0);
    }
  }
  return total;
}

}  // namespace riskmap
