// riskmap command line: krige -> prepare -> fit -> compare -> report.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "riskmap/geostat.hpp"
#include "riskmap/mcmc.hpp"
#include "riskmap/model.hpp"
#include "riskmap/panel.hpp"
#include "riskmap/report.hpp"
#include "riskmap/spatial_graph.hpp"
#include "riskmap/structures.hpp"
#include "riskmap/version.hpp"

namespace {

using namespace riskmap;

void print_warnings(const Warnings& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

RegionSet regions_from_panel(const Panel& panel) {
  RegionSet rs;
  for (std::size_t i = 0; i < panel.region_ids.size(); ++i) {
    Region r;
    r.id = panel.region_ids[i];
    r.name = panel.region_ids[i];
    r.population = i < panel.populations.size() ? panel.populations[i] : 1.0;
    rs.regions.push_back(std::move(r));
  }
  return rs;
}

std::vector<int> parse_days(const std::string& arg, int n_days) {
  std::vector<int> days;
  if (arg == "all") {
    for (int d = 1; d <= n_days; ++d) days.push_back(d);
  } else if (arg.empty() || arg == "every14") {
    for (int d = 1; d <= n_days; d += 14) days.push_back(d);
  } else {
    for (const auto& tok : split(arg, ','))
      days.push_back(static_cast<int>(parse_long(tok, "--days")));
  }
  return days;
}

int run_krige(const std::string& stations_file, const std::string& regions_file,
              double spacing, double buffer, int bins, int min_stations,
              const std::string& out) {
  const auto stations = read_stations_csv(stations_file);
  const auto shapes = read_region_shapes(regions_file);
  KrigeOptions opt;
  opt.spacing_km = spacing;
  opt.buffer_km = buffer;
  opt.n_bins = bins;
  opt.min_stations = min_stations;
  const auto result = krige_covariates(stations, shapes, opt);
  print_warnings(result.warnings);
  write_covariates_csv(out, result.rows);
  std::cerr << result.rows.size() << " region-day covariate values -> " << out << "\n";
  return 0;
}

int run_prepare(const std::string& cases_file, const std::string& regions_file,
                const std::string& covariates_file, int lag, int degree,
                const std::string& weeks, const std::string& out) {
  const auto regions = read_regions_csv(regions_file);
  const auto covariates = read_covariates_csv(covariates_file);
  Panel panel = build_panel(cases_file, regions, covariates, weeks_mode_from_string(weeks));
  lag_covariates(panel, lag);
  if (degree > 1) {  // powers are taken of standardized covariates
    standardize(panel);
    polynomial_expand(panel, degree);
  }
  print_warnings(panel.warnings);
  write_panel_csv(out, panel);
  std::cerr << "panel " << panel.n_regions << " regions x " << panel.n_days
            << " days -> " << out << "\n";
  return 0;
}

// Declarative model options, keyed by model id:
//   { "5": {"lag": 7, "degree": 1, "weeks": "ceil7"}, ... }
// Explicit command-line flags win over config entries.
void apply_model_config(const std::string& path, int model_id, bool lag_set,
                        bool degree_set, bool& weeks_set, int& lag, int& degree,
                        std::string& weeks) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model config " + path);
  nlohmann::json doc;
  in >> doc;
  const std::string key = std::to_string(model_id);
  if (!doc.contains(key)) return;
  const auto& entry = doc.at(key);
  if (!lag_set) lag = entry.value("lag", lag);
  if (!degree_set) degree = entry.value("degree", degree);
  if (!weeks_set && entry.contains("weeks")) {
    weeks = entry.at("weeks").get<std::string>();
    weeks_set = true;
  }
}

int run_fit(int model_id, const std::string& panel_file, const std::string& graph_file,
            int lag, int degree, const std::string& weeks, bool weeks_given,
            bool proper_prior, const SamplerConfig& config, const std::string& out_dir) {
  Panel panel = read_panel_csv(panel_file);
  const RegionSet regions = regions_from_panel(panel);
  const AdjacencyGraph graph = build_adjacency(regions, graph_file);
  print_warnings(graph.warnings);

  ModelOptions options;
  options.lag_days = lag;
  options.poly_degree = degree;
  options.weeks_mode = weeks_given ? weeks_mode_from_string(weeks) : panel.weeks_mode;
  options.proper_fixed_prior = proper_prior;
  // a prepared panel's recorded lag/degree win over default flag values
  if (panel.lag_applied > 0 && lag == 0) options.lag_days = panel.lag_applied;
  if (panel.degree_applied > 1 && degree == 1) options.poly_degree = panel.degree_applied;

  Panel prepared;
  const ModelSpec spec = build_model(model_id, panel, graph, options, &prepared);
  print_warnings(prepared.warnings);
  std::cerr << spec.describe() << "\n";

  const PosteriorSamples samples = fit_mcmc(spec, prepared, config);
  const FitSummary summary = summarize_fit(samples, spec, prepared);
  save_fit(out_dir, spec, prepared, samples, summary);
  std::cout << "model " << summary.model_id << " lag " << summary.lag
            << ": DIC " << summary.dic << ", pD " << summary.p_d
            << ", max rhat " << summary.max_rhat;
  if (!summary.flags.empty()) std::cout << " [" << join(summary.flags, ";") << "]";
  std::cout << "\n";
  return 0;
}

int run_compare(const std::vector<std::string>& fit_dirs, const std::string& out) {
  std::vector<FitSummary> summaries;
  for (const auto& dir : fit_dirs) summaries.push_back(load_fit_summary(dir));
  const auto ranked = compare_models(std::move(summaries));
  write_comparison_csv(out, ranked);
  for (const auto& s : ranked)
    std::cout << "model " << s.model_id << " lag " << s.lag << ": DIC " << s.dic
              << (s.flags.empty() ? "" : "  [" + join(s.flags, ";") + "]") << "\n";
  return 0;
}

int run_report(const std::string& fit_dir, const std::string& what,
               const std::string& days_arg, const std::string& component,
               double loess_span, int loess_degree, const std::string& format,
               const std::string& stat_arg, const std::string& shapes_file,
               const std::string& out) {
  const LoadedFit fit = load_fit(fit_dir);
  const PointStat stat = stat_arg == "median" ? PointStat::Median : PointStat::Mean;

  RelativeRiskSurface surface;
  if (what == "temporal") {
    const auto both = temporal_rr(fit, stat);
    surface = component == "unstructured" ? both[1] : both[0];
  } else if (what == "spatial") {
    surface = spatial_rr(fit, stat);
  } else if (what == "st") {
    surface = spatiotemporal_rr(fit, parse_days(days_arg, fit.n_days), stat);
  } else {
    throw Error("--what must be temporal, spatial or st");
  }

  // LOESS over the point estimates, per region series for st
  std::vector<double> smoothed;
  bool have_smooth = false;
  if (loess_span > 0.0 && what != "spatial") {
    if (what == "temporal") {
      std::vector<double> xs, ys;
      for (const auto& c : surface.cells) {
        xs.push_back(double(c.day >= 0 ? c.day : c.week));
        ys.push_back(c.rr);
      }
      if (static_cast<int>(xs.size()) >= std::max(5, loess_degree + 2)) {
        smoothed = loess_smooth(xs, ys, loess_span, loess_degree).values;
        have_smooth = true;
      } else {
        std::cerr << "warning: series too short for loess, smoothing skipped\n";
      }
    } else {
      smoothed.assign(surface.cells.size(), 0.0);
      have_smooth = true;
      for (int i = 0; i < fit.n_regions && have_smooth; ++i) {
        std::vector<double> xs, ys;
        std::vector<std::size_t> pos;
        for (std::size_t k = 0; k < surface.cells.size(); ++k)
          if (surface.cells[k].region == i) {
            xs.push_back(double(surface.cells[k].day));
            ys.push_back(surface.cells[k].rr);
            pos.push_back(k);
          }
        if (static_cast<int>(xs.size()) < std::max(5, loess_degree + 2)) {
          std::cerr << "warning: per-region series too short for loess, smoothing skipped\n";
          have_smooth = false;
          break;
        }
        const auto sm = loess_smooth(xs, ys, loess_span, loess_degree);
        for (std::size_t k = 0; k < pos.size(); ++k) smoothed[pos[k]] = sm.values[k];
      }
    }
  }

  if (format == "geojson") {
    if (shapes_file.empty())
      throw Error("geojson export needs --shapes with the region polygons");
    const auto shapes = read_region_shapes(shapes_file);
    export_surface_geojson(out, surface, fit.region_ids, shapes);
  } else {
    export_surface_csv(out, surface, fit.region_ids,
                       have_smooth ? &smoothed : nullptr);
  }
  std::cerr << surface.cells.size() << " cells -> " << out << "\n";
  return 0;
}

int run_structure(const std::string& kind, const std::string& regions_file,
                  const std::string& graph_file, int t_units, const std::string& out) {
  StructureMatrix s;
  if (kind == "iid") {
    s = iid_structure(t_units);
  } else if (kind == "rw2") {
    s = rw2_structure(t_units);
  } else if (kind == "icar") {
    const auto regions = read_regions_csv(regions_file);
    s = icar_structure(build_adjacency(regions, graph_file));
  } else {
    const auto regions = read_regions_csv(regions_file);
    const auto r_s = icar_structure(build_adjacency(regions, graph_file));
    s = interaction_structure(interaction_from_string(kind), r_s, rw2_structure(t_units));
  }
  verify_structure(s, kind);
  write_matrix_market(out, s.entries);
  std::cerr << kind << " structure " << s.dim << "x" << s.dim << " (nullity "
            << s.rank_deficiency << ") -> " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal disease mapping: kriged covariates, hierarchical "
               "Poisson models, MCMC inference, relative-risk surfaces"};
  app.set_version_flag("--version", std::string(riskmap::kCodeVersion));
  app.require_subcommand(1);

  // krige
  std::string stations_file, regions_geojson, out_file;
  double spacing = 5.0, buffer = 100.0;
  int bins = 15, min_stations = 5;
  auto* krige = app.add_subcommand("krige", "Interpolate station observations onto "
                                            "regions (variogram fit + ordinary kriging)");
  krige->add_option("--stations", stations_file)->required();
  krige->add_option("--regions", regions_geojson, "GeoJSON polygons (planar km)")->required();
  krige->add_option("--spacing", spacing, "grid spacing in km");
  krige->add_option("--buffer", buffer, "station inclusion buffer in km");
  krige->add_option("--bins", bins, "variogram bins");
  krige->add_option("--min-stations", min_stations, "flag days with fewer stations");
  krige->add_option("--out", out_file)->required();

  // prepare
  std::string cases_file, regions_csv, covariates_file, weeks = "ceil7";
  int lag = 0, degree = 1;
  auto* prepare = app.add_subcommand("prepare", "Assemble the region x day panel "
                                                "(offsets, lags, powers, week index)");
  prepare->add_option("--cases", cases_file)->required();
  prepare->add_option("--regions", regions_csv)->required();
  prepare->add_option("--covariates", covariates_file)->required();
  prepare->add_option("--lag", lag)->check(CLI::IsMember({0, 7, 14}));
  prepare->add_option("--degree", degree)->check(CLI::Range(1, 3));
  prepare->add_option("--weeks", weeks)->check(CLI::IsMember({"ceil7", "calendar"}));
  prepare->add_option("--out", out_file)->required();

  // fit
  std::string panel_file, graph_file, out_dir, fit_weeks = "ceil7", model_config;
  int model_id = 1, fit_lag = 0, fit_degree = 1;
  bool proper_prior = false;
  SamplerConfig config;
  auto* fitcmd = app.add_subcommand("fit", "Fit one of Models 1..12 by MCMC");
  fitcmd->add_option("--model", model_id)->required()->check(CLI::Range(1, 12));
  fitcmd->add_option("--panel", panel_file)->required();
  fitcmd->add_option("--graph", graph_file, "neighbor pair csv")->required();
  fitcmd->add_option("--config", model_config, "json model-options file");
  fitcmd->add_option("--lag", fit_lag)->check(CLI::IsMember({0, 7, 14}));
  fitcmd->add_option("--degree", fit_degree)->check(CLI::Range(1, 3));
  fitcmd->add_option("--weeks", fit_weeks)->check(CLI::IsMember({"ceil7", "calendar"}));
  fitcmd->add_flag("--proper-fixed-prior", proper_prior,
                   "Normal(0, 1e6) instead of flat fixed-effect priors");
  fitcmd->add_option("--chains", config.n_chains)->check(CLI::Range(2, 64));
  fitcmd->add_option("--iterations", config.n_iterations);
  fitcmd->add_option("--burnin", config.burn_in);
  fitcmd->add_option("--thin", config.thinning);
  fitcmd->add_option("--seed", config.seed);
  fitcmd->add_option("--out", out_dir)->required();

  // compare
  std::vector<std::string> fit_dirs;
  auto* compare = app.add_subcommand("compare", "Rank fits by DIC");
  compare->add_option("--fits", fit_dirs)->required()->expected(-1);
  compare->add_option("--out", out_file)->required();

  // report
  std::string fit_dir, what = "temporal", days_arg = "every14", component = "structured";
  std::string format = "csv", stat_arg = "mean", shapes_file;
  double loess_span = 0.75;
  int loess_degree = 2;
  auto* report = app.add_subcommand("report", "Relative-risk surfaces from a fit");
  report->add_option("--fit", fit_dir)->required();
  report->add_option("--what", what)->check(CLI::IsMember({"temporal", "spatial", "st"}));
  report->add_option("--days", days_arg, "day list, 'all' or 'every14'");
  report->add_option("--component", component)
      ->check(CLI::IsMember({"structured", "unstructured"}));
  report->add_option("--loess-span", loess_span, "0 disables smoothing");
  report->add_option("--loess-degree", loess_degree)->check(CLI::Range(1, 2));
  report->add_option("--format", format)->check(CLI::IsMember({"csv", "geojson"}));
  report->add_option("--stat", stat_arg)->check(CLI::IsMember({"mean", "median"}));
  report->add_option("--shapes", shapes_file, "region polygons for geojson");
  report->add_option("--out", out_file)->required();

  // structure (debug export)
  std::string kind = "icar";
  int t_units = 0;
  auto* structure = app.add_subcommand("structure", "Export a structure matrix "
                                                    "(Matrix Market)");
  structure->add_option("--kind", kind)
      ->check(CLI::IsMember({"icar", "rw2", "iid", "I", "II", "III", "IV"}));
  structure->add_option("--regions", regions_csv);
  structure->add_option("--graph", graph_file);
  structure->add_option("--T", t_units);
  structure->add_option("--out", out_file)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (krige->parsed())
      return run_krige(stations_file, regions_geojson, spacing, buffer, bins,
                       min_stations, out_file);
    if (prepare->parsed())
      return run_prepare(cases_file, regions_csv, covariates_file, lag, degree, weeks,
                         out_file);
    if (fitcmd->parsed()) {
      bool weeks_given = fitcmd->count("--weeks") > 0;
      if (!model_config.empty())
        apply_model_config(model_config, model_id, fitcmd->count("--lag") > 0,
                           fitcmd->count("--degree") > 0, weeks_given, fit_lag,
                           fit_degree, fit_weeks);
      return run_fit(model_id, panel_file, graph_file, fit_lag, fit_degree, fit_weeks,
                     weeks_given, proper_prior, config, out_dir);
    }
    if (compare->parsed()) return run_compare(fit_dirs, out_file);
    if (report->parsed())
      return run_report(fit_dir, what, days_arg, component, loess_span, loess_degree,
                        format, stat_arg, shapes_file, out_file);
    if (structure->parsed())
      return run_structure(kind, regions_csv, graph_file, t_units, out_file);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
