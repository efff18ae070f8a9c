#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <map>
#include <string>
#include <vector>

#include "riskmap/common.hpp"
#include "riskmap/geostat.hpp"
#include "riskmap/spatial_graph.hpp"

namespace riskmap {

enum class WeeksMode { Ceil7, Calendar };

std::string to_string(WeeksMode m);
WeeksMode weeks_mode_from_string(const std::string& s);

// w(t) for day t (1- based). Ceil7 is ceil(t/7); Calendar breaks weeks at
// Mondays so a partial leading week counts as week 1.
int week_index(int day, int n_days, WeeksMode mode,
               const std::vector<std::chrono::sys_days>& dates);

struct CovariateColumn {
  std::string label;  // provenance-encoding, e.g. mean_temperature_lag7_z_pow2
  std::string base;   // solar_exposure | mean_temperature | wind_speed | density
  int power = 1;
  Eigen::ArrayXXd values;            // n_regions x n_days
  std::vector<std::uint8_t> imputed; // per cell, i * n_days + t

  bool is_environmental() const { return base != "density"; }
};

struct StandardizeTransform {
  std::string label;
  double mean = 0.0;
  double sd = 1.0;
};

// Region x day modelling panel: observed and expected counts, covariates,
// calendar and week indices. The construction identity sum_i E_it = sum_i O_it
// holds exactly per day.
struct Panel {
  std::vector<std::string> region_ids;  // canonical order
  std::vector<double> populations;
  int n_regions = 0;
  int n_days = 0;
  std::vector<std::chrono::sys_days> dates;  // one per day
  Eigen::ArrayXXd observed;                  // n_regions x n_days
  Eigen::ArrayXXd expected;
  std::vector<CovariateColumn> covariates;
  std::vector<int> week_of_day;  // 1-based
  int n_weeks = 0;
  std::vector<std::uint8_t> in_window;  // day enters the likelihood
  WeeksMode weeks_mode = WeeksMode::Ceil7;

  // Pre-period covariate history per environmental variable, keyed by day
  // index (<= 0 allowed); drives lagging.
  std::map<std::string, std::map<int, Eigen::ArrayXd>> env_history;
  std::map<std::string, std::map<int, std::vector<std::uint8_t>>> env_history_imputed;

  int lag_applied = 0;
  bool standardized = false;
  int degree_applied = 1;
  std::vector<StandardizeTransform> transforms;
  Warnings warnings;

  int cell(int region, int day0) const { return region * n_days + day0; }
  int covariate_index(const std::string& label) const;  // -1 if absent
  const CovariateColumn& covariate(const std::string& label) const;
  bool has_density() const;
};

// E_it = (sum_k O_kt) * p_i / (sum_k p_k).
Eigen::ArrayXXd expected_cases(const Eigen::ArrayXXd& observed,
                               const std::vector<double>& populations);

// Assemble the raw panel from a daily cases file and kriged covariates.
// Missing case cells are zeros (logged); density comes from population/area
// when areas are available.
Panel build_panel(const std::string& cases_csv, const RegionSet& regions,
                  const std::vector<CovariateRow>& covariates,
                  WeeksMode weeks_mode = WeeksMode::Ceil7);

// Replace x_jit by x_ji(t-lag) for the environmental covariates. Days whose
// lagged covariate predates the history are dropped from the likelihood
// window when `allow_trim` is set, otherwise this is a coverage error.
void lag_covariates(Panel& panel, int lag_days, bool allow_trim = true);

// Centre/scale the base environmental covariates and density to mean 0,
// sd 1 (denominator n-1) over in-window cells; transforms are retained.
void standardize(Panel& panel);

// Append powers 2..degree of the standardized environmental covariates.
void polynomial_expand(Panel& panel, int degree);

void write_panel_csv(const std::string& path, const Panel& panel);
Panel read_panel_csv(const std::string& path);

}  // namespace riskmap
