#include "riskmap/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

namespace riskmap {

namespace {

const std::vector<std::string> kEnvBases = {"solar_exposure", "mean_temperature",
                                            "wind_speed"};

std::string lag_suffix(int lag) { return lag > 0 ? "_lag" + std::to_string(lag) : ""; }

std::string column_label(const std::string& base, int lag, bool standardized, int power) {
  std::string label = base + lag_suffix(lag);
  if (standardized) label += "_z";
  if (power > 1) label += "_pow" + std::to_string(power);
  return label;
}

}  // namespace

std::string to_string(WeeksMode m) {
  return m == WeeksMode::Ceil7 ? "ceil7" : "calendar";
}

WeeksMode weeks_mode_from_string(const std::string& s) {
  if (s == "ceil7") return WeeksMode::Ceil7;
  if (s == "calendar") return WeeksMode::Calendar;
  throw Error("unknown weeks mode '" + s + "' (expected ceil7 or calendar)");
}

int week_index(int day, int n_days, WeeksMode mode,
               const std::vector<std::chrono::sys_days>& dates) {
  if (day < 1 || day > n_days)
    throw Error("week_index: day " + std::to_string(day) + " outside 1.." +
                std::to_string(n_days));
  if (mode == WeeksMode::Ceil7) return (day + 6) / 7;
  if (static_cast<int>(dates.size()) != n_days)
    throw Error("week_index: calendar mode needs one date per day");
  // Weeks break at Mondays; the (possibly partial) leading week is week 1.
  int week = 1;
  for (int t = 1; t < day; ++t) {
    const std::chrono::weekday wd{dates[t]};
    if (wd == std::chrono::Monday) ++week;
  }
  return week;
}

int Panel::covariate_index(const std::string& label) const {
  for (std::size_t i = 0; i < covariates.size(); ++i)
    if (covariates[i].label == label) return static_cast<int>(i);
  return -1;
}

const CovariateColumn& Panel::covariate(const std::string& label) const {
  const int i = covariate_index(label);
  if (i < 0) throw Error("panel has no covariate column '" + label + "'");
  return covariates[static_cast<std::size_t>(i)];
}

bool Panel::has_density() const {
  for (const auto& col : covariates)
    if (col.base == "density") return true;
  return false;
}

Eigen::ArrayXXd expected_cases(const Eigen::ArrayXXd& observed,
                               const std::vector<double>& populations) {
  const int n = static_cast<int>(observed.rows());
  const int T = static_cast<int>(observed.cols());
  if (static_cast<int>(populations.size()) != n)
    throw Error("expected_cases: one population per region required");
  double pop_total = 0.0;
  for (double p : populations) {
    if (p <= 0.0) throw Error("expected_cases: populations must be positive");
    pop_total += p;
  }
  Eigen::ArrayXXd expected(n, T);
  for (int t = 0; t < T; ++t) {
    const double day_total = observed.col(t).sum();
    for (int i = 0; i < n; ++i)
      expected(i, t) = day_total * populations[static_cast<std::size_t>(i)] / pop_total;
  }
  return expected;
}

Panel build_panel(const std::string& cases_csv, const RegionSet& regions,
                  const std::vector<CovariateRow>& covariate_rows,
                  WeeksMode weeks_mode) {
  Panel panel;
  panel.n_regions = regions.size();
  for (const auto& r : regions.regions) {
    panel.region_ids.push_back(r.id);
    panel.populations.push_back(r.population);
  }

  // --- cases -----------------------------------------------------------
  const auto cases = csv::read_csv(cases_csv);
  const int c_region = cases.require_column("region_id", cases_csv);
  const int c_date = cases.require_column("date", cases_csv);
  const int c_cases = cases.require_column("cases", cases_csv);

  std::set<std::chrono::sys_days> date_set;
  for (const auto& row : cases.rows) date_set.insert(parse_date(row[c_date], cases_csv));
  if (date_set.empty()) throw Error(cases_csv + ": no case rows");
  panel.dates.assign(date_set.begin(), date_set.end());
  panel.n_days = static_cast<int>(panel.dates.size());
  for (int t = 1; t < panel.n_days; ++t)
    if ((panel.dates[t] - panel.dates[t - 1]).count() != 1) {
      panel.warnings.push_back("gap in case dates before " + format_date(panel.dates[t]));
      break;
    }

  std::map<std::chrono::sys_days, int> day_of_date;
  for (int t = 0; t < panel.n_days; ++t) day_of_date[panel.dates[t]] = t;

  panel.observed = Eigen::ArrayXXd::Zero(panel.n_regions, panel.n_days);
  Eigen::ArrayXXd seen = Eigen::ArrayXXd::Zero(panel.n_regions, panel.n_days);
  for (const auto& row : cases.rows) {
    const int i = regions.index_of(row[c_region]);
    if (i < 0) throw Error(cases_csv + ": unknown region id '" + row[c_region] + "'");
    const int t = day_of_date.at(parse_date(row[c_date], cases_csv));
    const double v = parse_double(row[c_cases], cases_csv);
    if (v < 0 || v != std::floor(v))
      throw Error(cases_csv + ": cases must be nonnegative integers, got " + row[c_cases]);
    panel.observed(i, t) = v;
    seen(i, t) = 1.0;
  }
  const long missing = static_cast<long>((1.0 - seen).sum());
  if (missing > 0)
    panel.warnings.push_back(std::to_string(missing) +
                             " region-day case cells missing, filled with zeros");

  panel.expected = expected_cases(panel.observed, panel.populations);

  // --- week index ------------------------------------------------------
  panel.weeks_mode = weeks_mode;
  panel.week_of_day.resize(static_cast<std::size_t>(panel.n_days));
  for (int t = 1; t <= panel.n_days; ++t)
    panel.week_of_day[static_cast<std::size_t>(t - 1)] =
        week_index(t, panel.n_days, weeks_mode, panel.dates);
  panel.n_weeks = panel.week_of_day.back();
  panel.in_window.assign(static_cast<std::size_t>(panel.n_days), 1);

  // --- environmental covariate history ----------------------------------
  for (const auto& base : kEnvBases) {
    std::map<int, Eigen::ArrayXd> history;
    std::map<int, std::vector<std::uint8_t>> flagged;
    for (const auto& row : covariate_rows) {
      if (to_string(row.variable) != base) continue;
      const int i = regions.index_of(row.region_id);
      if (i < 0) throw Error("covariates: unknown region id '" + row.region_id + "'");
      auto [it, inserted] = history.try_emplace(
          row.day, Eigen::ArrayXd::Constant(panel.n_regions,
                                            std::numeric_limits<double>::quiet_NaN()));
      if (inserted)
        flagged[row.day].assign(static_cast<std::size_t>(panel.n_regions), 0);
      it->second[i] = row.value;
      if (!row.flag.empty()) flagged[row.day][static_cast<std::size_t>(i)] = 1;
    }
    if (history.empty())
      throw Error("covariates: no rows for variable '" + base + "'");

    // Dense span from the earliest to the latest ingested day; holes are
    // imputed by last observation carried forward within region (flagged;
    // leading holes backfill from the first observed value).
    const int day_min = history.begin()->first;
    const int day_max = history.rbegin()->first;
    long imputed_cells = 0;
    for (int d = day_min; d <= day_max; ++d) {
      auto [it, inserted] = history.try_emplace(
          d, Eigen::ArrayXd::Constant(panel.n_regions,
                                      std::numeric_limits<double>::quiet_NaN()));
      if (inserted)
        flagged[d].assign(static_cast<std::size_t>(panel.n_regions), 0);
    }
    for (int i = 0; i < panel.n_regions; ++i) {
      double carried = std::numeric_limits<double>::quiet_NaN();
      for (int d = day_min; d <= day_max; ++d) {
        double& v = history.at(d)[i];
        if (std::isnan(v)) {
          if (!std::isnan(carried)) {
            v = carried;
            flagged.at(d)[static_cast<std::size_t>(i)] = 1;
            ++imputed_cells;
          }
        } else {
          carried = v;
        }
      }
      // leading holes: backfill
      double next = std::numeric_limits<double>::quiet_NaN();
      for (int d = day_max; d >= day_min; --d) {
        double& v = history.at(d)[i];
        if (std::isnan(v)) {
          if (std::isnan(next))
            throw Error("covariates: variable '" + base + "' has no value for region '" +
                        panel.region_ids[static_cast<std::size_t>(i)] + "'");
          v = next;
          flagged.at(d)[static_cast<std::size_t>(i)] = 1;
          ++imputed_cells;
        } else {
          next = v;
        }
      }
    }
    if (imputed_cells > 0)
      panel.warnings.push_back(std::to_string(imputed_cells) + " " + base +
                               " cells imputed by carry-forward");
    if (day_min > 1 || day_max < panel.n_days)
      throw Error("covariates: variable '" + base + "' covers days " +
                  std::to_string(day_min) + ".." + std::to_string(day_max) +
                  " but the case window is 1.." + std::to_string(panel.n_days));
    panel.env_history[base] = std::move(history);
    panel.env_history_imputed[base] = std::move(flagged);
  }

  // lag-0 columns
  for (const auto& base : kEnvBases) {
    CovariateColumn col;
    col.label = base;
    col.base = base;
    col.values = Eigen::ArrayXXd(panel.n_regions, panel.n_days);
    col.imputed.assign(static_cast<std::size_t>(panel.n_regions * panel.n_days), 0);
    for (int t = 0; t < panel.n_days; ++t) {
      col.values.col(t) = panel.env_history.at(base).at(t + 1);
      const auto& fl = panel.env_history_imputed.at(base).at(t + 1);
      for (int i = 0; i < panel.n_regions; ++i)
        col.imputed[static_cast<std::size_t>(panel.cell(i, t))] = fl[static_cast<std::size_t>(i)];
    }
    panel.covariates.push_back(std::move(col));
  }

  // density = population / area, static over days
  bool all_areas = true;
  for (const auto& r : regions.regions)
    if (r.area_km2 <= 0.0) all_areas = false;
  if (all_areas) {
    CovariateColumn col;
    col.label = "density";
    col.base = "density";
    col.values = Eigen::ArrayXXd(panel.n_regions, panel.n_days);
    col.imputed.assign(static_cast<std::size_t>(panel.n_regions * panel.n_days), 0);
    for (int i = 0; i < panel.n_regions; ++i)
      col.values.row(i).setConstant(regions.regions[static_cast<std::size_t>(i)].population /
                                    regions.regions[static_cast<std::size_t>(i)].area_km2);
    panel.covariates.push_back(std::move(col));
  } else {
    panel.warnings.push_back(
        "region areas unavailable; density covariate not built (models 2-12 need it)");
  }
  return panel;
}

void lag_covariates(Panel& panel, int lag_days, bool allow_trim) {
  if (lag_days != 0 && lag_days != 7 && lag_days != 14)
    throw Error("lag must be one of 0, 7, 14");
  if (panel.standardized || panel.degree_applied > 1)
    throw Error("lag must be applied before standardization and expansion");
  if (panel.lag_applied != 0)
    throw Error("panel already lagged by " + std::to_string(panel.lag_applied) + " days");
  if (lag_days == 0) return;

  int first_ok_day = 1;  // earliest t with history available at t - lag
  for (const auto& base : kEnvBases) {
    const auto& history = panel.env_history.at(base);
    const int day_min = history.begin()->first;
    first_ok_day = std::max(first_ok_day, day_min + lag_days);
  }
  if (first_ok_day > 1 && !allow_trim)
    throw Error("covariate history does not extend " + std::to_string(lag_days) +
                " days before the first case day and trimming is disabled");

  for (auto& col : panel.covariates) {
    if (!col.is_environmental()) continue;
    const auto& history = panel.env_history.at(col.base);
    const auto& hflags = panel.env_history_imputed.at(col.base);
    for (int t = 0; t < panel.n_days; ++t) {
      const int src = t + 1 - lag_days;
      const int clamped = std::max(src, history.begin()->first);
      col.values.col(t) = history.at(clamped);
      const auto& fl = hflags.at(clamped);
      for (int i = 0; i < panel.n_regions; ++i)
        col.imputed[static_cast<std::size_t>(panel.cell(i, t))] =
            fl[static_cast<std::size_t>(i)] || (src != clamped);
    }
    col.label = column_label(col.base, lag_days, false, 1);
  }
  if (first_ok_day > 1) {
    for (int t = 1; t < first_ok_day; ++t)
      panel.in_window[static_cast<std::size_t>(t - 1)] = 0;
    panel.warnings.push_back("lag " + std::to_string(lag_days) + ": days 1.." +
                             std::to_string(first_ok_day - 1) +
                             " dropped from the likelihood window");
  }
  panel.lag_applied = lag_days;
}

void standardize(Panel& panel) {
  if (panel.standardized) return;
  for (auto& col : panel.covariates) {
    if (col.power != 1) throw Error("standardize must run before expansion");
    std::vector<double> cells;
    cells.reserve(static_cast<std::size_t>(panel.n_regions * panel.n_days));
    for (int t = 0; t < panel.n_days; ++t) {
      if (!panel.in_window[static_cast<std::size_t>(t)]) continue;
      for (int i = 0; i < panel.n_regions; ++i) cells.push_back(col.values(i, t));
    }
    const double m = mean_of(cells);
    const double s = sd_of(cells);
    if (s <= 1e-12 * std::max(std::abs(m), 1.0))
      throw Error("covariate '" + col.label + "' has zero variance, cannot standardize");
    col.values = (col.values - m) / s;
    col.label = col.label + "_z";
    panel.transforms.push_back({col.label, m, s});
  }
  panel.standardized = true;
}

void polynomial_expand(Panel& panel, int degree) {
  if (degree < 1 || degree > 3) throw Error("polynomial degree must be 1, 2 or 3");
  if (degree == panel.degree_applied) return;
  if (panel.degree_applied != 1)
    throw Error("panel already expanded to degree " + std::to_string(panel.degree_applied));
  if (degree == 1) return;
  if (!panel.standardized)
    throw Error("polynomial_expand requires a standardized panel");

  std::vector<CovariateColumn> added;
  for (const auto& col : panel.covariates) {
    if (!col.is_environmental() || col.power != 1) continue;
    for (int k = 2; k <= degree; ++k) {
      CovariateColumn p = col;
      p.power = k;
      p.label = col.label + "_pow" + std::to_string(k);
      p.values = col.values.pow(double(k));
      added.push_back(std::move(p));
    }
  }
  for (auto& c : added) panel.covariates.push_back(std::move(c));
  panel.degree_applied = degree;
}

void write_panel_csv(const std::string& path, const Panel& panel) {
  csv::Table t;
  t.header = {"region_id", "day", "date", "week", "in_window", "observed", "expected"};
  for (const auto& col : panel.covariates) t.header.push_back(col.label);
  t.header.push_back("covariate_flags");  // bitmask, bit j = column j imputed

  for (int i = 0; i < panel.n_regions; ++i) {
    for (int d = 0; d < panel.n_days; ++d) {
      std::vector<std::string> row;
      row.push_back(panel.region_ids[static_cast<std::size_t>(i)]);
      row.push_back(std::to_string(d + 1));
      row.push_back(format_date(panel.dates[static_cast<std::size_t>(d)]));
      row.push_back(std::to_string(panel.week_of_day[static_cast<std::size_t>(d)]));
      row.push_back(std::to_string(int(panel.in_window[static_cast<std::size_t>(d)])));
      row.push_back(format_full(panel.observed(i, d)));
      row.push_back(format_full(panel.expected(i, d)));
      long mask = 0;
      for (std::size_t c = 0; c < panel.covariates.size(); ++c) {
        row.push_back(format_full(panel.covariates[c].values(i, d)));
        if (panel.covariates[c].imputed[static_cast<std::size_t>(panel.cell(i, d))])
          mask |= 1L << c;
      }
      row.push_back(std::to_string(mask));
      t.rows.push_back(std::move(row));
    }
  }
  csv::write_csv(path, t);

  nlohmann::json meta;
  meta["lag_applied"] = panel.lag_applied;
  meta["standardized"] = panel.standardized;
  meta["degree_applied"] = panel.degree_applied;
  meta["weeks_mode"] = to_string(panel.weeks_mode);
  meta["populations"] = panel.populations;
  nlohmann::json tr = nlohmann::json::array();
  for (const auto& x : panel.transforms)
    tr.push_back({{"label", x.label}, {"mean", x.mean}, {"sd", x.sd}});
  meta["transforms"] = tr;
  std::ofstream out(path + ".meta.json");
  out << meta.dump(2) << "\n";
}

Panel read_panel_csv(const std::string& path) {
  const auto t = csv::read_csv(path);
  const int c_region = t.require_column("region_id", path);
  const int c_day = t.require_column("day", path);
  const int c_date = t.require_column("date", path);
  const int c_week = t.require_column("week", path);
  const int c_window = t.require_column("in_window", path);
  const int c_obs = t.require_column("observed", path);
  const int c_exp = t.require_column("expected", path);
  const int c_flags = t.require_column("covariate_flags", path);

  std::vector<int> cov_cols;
  std::vector<std::string> cov_labels;
  for (int c = c_exp + 1; c < c_flags; ++c) {
    cov_cols.push_back(c);
    cov_labels.push_back(t.header[static_cast<std::size_t>(c)]);
  }

  Panel panel;
  std::set<std::string> region_set;
  std::set<int> day_set;
  for (const auto& row : t.rows) {
    region_set.insert(row[c_region]);
    day_set.insert(static_cast<int>(parse_long(row[c_day], path)));
  }
  panel.region_ids.assign(region_set.begin(), region_set.end());
  panel.n_regions = static_cast<int>(panel.region_ids.size());
  panel.n_days = static_cast<int>(day_set.size());
  if (*day_set.begin() != 1 || *day_set.rbegin() != panel.n_days)
    throw Error(path + ": day indices must be 1..n_days");
  if (t.rows.size() != static_cast<std::size_t>(panel.n_regions) *
                           static_cast<std::size_t>(panel.n_days))
    throw Error(path + ": expected one row per region-day");

  panel.observed = Eigen::ArrayXXd::Zero(panel.n_regions, panel.n_days);
  panel.expected = Eigen::ArrayXXd::Zero(panel.n_regions, panel.n_days);
  panel.dates.resize(static_cast<std::size_t>(panel.n_days));
  panel.week_of_day.assign(static_cast<std::size_t>(panel.n_days), 1);
  panel.in_window.assign(static_cast<std::size_t>(panel.n_days), 1);
  for (const auto& label : cov_labels) {
    CovariateColumn col;
    col.label = label;
    col.base = label;
    for (const char* sep : {"_lag", "_z", "_pow"}) {
      const auto p = col.base.find(sep);
      if (p != std::string::npos) col.base = col.base.substr(0, p);
    }
    const auto pw = label.find("_pow");
    col.power = pw == std::string::npos
                    ? 1
                    : static_cast<int>(parse_long(label.substr(pw + 4), path));
    col.values = Eigen::ArrayXXd::Zero(panel.n_regions, panel.n_days);
    col.imputed.assign(
        static_cast<std::size_t>(panel.n_regions) * static_cast<std::size_t>(panel.n_days), 0);
    panel.covariates.push_back(std::move(col));
  }

  std::map<std::string, int> region_index;
  for (int i = 0; i < panel.n_regions; ++i)
    region_index[panel.region_ids[static_cast<std::size_t>(i)]] = i;

  for (const auto& row : t.rows) {
    const int i = region_index.at(row[c_region]);
    const int d = static_cast<int>(parse_long(row[c_day], path)) - 1;
    panel.dates[static_cast<std::size_t>(d)] = parse_date(row[c_date], path);
    panel.week_of_day[static_cast<std::size_t>(d)] =
        static_cast<int>(parse_long(row[c_week], path));
    panel.in_window[static_cast<std::size_t>(d)] =
        static_cast<std::uint8_t>(parse_long(row[c_window], path));
    panel.observed(i, d) = parse_double(row[c_obs], path);
    panel.expected(i, d) = parse_double(row[c_exp], path);
    const long mask = parse_long(row[c_flags], path);
    for (std::size_t c = 0; c < cov_cols.size(); ++c) {
      panel.covariates[c].values(i, d) =
          parse_double(row[static_cast<std::size_t>(cov_cols[c])], path);
      if (mask & (1L << c))
        panel.covariates[c].imputed[static_cast<std::size_t>(panel.cell(i, d))] = 1;
    }
  }
  panel.n_weeks = *std::max_element(panel.week_of_day.begin(), panel.week_of_day.end());

  // Optional sidecar restores provenance (lag, transforms, populations).
  std::ifstream meta_in(path + ".meta.json");
  if (meta_in) {
    nlohmann::json meta;
    meta_in >> meta;
    panel.lag_applied = meta.value("lag_applied", 0);
    panel.standardized = meta.value("standardized", false);
    panel.degree_applied = meta.value("degree_applied", 1);
    panel.weeks_mode = weeks_mode_from_string(meta.value("weeks_mode", "ceil7"));
    if (meta.contains("populations"))
      panel.populations = meta.at("populations").get<std::vector<double>>();
    if (meta.contains("transforms"))
      for (const auto& x : meta.at("transforms"))
        panel.transforms.push_back({x.at("label").get<std::string>(),
                                    x.at("mean").get<double>(), x.at("sd").get<double>()});
  } else {
    // infer from labels
    for (const auto& col : panel.covariates) {
      if (col.label.find("_z") != std::string::npos) panel.standardized = true;
      const auto lg = col.label.find("_lag");
      if (lg != std::string::npos)
        panel.lag_applied = static_cast<int>(
            parse_long(col.label.substr(lg + 4, col.label.find('_', lg + 4) - lg - 4), path));
      panel.degree_applied = std::max(panel.degree_applied, col.power);
    }
  }
  if (panel.populations.empty())
    panel.populations.assign(static_cast<std::size_t>(panel.n_regions), 1.0);
  return panel;
}

}  // namespace riskmap
