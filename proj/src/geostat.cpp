#include "riskmap/geostat.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

namespace riskmap {

namespace {

double dist(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

// --- Nelder-Mead over the 3 variogram parameters ----------------------------

struct Simplex {
  using Vec = std::array<double, 3>;
  Vec best{};
  double best_value = std::numeric_limits<double>::infinity();
};

template <typename F>
Simplex nelder_mead(F objective, std::array<double, 3> start,
                    std::array<double, 3> step, int max_iter) {
  constexpr int n = 3;
  using Vec = std::array<double, 3>;
  std::array<Vec, n + 1> pts;
  std::array<double, n + 1> val;
  pts[0] = start;
  for (int i = 0; i < n; ++i) {
    pts[i + 1] = start;
    pts[i + 1][i] += step[i];
  }
  for (int i = 0; i <= n; ++i) val[i] = objective(pts[i]);

  auto order = [&] {
    std::array<int, n + 1> idx{0, 1, 2, 3};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return val[a] < val[b]; });
    std::array<Vec, n + 1> p2;
    std::array<double, n + 1> v2;
    for (int i = 0; i <= n; ++i) {
      p2[i] = pts[idx[i]];
      v2[i] = val[idx[i]];
    }
    pts = p2;
    val = v2;
  };

  for (int iter = 0; iter < max_iter; ++iter) {
    order();
    if (std::abs(val[n] - val[0]) <= 1e-14 * (std::abs(val[0]) + 1e-14)) break;
    Vec centroid{};
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < 3; ++d) centroid[d] += pts[i][d] / n;
    auto affine = [&](double t) {
      Vec p;
      for (int d = 0; d < 3; ++d) p[d] = centroid[d] + t * (pts[n][d] - centroid[d]);
      return p;
    };
    const Vec refl = affine(-1.0);
    const double f_refl = objective(refl);
    if (f_refl < val[0]) {
      const Vec expd = affine(-2.0);
      const double f_exp = objective(expd);
      if (f_exp < f_refl) {
        pts[n] = expd;
        val[n] = f_exp;
      } else {
        pts[n] = refl;
        val[n] = f_refl;
      }
    } else if (f_refl < val[n - 1]) {
      pts[n] = refl;
      val[n] = f_refl;
    } else {
      const Vec contr = affine(f_refl < val[n] ? -0.5 : 0.5);
      const double f_con = objective(contr);
      if (f_con < std::min(val[n], f_refl)) {
        pts[n] = contr;
        val[n] = f_con;
      } else {  // shrink toward the best point
        for (int i = 1; i <= n; ++i) {
          for (int d = 0; d < 3; ++d) pts[i][d] = pts[0][d] + 0.5 * (pts[i][d] - pts[0][d]);
          val[i] = objective(pts[i]);
        }
      }
    }
  }
  order();
  return {pts[0], val[0]};
}

}  // namespace

std::string to_string(EnvVariable v) {
  switch (v) {
    case EnvVariable::SolarExposure: return "solar_exposure";
    case EnvVariable::MeanTemperature: return "mean_temperature";
    case EnvVariable::WindSpeed: return "wind_speed";
  }
  return "?";
}

std::optional<EnvVariable> env_variable_from_string(const std::string& s) {
  if (s == "solar_exposure") return EnvVariable::SolarExposure;
  if (s == "mean_temperature") return EnvVariable::MeanTemperature;
  if (s == "wind_speed") return EnvVariable::WindSpeed;
  return std::nullopt;
}

std::vector<StationObservation> read_stations_csv(const std::string& path) {
  const auto t = csv::read_csv(path);
  const int c_id = t.require_column("station_id", path);
  const int c_x = t.require_column("x_km", path);
  const int c_y = t.require_column("y_km", path);
  const int c_day = t.require_column("day", path);
  const int c_var = t.require_column("variable", path);
  const int c_val = t.require_column("value", path);
  std::vector<StationObservation> out;
  std::set<std::tuple<std::string, int, int>> seen;
  for (const auto& row : t.rows) {
    StationObservation o;
    o.station_id = row[c_id];
    o.location = {parse_double(row[c_x], path), parse_double(row[c_y], path)};
    o.day = static_cast<int>(parse_long(row[c_day], path));
    const auto var = env_variable_from_string(row[c_var]);
    if (!var) throw Error(path + ": unknown variable '" + row[c_var] + "'");
    o.variable = *var;
    o.value = parse_double(row[c_val], path);
    if (!std::isfinite(o.location.x) || !std::isfinite(o.location.y))
      throw Error(path + ": non-finite coordinates for station " + o.station_id);
    if (!seen.insert({o.station_id, o.day, static_cast<int>(o.variable)}).second)
      throw Error(path + ": duplicate observation for station " + o.station_id +
                  ", day " + std::to_string(o.day) + ", " + to_string(o.variable));
    out.push_back(std::move(o));
  }
  return out;
}

std::string to_string(VariogramFamily f) {
  switch (f) {
    case VariogramFamily::Exponential: return "exponential";
    case VariogramFamily::Spherical: return "spherical";
    case VariogramFamily::Gaussian: return "gaussian";
  }
  return "?";
}

double VariogramModel::operator()(double h) const {
  if (h <= 0.0) return 0.0;
  switch (family) {
    case VariogramFamily::Exponential:
      return nugget + partial_sill * (1.0 - std::exp(-h / range));
    case VariogramFamily::Spherical: {
      if (h >= range) return nugget + partial_sill;
      const double r = h / range;
      return nugget + partial_sill * (1.5 * r - 0.5 * r * r * r);
    }
    case VariogramFamily::Gaussian: {
      const double r = h / range;
      return nugget + partial_sill * (1.0 - std::exp(-r * r));
    }
  }
  return 0.0;
}

EmpiricalVariogram empirical_variogram(const std::vector<Point>& locations,
                                       const std::vector<double>& values, int n_bins,
                                       double max_dist) {
  if (locations.size() != values.size())
    throw Error("empirical_variogram: locations/values size mismatch");
  if (locations.size() < 2)
    throw Error("empirical_variogram: insufficient data (need at least 2 observations)");
  if (n_bins < 1 || max_dist <= 0.0)
    throw Error("empirical_variogram: invalid bins or max distance");

  const std::size_t n = locations.size();
  std::vector<double> sum_sq(n_bins, 0.0), sum_d(n_bins, 0.0);
  std::vector<long> count(n_bins, 0);
  const double width = max_dist / n_bins;
  double max_pair = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = dist(locations[i], locations[j]);
      max_pair = std::max(max_pair, d);
      if (d <= 0.0 || d > max_dist) continue;
      int b = std::min(static_cast<int>(d / width), n_bins - 1);
      const double diff = values[i] - values[j];
      sum_sq[b] += diff * diff;
      sum_d[b] += d;
      ++count[b];
    }
  }
  EmpiricalVariogram emp;
  for (int b = 0; b < n_bins; ++b) {
    if (count[b] == 0) continue;
    emp.bins.push_back({sum_d[b] / count[b], sum_sq[b] / (2.0 * count[b]), count[b]});
  }
  emp.value_variance = sd_of(values) * sd_of(values);
  emp.max_pair_distance = max_pair;
  return emp;
}

VariogramModel fit_variogram(const EmpiricalVariogram& emp,
                             const std::vector<VariogramFamily>& families,
                             VariogramFitDiagnostics* diag) {
  if (emp.bins.size() < 3)
    throw Error("fit_variogram: need at least 3 non-empty bins, got " +
                std::to_string(emp.bins.size()));
  if (families.empty()) throw Error("fit_variogram: no candidate families");

  const double maxd =
      emp.max_pair_distance > 0 ? emp.max_pair_distance : emp.bins.back().distance;
  double min_gamma = std::numeric_limits<double>::infinity();
  double max_gamma = 0.0;
  for (const auto& b : emp.bins) {
    min_gamma = std::min(min_gamma, b.gamma);
    max_gamma = std::max(max_gamma, b.gamma);
  }
  const double gamma_scale = std::max(max_gamma, 1e-12);

  VariogramModel best;
  double best_obj = std::numeric_limits<double>::infinity();
  bool any = false;

  for (const auto family : families) {
    auto objective = [&](const std::array<double, 3>& p) {
      const auto [nug, psill, range] = p;
      if (nug < 0.0 || psill < 0.0 || range <= 1e-9 * maxd || range > 100.0 * maxd)
        return std::numeric_limits<double>::infinity();
      VariogramModel m{family, nug, psill, range};
      double obj = 0.0;
      for (const auto& b : emp.bins) {
        const double h2 = std::max(b.distance * b.distance, 1e-12);
        const double r = b.gamma - m(b.distance);
        obj += (static_cast<double>(b.pair_count) / h2) * r * r;
      }
      return obj;
    };

    // Data-driven start first (min gamma, value variance, half max distance),
    // then a coarse grid of alternatives.
    std::vector<std::array<double, 3>> starts;
    starts.push_back({min_gamma, std::max(emp.value_variance - min_gamma, 0.1 * gamma_scale),
                      0.5 * maxd});
    for (const double nf : {0.0, 0.5})
      for (const double rf : {0.1, 0.25, 0.5, 1.0})
        starts.push_back({nf * min_gamma, std::max(max_gamma - nf * min_gamma, 0.05 * gamma_scale),
                          rf * maxd});

    Simplex fam_best;
    for (const auto& s0 : starts) {
      std::array<double, 3> step{std::max(0.1 * gamma_scale, 0.05 * (s0[0] + 1e-3)),
                                 std::max(0.2 * gamma_scale, 0.05 * s0[1]),
                                 0.2 * maxd};
      auto res = nelder_mead(objective, s0, step, 500);
      // polish from the incumbent with a tighter simplex
      res = nelder_mead(objective, res.best,
                        {1e-3 * gamma_scale, 1e-3 * gamma_scale, 1e-3 * maxd}, 500);
      if (res.best_value < fam_best.best_value) fam_best = res;
    }
    if (diag) diag->objectives.emplace_back(family, fam_best.best_value);
    if (std::isfinite(fam_best.best_value) && fam_best.best_value < best_obj) {
      best_obj = fam_best.best_value;
      best = VariogramModel{family, std::max(fam_best.best[0], 0.0),
                            std::max(fam_best.best[1], 0.0), fam_best.best[2]};
      any = true;
    }
  }
  if (!any) {
    std::string msg = "fit_variogram: optimisation failed for all families;";
    if (diag)
      for (const auto& [f, o] : diag->objectives)
        msg += " " + to_string(f) + "=" + std::to_string(o);
    throw Error(msg);
  }
  return best;
}

KrigingSystem::KrigingSystem(std::vector<Point> stations, std::vector<double> values,
                             VariogramModel model)
    : model_(model) {
  if (stations.size() != values.size())
    throw Error("kriging: stations/values size mismatch");
  if (stations.size() < 2) throw Error("kriging: need at least 2 stations");

  // Merge duplicate locations by averaging, otherwise the system is singular.
  std::map<std::pair<long long, long long>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < stations.size(); ++i)
    groups[{std::llround(stations[i].x * 1e9), std::llround(stations[i].y * 1e9)}]
        .push_back(i);
  for (const auto& [_, idx] : groups) {
    double acc = 0.0;
    for (std::size_t i : idx) acc += values[i];
    stations_.push_back(stations[idx.front()]);
    values_.push_back(acc / static_cast<double>(idx.size()));
  }
  if (stations_.size() < 2)
    throw Error("kriging: fewer than 2 distinct station locations");

  const int m = static_cast<int>(stations_.size());
  Eigen::MatrixXd k(m + 1, m + 1);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) k(i, j) = model_(dist(stations_[i], stations_[j]));
    k(i, m) = 1.0;
    k(m, i) = 1.0;
  }
  k(m, m) = 0.0;

  Eigen::FullPivLU<Eigen::MatrixXd> rank_check(k);
  if (rank_check.rank() < m + 1)
    throw Error("kriging: singular system after merging duplicate stations");
  lu_.compute(k);
}

KrigingEstimate KrigingSystem::predict(const Point& target) const {
  const int m = static_cast<int>(stations_.size());
  Eigen::VectorXd rhs(m + 1);
  for (int i = 0; i < m; ++i) rhs[i] = model_(dist(stations_[i], target));
  rhs[m] = 1.0;
  const Eigen::VectorXd sol = lu_.solve(rhs);
  KrigingEstimate est;
  est.location = target;
  est.value = 0.0;
  est.variance = sol[m];  // Lagrange multiplier
  for (int i = 0; i < m; ++i) {
    est.value += sol[i] * values_[i];
    est.variance += sol[i] * rhs[i];
  }
  return est;
}

std::vector<KrigingEstimate> KrigingSystem::predict_many(
    const std::vector<Point>& targets) const {
  std::vector<KrigingEstimate> out(targets.size());
  const std::int64_t n = static_cast<std::int64_t>(targets.size());
#pragma omp parallel for schedule(static) if (n > 16)
  for (std::int64_t i = 0; i < n; ++i) out[i] = predict(targets[i]);
  return out;
}

std::vector<KrigingEstimate> ordinary_kriging(const std::vector<Point>& stations,
                                              const std::vector<double>& values,
                                              const VariogramModel& model,
                                              const std::vector<Point>& targets) {
  KrigingSystem sys(stations, values, model);
  return sys.predict_many(targets);
}

Grid make_grid(const std::vector<RegionShape>& shapes, double spacing_km) {
  if (spacing_km <= 0.0) throw Error("make_grid: spacing must be positive");
  for (const auto& s : shapes)
    if (s.area() <= 0.0) throw Error("make_grid: degenerate polygon for region '" + s.id + "'");

  const BoundingBox box = shapes_bbox(shapes);
  Grid grid;
  grid.spacing = spacing_km;
  grid.points_of_region.assign(shapes.size(), {});
  for (double y = box.min_y + 0.5 * spacing_km; y <= box.max_y; y += spacing_km) {
    for (double x = box.min_x + 0.5 * spacing_km; x <= box.max_x; x += spacing_km) {
      const Point p{x, y};
      int assigned = -1;
      for (std::size_t r = 0; r < shapes.size(); ++r) {
        if (shapes[r].contains(p)) {  // shapes sorted by id: smaller id wins
          assigned = static_cast<int>(r);
          break;
        }
      }
      grid.points.push_back(p);
      grid.region_of_point.push_back(assigned);
      if (assigned >= 0)
        grid.points_of_region[assigned].push_back(static_cast<int>(grid.points.size()) - 1);
    }
  }
  return grid;
}

ArealAverage areal_average(const std::vector<double>& point_values, const Grid& grid,
                           const std::vector<double>& centroid_values) {
  if (point_values.size() != grid.points.size())
    throw Error("areal_average: one value per grid point required");
  const std::size_t n_regions = grid.points_of_region.size();
  if (centroid_values.size() != n_regions)
    throw Error("areal_average: one centroid value per region required");
  ArealAverage out;
  out.value.resize(n_regions);
  out.flag.resize(n_regions);
  for (std::size_t r = 0; r < n_regions; ++r) {
    const auto& idx = grid.points_of_region[r];
    if (idx.empty()) {
      out.value[r] = centroid_values[r];
      out.flag[r] = ArealFlag::CentroidFallback;
      continue;
    }
    double acc = 0.0;
    for (int i : idx) acc += point_values[i];
    out.value[r] = acc / static_cast<double>(idx.size());
    out.flag[r] = ArealFlag::None;
  }
  return out;
}

KrigeResult krige_covariates(const std::vector<StationObservation>& stations,
                             const std::vector<RegionShape>& shapes,
                             const KrigeOptions& options) {
  KrigeResult result;
  BoundingBox box = shapes_bbox(shapes);
  const double diag_len = box.diagonal();
  box.expand(options.buffer_km);

  const Grid grid = make_grid(shapes, options.spacing_km);
  std::vector<Point> centroids;
  centroids.reserve(shapes.size());
  for (const auto& s : shapes) centroids.push_back(s.centroid());

  // (variable, day) -> participating observations
  std::map<std::pair<int, int>, std::vector<const StationObservation*>> tasks;
  long excluded = 0;
  for (const auto& obs : stations) {
    if (!box.contains(obs.location)) {
      ++excluded;
      continue;
    }
    tasks[{static_cast<int>(obs.variable), obs.day}].push_back(&obs);
  }
  if (excluded > 0)
    result.warnings.push_back(std::to_string(excluded) +
                              " observations outside study box + buffer excluded");

  // Kriging tasks are independent per (variable, day); the last successful
  // fit per variable backs days where the fit is not identifiable.
  std::map<int, VariogramModel> last_model;
  for (const auto& [key, obs_list] : tasks) {
    const auto [var_idx, day] = key;
    const auto variable = static_cast<EnvVariable>(var_idx);
    std::vector<std::string> flags;

    if (obs_list.size() < 2) {
      result.warnings.push_back("day " + std::to_string(day) + ", " + to_string(variable) +
                                ": fewer than 2 stations, no output (values imputed downstream)");
      continue;
    }
    if (static_cast<int>(obs_list.size()) < options.min_stations)
      flags.push_back("low_stations");

    std::vector<Point> locs;
    std::vector<double> vals;
    for (const auto* o : obs_list) {
      locs.push_back(o->location);
      vals.push_back(o->value);
    }

    VariogramModel model;
    bool fitted = false;
    try {
      const auto emp = empirical_variogram(locs, vals, options.n_bins, diag_len / 3.0);
      model = fit_variogram(emp, options.families);
      fitted = true;
    } catch (const Error&) {
      if (auto it = last_model.find(var_idx); it != last_model.end()) {
        model = it->second;
      } else {  // pure nugget: prediction is the station mean
        model = VariogramModel{VariogramFamily::Exponential,
                               std::max(sd_of(vals) * sd_of(vals), 1e-6), 0.0,
                               diag_len / 3.0};
      }
      flags.push_back("fallback_model");
      result.warnings.push_back("day " + std::to_string(day) + ", " + to_string(variable) +
                                ": variogram fit not identifiable, fallback model used");
    }
    if (fitted) last_model[var_idx] = model;

    KrigingSystem sys(locs, vals, model);
    const auto grid_est = sys.predict_many(grid.points);
    const auto centroid_est = sys.predict_many(centroids);
    std::vector<double> grid_vals(grid_est.size());
    for (std::size_t i = 0; i < grid_est.size(); ++i) grid_vals[i] = grid_est[i].value;
    std::vector<double> centroid_vals(centroid_est.size());
    for (std::size_t i = 0; i < centroid_est.size(); ++i)
      centroid_vals[i] = centroid_est[i].value;

    const auto avg = areal_average(grid_vals, grid, centroid_vals);
    for (std::size_t r = 0; r < shapes.size(); ++r) {
      auto row_flags = flags;
      if (avg.flag[r] == ArealFlag::CentroidFallback)
        row_flags.push_back("centroid_fallback");
      result.rows.push_back({shapes[r].id, day, variable, avg.value[r],
                             join(row_flags, ";")});
    }
  }
  return result;
}

void write_covariates_csv(const std::string& path, const std::vector<CovariateRow>& rows) {
  csv::Table t;
  t.header = {"region_id", "day", "variable", "value", "flag"};
  for (const auto& r : rows)
    t.rows.push_back({r.region_id, std::to_string(r.day), to_string(r.variable),
                      format_full(r.value), r.flag});
  csv::write_csv(path, t);
}

std::vector<CovariateRow> read_covariates_csv(const std::string& path) {
  const auto t = csv::read_csv(path);
  const int c_region = t.require_column("region_id", path);
  const int c_day = t.require_column("day", path);
  const int c_var = t.require_column("variable", path);
  const int c_val = t.require_column("value", path);
  const int c_flag = t.require_column("flag", path);
  std::vector<CovariateRow> rows;
  for (const auto& row : t.rows) {
    const auto var = env_variable_from_string(row[c_var]);
    if (!var) throw Error(path + ": unknown variable '" + row[c_var] + "'");
    rows.push_back({row[c_region], static_cast<int>(parse_long(row[c_day], path)), *var,
                    parse_double(row[c_val], path), row[c_flag]});
  }
  return rows;
}

}  // namespace riskmap
