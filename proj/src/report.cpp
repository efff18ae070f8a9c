#include "riskmap/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace riskmap {

namespace {

// Pooled draws of exp(sum of the listed registry segments at given offsets).
SurfaceCell summarize_exp(const PosteriorSamples& samples, const std::vector<int>& indices,
                          PointStat stat) {
  std::vector<double> draws;
  draws.reserve(static_cast<std::size_t>(samples.total_draws()));
  for (const auto& chain : samples.chains)
    for (long k = 0; k < chain.draws.rows(); ++k) {
      double acc = 0.0;
      for (int idx : indices) acc += chain.draws(k, idx);
      draws.push_back(std::exp(acc));
    }
  SurfaceCell cell;
  const double mean = mean_of(draws);
  std::sort(draws.begin(), draws.end());
  cell.rr = stat == PointStat::Mean ? mean : quantile_sorted(draws, 0.5);
  cell.rr_lo = quantile_sorted(draws, 0.025);
  cell.rr_hi = quantile_sorted(draws, 0.975);
  return cell;
}

int block_offset(const LoadedFit& fit, const std::string& label) {
  if (!fit.samples.registry.has(label)) return -1;
  return fit.samples.registry.find(label).offset;
}

}  // namespace

std::string to_string(SurfaceScope s) {
  switch (s) {
    case SurfaceScope::Temporal: return "temporal";
    case SurfaceScope::Spatial: return "spatial";
    case SurfaceScope::SpatioTemporal: return "st";
  }
  return "?";
}

std::vector<RelativeRiskSurface> temporal_rr(const LoadedFit& fit, PointStat stat) {
  const int off_gamma = block_offset(fit, "gamma");
  const int off_phi = block_offset(fit, "phi");
  if (off_gamma < 0 || off_phi < 0)
    throw Error("model " + std::to_string(fit.model_id) +
                " has no temporal effects (unsupported for temporal_rr)");
  const bool weekly = fit.resolution == TemporalResolution::Weekly;
  std::vector<RelativeRiskSurface> out;
  for (const auto& [label, offset] :
       {std::pair<std::string, int>{"gamma", off_gamma}, {"phi", off_phi}}) {
    RelativeRiskSurface surf;
    surf.scope = SurfaceScope::Temporal;
    surf.component = label;
    for (int u = 0; u < fit.n_units; ++u) {
      SurfaceCell cell = summarize_exp(fit.samples, {offset + u}, stat);
      if (weekly) {
        cell.week = u + 1;
      } else {
        cell.day = u + 1;
        cell.week = fit.week_of_day[static_cast<std::size_t>(u)];
      }
      surf.cells.push_back(cell);
    }
    out.push_back(std::move(surf));
  }
  return out;
}

RelativeRiskSurface spatial_rr(const LoadedFit& fit, PointStat stat) {
  const int off_u = block_offset(fit, "u");
  const int off_v = block_offset(fit, "v");
  if (off_u < 0 || off_v < 0)
    throw Error("model " + std::to_string(fit.model_id) +
                " has no spatial effects (unsupported for spatial_rr)");
  RelativeRiskSurface surf;
  surf.scope = SurfaceScope::Spatial;
  surf.component = "spatial";
  for (int i = 0; i < fit.n_regions; ++i) {
    SurfaceCell cell = summarize_exp(fit.samples, {off_u + i, off_v + i}, stat);
    cell.region = i;
    surf.cells.push_back(cell);
  }
  return surf;
}

RelativeRiskSurface spatiotemporal_rr(const LoadedFit& fit, const std::vector<int>& days,
                                      PointStat stat) {
  const int off_u = block_offset(fit, "u");
  const int off_v = block_offset(fit, "v");
  const int off_gamma = block_offset(fit, "gamma");
  const int off_phi = block_offset(fit, "phi");
  const int off_delta = block_offset(fit, "delta");
  if (off_delta < 0)
    throw Error("model " + std::to_string(fit.model_id) +
                " has no space-time interaction (unsupported for spatiotemporal_rr)");
  RelativeRiskSurface surf;
  surf.scope = SurfaceScope::SpatioTemporal;
  surf.component = "spatiotemporal";
  for (int day : days) {
    if (day < 1 || day > fit.n_days)
      throw Error("day " + std::to_string(day) + " outside 1.." +
                  std::to_string(fit.n_days));
    const int unit = fit.unit_of_day[static_cast<std::size_t>(day - 1)];
    for (int i = 0; i < fit.n_regions; ++i) {
      const std::vector<int> idx = {off_u + i, off_v + i, off_gamma + unit,
                                    off_phi + unit, off_delta + i * fit.n_units + unit};
      SurfaceCell cell = summarize_exp(fit.samples, idx, stat);
      cell.region = i;
      cell.day = day;
      cell.week = fit.week_of_day[static_cast<std::size_t>(day - 1)];
      surf.cells.push_back(cell);
    }
  }
  return surf;
}

SmoothedSeries loess_smooth(const std::vector<double>& x, const std::vector<double>& y,
                            double span, int degree) {
  const int n = static_cast<int>(x.size());
  if (static_cast<int>(y.size()) != n) throw Error("loess: x/y length mismatch");
  if (degree != 1 && degree != 2) throw Error("loess: degree must be 1 or 2");
  if (span <= 0.0 || span > 1.0) throw Error("loess: span must be in (0, 1]");
  if (n < std::max(5, degree + 2))
    throw Error("loess: series too short (" + std::to_string(n) + " points)");
  const int q = std::max(static_cast<int>(std::ceil(span * n)), degree + 2);

  SmoothedSeries out;
  out.span = span;
  out.degree = degree;
  out.values.resize(static_cast<std::size_t>(n));

  std::vector<int> order(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static) firstprivate(order) if (n > 64)
  for (int p = 0; p < n; ++p) {
    const double x0 = x[static_cast<std::size_t>(p)];
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::nth_element(order.begin(), order.begin() + (q - 1), order.end(),
                     [&](int a, int b) {
                       return std::abs(x[static_cast<std::size_t>(a)] - x0) <
                              std::abs(x[static_cast<std::size_t>(b)] - x0);
                     });
    double d_max = 0.0;
    for (int k = 0; k < q; ++k)
      d_max = std::max(d_max,
                       std::abs(x[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] - x0));

    const int cols = degree + 1;
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(cols, cols);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(cols);
    for (int k = 0; k < q; ++k) {
      const int i = order[static_cast<std::size_t>(k)];
      const double d = std::abs(x[static_cast<std::size_t>(i)] - x0);
      const double r = d_max > 0.0 ? d / d_max : 0.0;
      const double w = std::pow(1.0 - r * r * r, 3.0);
      if (w <= 0.0) continue;
      Eigen::VectorXd row(cols);
      row[0] = 1.0;
      const double dx = x[static_cast<std::size_t>(i)] - x0;
      for (int c = 1; c < cols; ++c) row[c] = row[c - 1] * dx;
      xtx.noalias() += w * row * row.transpose();
      xty.noalias() += w * y[static_cast<std::size_t>(i)] * row;
    }
    const Eigen::VectorXd coef = xtx.ldlt().solve(xty);
    out.values[static_cast<std::size_t>(p)] = coef[0];
  }
  return out;
}

void export_surface_csv(const std::string& path, const RelativeRiskSurface& surface,
                        const std::vector<std::string>& region_ids,
                        const std::vector<double>* smoothed) {
  if (smoothed && smoothed->size() != surface.cells.size())
    throw Error("export: smoothed series length mismatch");
  csv::Table t;
  t.header = {"scope", "region_id", "day", "week", "rr_mean", "rr_lo", "rr_hi"};
  if (smoothed) t.header.push_back("rr_smooth");
  const std::string scope = to_string(surface.scope);
  for (std::size_t k = 0; k < surface.cells.size(); ++k) {
    const auto& c = surface.cells[k];
    std::vector<std::string> row = {
        scope,
        c.region >= 0 ? region_ids.at(static_cast<std::size_t>(c.region)) : "",
        c.day >= 0 ? std::to_string(c.day) : "",
        c.week >= 0 ? std::to_string(c.week) : "",
        format_full(c.rr),
        format_full(c.rr_lo),
        format_full(c.rr_hi)};
    if (smoothed) row.push_back(format_full((*smoothed)[k]));
    t.rows.push_back(std::move(row));
  }
  csv::write_csv(path, t);
}

void export_surface_geojson(const std::string& path, const RelativeRiskSurface& surface,
                            const std::vector<std::string>& region_ids,
                            const std::vector<RegionShape>& shapes) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& c : surface.cells) {
    if (c.region < 0)
      throw Error("geojson export needs region-scoped cells (temporal surfaces are csv-only)");
    const std::string& id = region_ids.at(static_cast<std::size_t>(c.region));
    const RegionShape* shape = nullptr;
    for (const auto& s : shapes)
      if (s.id == id) shape = &s;
    if (!shape) throw Error("geojson export: no polygon for region '" + id + "'");

    nlohmann::json geom;
    geom["type"] = "MultiPolygon";
    nlohmann::json polys = nlohmann::json::array();
    for (const auto& poly : shape->polygons) {
      nlohmann::json rings = nlohmann::json::array();
      for (const auto& ring : poly) {
        nlohmann::json coords = nlohmann::json::array();
        for (const auto& p : ring) coords.push_back({p.x, p.y});
        coords.push_back({ring.front().x, ring.front().y});
        rings.push_back(coords);
      }
      polys.push_back(rings);
    }
    geom["coordinates"] = polys;

    nlohmann::json props;
    props["id"] = id;
    props["scope"] = to_string(surface.scope);
    if (c.day >= 0) props["day"] = c.day;
    if (c.week >= 0) props["week"] = c.week;
    props["rr_mean"] = c.rr;
    props["rr_lo"] = c.rr_lo;
    props["rr_hi"] = c.rr_hi;
    features.push_back(
        {{"type", "Feature"}, {"geometry", geom}, {"properties", props}});
  }
  nlohmann::json doc;
  doc["type"] = "FeatureCollection";
  doc["features"] = features;
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << doc.dump(1) << "\n";
}

std::vector<ImportedSurfaceRow> import_surface_csv(const std::string& path) {
  const auto t = csv::read_csv(path);
  for (const auto& col :
       {"scope", "region_id", "day", "week", "rr_mean", "rr_lo", "rr_hi"})
    t.require_column(col, path);
  const int c_scope = t.column("scope");
  const int c_region = t.column("region_id");
  const int c_day = t.column("day");
  const int c_week = t.column("week");
  const int c_rr = t.column("rr_mean");
  const int c_lo = t.column("rr_lo");
  const int c_hi = t.column("rr_hi");
  std::vector<ImportedSurfaceRow> rows;
  for (const auto& row : t.rows) {
    ImportedSurfaceRow r;
    r.scope = row[c_scope];
    r.region_id = row[c_region];
    r.day = row[c_day].empty() ? -1 : static_cast<int>(parse_long(row[c_day], path));
    r.week = row[c_week].empty() ? -1 : static_cast<int>(parse_long(row[c_week], path));
    r.rr = parse_double(row[c_rr], path);
    r.rr_lo = parse_double(row[c_lo], path);
    r.rr_hi = parse_double(row[c_hi], path);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace riskmap
