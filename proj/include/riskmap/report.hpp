#pragma once

#include <string>
#include <vector>

#include "riskmap/geometry.hpp"
#include "riskmap/mcmc.hpp"

namespace riskmap {

enum class SurfaceScope { Temporal, Spatial, SpatioTemporal };

std::string to_string(SurfaceScope s);

enum class PointStat { Mean, Median };

struct SurfaceCell {
  int region = -1;  // canonical index, -1 for temporal scope
  int day = -1;     // 1-based, -1 when weekly/spatial
  int week = -1;    // 1-based, -1 when not applicable
  double rr = 0.0;  // point estimate on the risk scale
  double rr_lo = 0.0;
  double rr_hi = 0.0;
};

struct RelativeRiskSurface {
  SurfaceScope scope = SurfaceScope::Temporal;
  std::string component;  // "gamma", "phi", "spatial", "spatiotemporal"
  std::vector<SurfaceCell> cells;
};

// Summaries exponentiate per draw and only then average; intervals are the
// 2.5%/97.5% quantiles of the exponentiated draws.
std::vector<RelativeRiskSurface> temporal_rr(const LoadedFit& fit,
                                             PointStat stat = PointStat::Mean);
RelativeRiskSurface spatial_rr(const LoadedFit& fit, PointStat stat = PointStat::Mean);
RelativeRiskSurface spatiotemporal_rr(const LoadedFit& fit, const std::vector<int>& days,
                                      PointStat stat = PointStat::Mean);

struct SmoothedSeries {
  std::vector<double> values;
  double span = 0.75;
  int degree = 2;
};

// LOESS: local weighted polynomial fit over the ceil(span*n) nearest
// neighbours with tricube weights, no robustness passes.
SmoothedSeries loess_smooth(const std::vector<double>& x, const std::vector<double>& y,
                            double span = 0.75, int degree = 2);

// csv schema: scope,region_id,day,week,rr_mean,rr_lo,rr_hi[,rr_smooth]
void export_surface_csv(const std::string& path, const RelativeRiskSurface& surface,
                        const std::vector<std::string>& region_ids,
                        const std::vector<double>* smoothed = nullptr);

// geojson: one feature per cell with the same fields as properties.
void export_surface_geojson(const std::string& path, const RelativeRiskSurface& surface,
                            const std::vector<std::string>& region_ids,
                            const std::vector<RegionShape>& shapes);

struct ImportedSurfaceRow {
  std::string scope;
  std::string region_id;
  int day = -1;
  int week = -1;
  double rr = 0.0;
  double rr_lo = 0.0;
  double rr_hi = 0.0;
};

std::vector<ImportedSurfaceRow> import_surface_csv(const std::string& path);

}  // namespace riskmap
