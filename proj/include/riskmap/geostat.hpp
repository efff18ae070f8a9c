#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "riskmap/common.hpp"
#include "riskmap/csv.hpp"
#include "riskmap/geometry.hpp"

namespace riskmap {

enum class EnvVariable { SolarExposure, MeanTemperature, WindSpeed };

std::string to_string(EnvVariable v);
std::optional<EnvVariable> env_variable_from_string(const std::string& s);

struct StationObservation {
  std::string station_id;
  Point location;  // planar km
  int day = 0;     // panel day index; <= 0 is pre-period
  EnvVariable variable = EnvVariable::SolarExposure;
  double value = 0.0;
};

std::vector<StationObservation> read_stations_csv(const std::string& path);

enum class VariogramFamily { Exponential, Spherical, Gaussian };

std::string to_string(VariogramFamily f);

struct VariogramModel {
  VariogramFamily family = VariogramFamily::Exponential;
  double nugget = 0.0;
  double partial_sill = 1.0;
  double range = 1.0;

  double operator()(double h) const;  // semivariance, gamma(0) = 0
};

struct VariogramBin {
  double distance = 0.0;  // mean pair distance in the bin
  double gamma = 0.0;
  long pair_count = 0;
};

struct EmpiricalVariogram {
  std::vector<VariogramBin> bins;  // zero-pair bins omitted
  double value_variance = 0.0;     // drives the fit initials
  double max_pair_distance = 0.0;
};

// Classical estimator gamma(h) = sum (z_i - z_j)^2 / (2 |N(h)|) on distance
// bins of width max_dist / n_bins.
EmpiricalVariogram empirical_variogram(const std::vector<Point>& locations,
                                       const std::vector<double>& values,
                                       int n_bins, double max_dist);

struct VariogramFitDiagnostics {
  std::vector<std::pair<VariogramFamily, double>> objectives;
};

// Weighted least squares (weights pair_count / h^2) over
// (nugget, partial sill, range), multi-start Nelder-Mead per family; the
// family with the smallest objective wins.
VariogramModel fit_variogram(const EmpiricalVariogram& emp,
                             const std::vector<VariogramFamily>& families,
                             VariogramFitDiagnostics* diag = nullptr);

struct KrigingEstimate {
  Point location;
  double value = 0.0;
  double variance = 0.0;
};

// Ordinary kriging system shared by all targets of one (day, variable):
// the station matrix is factored once, each target is one back-substitution.
// Duplicate station locations are merged by averaging before factoring.
class KrigingSystem {
 public:
  KrigingSystem(std::vector<Point> stations, std::vector<double> values,
                VariogramModel model);

  KrigingEstimate predict(const Point& target) const;
  // Parallel over targets; identical values in any thread count.
  std::vector<KrigingEstimate> predict_many(const std::vector<Point>& targets) const;
  const std::vector<Point>& stations() const { return stations_; }

 private:
  std::vector<Point> stations_;
  std::vector<double> values_;
  VariogramModel model_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

std::vector<KrigingEstimate> ordinary_kriging(const std::vector<Point>& stations,
                                              const std::vector<double>& values,
                                              const VariogramModel& model,
                                              const std::vector<Point>& targets);

struct Grid {
  std::vector<Point> points;
  double spacing = 0.0;
  std::vector<int> region_of_point;          // canonical index, -1 outside
  std::vector<std::vector<int>> points_of_region;
};

// Lattice of cell centres anchored at the bounding-box min corner; each point
// is assigned by point-in-polygon with ties broken toward the smaller id.
Grid make_grid(const std::vector<RegionShape>& shapes, double spacing_km);

enum class ArealFlag { None, CentroidFallback };

struct ArealAverage {
  std::vector<double> value;      // per region
  std::vector<ArealFlag> flag;
};

// Unweighted mean over the grid points of each region; regions without any
// grid point take the supplied centroid estimate and are flagged.
ArealAverage areal_average(const std::vector<double>& point_values, const Grid& grid,
                           const std::vector<double>& centroid_values);

struct KrigeOptions {
  double spacing_km = 5.0;
  double buffer_km = 100.0;
  int n_bins = 15;
  int min_stations = 5;  // fewer reporting stations flags the day
  std::vector<VariogramFamily> families = {VariogramFamily::Exponential,
                                           VariogramFamily::Spherical,
                                           VariogramFamily::Gaussian};
};

struct CovariateRow {
  std::string region_id;
  int day = 0;
  EnvVariable variable = EnvVariable::SolarExposure;
  double value = 0.0;
  std::string flag;  // ';'-joined tokens, empty when clean
};

struct KrigeResult {
  std::vector<CovariateRow> rows;
  Warnings warnings;
};

// Full per-day, per-variable pipeline: variogram -> fit -> kriging -> areal
// averages. Day/variable tasks are independent.
KrigeResult krige_covariates(const std::vector<StationObservation>& stations,
                             const std::vector<RegionShape>& shapes,
                             const KrigeOptions& options);

void write_covariates_csv(const std::string& path, const std::vector<CovariateRow>& rows);
std::vector<CovariateRow> read_covariates_csv(const std::string& path);

}  // namespace riskmap
