#pragma once

#include <string>
#include <vector>

#include "riskmap/common.hpp"
#include "riskmap/spatial_graph.hpp"

namespace riskmap {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

using Ring = std::vector<Point>;          // closed implicitly (last != first ok)
using Polygon = std::vector<Ring>;        // outer ring first, then holes

struct RegionShape {
  std::string id;
  std::vector<Polygon> polygons;  // MultiPolygon support

  double area() const;
  Point centroid() const;  // area-weighted
  bool contains(const Point& p) const;  // boundary counts as inside
};

struct BoundingBox {
  double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;

  void expand(double margin);
  bool contains(const Point& p) const;
  double diagonal() const;
};

// GeoJSON FeatureCollection with an `id` property per feature; coordinates
// are planar km (projection is handled upstream, see README).
std::vector<RegionShape> read_region_shapes(const std::string& path);

BoundingBox shapes_bbox(const std::vector<RegionShape>& shapes);

enum class ContiguityMode { Queen, Rook };

// Optional helper: derive contiguity from shared polygon vertices
// (queen: any shared vertex, rook: at least two, i.e. a shared edge segment).
AdjacencyGraph adjacency_from_polygons(const RegionSet& regions,
                                       const std::vector<RegionShape>& shapes,
                                       ContiguityMode mode);

}  // namespace riskmap
