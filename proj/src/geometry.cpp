#include "riskmap/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include <json.hpp>

namespace riskmap {

namespace {

double ring_signed_area(const Ring& r) {
  double a = 0.0;
  const std::size_t n = r.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = r[i];
    const Point& q = r[(i + 1) % n];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

Point ring_centroid(const Ring& r, double signed_area) {
  Point c;
  const std::size_t n = r.size();
  if (std::abs(signed_area) < 1e-300) {  // degenerate: average vertices
    for (const Point& p : r) {
      c.x += p.x;
      c.y += p.y;
    }
    c.x /= double(n);
    c.y /= double(n);
    return c;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = r[i];
    const Point& q = r[(i + 1) % n];
    const double cross = p.x * q.y - q.x * p.y;
    c.x += (p.x + q.x) * cross;
    c.y += (p.y + q.y) * cross;
  }
  c.x /= 6.0 * signed_area;
  c.y /= 6.0 * signed_area;
  return c;
}

bool on_segment(const Point& p, const Point& a, const Point& b) {
  const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
  const double len2 = (b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y);
  if (cross * cross > 1e-18 * std::max(len2, 1e-300)) return false;
  const double dot = (p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y);
  return dot >= -1e-12 && dot <= len2 + 1e-12;
}

// Even-odd ray cast; boundary handled by the caller.
bool ring_contains(const Ring& r, const Point& p) {
  bool inside = false;
  const std::size_t n = r.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = r[i];
    const Point& b = r[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_int = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x_int) inside = !inside;
    }
  }
  return inside;
}

Ring parse_ring(const nlohmann::json& coords, const std::string& path) {
  Ring r;
  for (const auto& pt : coords) {
    if (!pt.is_array() || pt.size() < 2)
      throw Error("malformed coordinate in " + path);
    r.push_back({pt[0].get<double>(), pt[1].get<double>()});
  }
  if (r.size() >= 2 && std::abs(r.front().x - r.back().x) < 1e-12 &&
      std::abs(r.front().y - r.back().y) < 1e-12)
    r.pop_back();  // drop the GeoJSON closing vertex
  if (r.size() < 3) throw Error("degenerate ring (<3 vertices) in " + path);
  return r;
}

Polygon parse_polygon(const nlohmann::json& coords, const std::string& path) {
  Polygon poly;
  for (const auto& ring : coords) poly.push_back(parse_ring(ring, path));
  if (poly.empty()) throw Error("empty polygon in " + path);
  return poly;
}

}  // namespace

double RegionShape::area() const {
  double a = 0.0;
  for (const Polygon& poly : polygons) {
    if (poly.empty()) continue;
    a += std::abs(ring_signed_area(poly[0]));
    for (std::size_t h = 1; h < poly.size(); ++h)
      a -= std::abs(ring_signed_area(poly[h]));
  }
  return a;
}

Point RegionShape::centroid() const {
  double total = 0.0;
  Point c;
  for (const Polygon& poly : polygons) {
    if (poly.empty()) continue;
    const double a = std::abs(ring_signed_area(poly[0]));
    const Point pc = ring_centroid(poly[0], ring_signed_area(poly[0]));
    c.x += a * pc.x;
    c.y += a * pc.y;
    total += a;
  }
  if (total < 1e-300) throw Error("degenerate polygon for region '" + id + "'");
  c.x /= total;
  c.y /= total;
  return c;
}

bool RegionShape::contains(const Point& p) const {
  for (const Polygon& poly : polygons) {
    for (const Ring& ring : poly) {
      const std::size_t n = ring.size();
      for (std::size_t i = 0, j = n - 1; i < n; j = i++)
        if (on_segment(p, ring[j], ring[i])) return true;  // boundary is inside
    }
    if (poly.empty()) continue;
    if (!ring_contains(poly[0], p)) continue;
    bool in_hole = false;
    for (std::size_t h = 1; h < poly.size(); ++h)
      if (ring_contains(poly[h], p)) in_hole = true;
    if (!in_hole) return true;
  }
  return false;
}

void BoundingBox::expand(double margin) {
  min_x -= margin;
  min_y -= margin;
  max_x += margin;
  max_y += margin;
}

bool BoundingBox::contains(const Point& p) const {
  return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
}

double BoundingBox::diagonal() const {
  return std::hypot(max_x - min_x, max_y - min_y);
}

std::vector<RegionShape> read_region_shapes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection")
    throw Error(path + ": expected a GeoJSON FeatureCollection");
  std::vector<RegionShape> shapes;
  for (const auto& feat : doc.at("features")) {
    RegionShape s;
    const auto& props = feat.at("properties");
    if (!props.contains("id")) throw Error(path + ": feature without 'id' property");
    s.id = props.at("id").is_string() ? props.at("id").get<std::string>()
                                      : props.at("id").dump();
    const auto& geom = feat.at("geometry");
    const std::string type = geom.value("type", "");
    if (type == "Polygon") {
      s.polygons.push_back(parse_polygon(geom.at("coordinates"), path));
    } else if (type == "MultiPolygon") {
      for (const auto& poly : geom.at("coordinates"))
        s.polygons.push_back(parse_polygon(poly, path));
    } else {
      throw Error(path + ": unsupported geometry type '" + type + "'");
    }
    shapes.push_back(std::move(s));
  }
  if (shapes.empty()) throw Error(path + ": no features");
  std::sort(shapes.begin(), shapes.end(),
            [](const RegionShape& a, const RegionShape& b) { return a.id < b.id; });
  return shapes;
}

BoundingBox shapes_bbox(const std::vector<RegionShape>& shapes) {
  BoundingBox b;
  b.min_x = b.min_y = std::numeric_limits<double>::infinity();
  b.max_x = b.max_y = -std::numeric_limits<double>::infinity();
  for (const auto& s : shapes)
    for (const auto& poly : s.polygons)
      for (const auto& ring : poly)
        for (const auto& p : ring) {
          b.min_x = std::min(b.min_x, p.x);
          b.min_y = std::min(b.min_y, p.y);
          b.max_x = std::max(b.max_x, p.x);
          b.max_y = std::max(b.max_y, p.y);
        }
  if (!std::isfinite(b.min_x)) throw Error("empty shape set");
  return b;
}

AdjacencyGraph adjacency_from_polygons(const RegionSet& regions,
                                       const std::vector<RegionShape>& shapes,
                                       ContiguityMode mode) {
  // Vertices snapped to a fine lattice so exactly-shared corners compare equal.
  const auto key = [](const Point& p) {
    return std::make_pair(std::llround(p.x * 1e6), std::llround(p.y * 1e6));
  };
  std::map<std::pair<long long, long long>, std::set<int>> owners;
  for (const auto& shape : shapes) {
    const int idx = regions.index_of(shape.id);
    if (idx < 0) throw Error("polygon id '" + shape.id + "' not in region set");
    for (const auto& poly : shape.polygons)
      for (const auto& ring : poly)
        for (const auto& p : ring) owners[key(p)].insert(idx);
  }
  std::map<std::pair<int, int>, int> shared;
  for (const auto& [_, regs] : owners)
    for (auto a = regs.begin(); a != regs.end(); ++a)
      for (auto b = std::next(a); b != regs.end(); ++b)
        ++shared[{*a, *b}];
  const int needed = mode == ContiguityMode::Queen ? 1 : 2;
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& [edge, count] : shared)
    if (count >= needed)
      pairs.emplace_back(regions.regions[edge.first].id,
                         regions.regions[edge.second].id);
  return build_adjacency_from_pairs(regions, pairs);
}

}  // namespace riskmap
