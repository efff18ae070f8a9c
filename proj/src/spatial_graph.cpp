#include "riskmap/spatial_graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "riskmap/csv.hpp"

namespace riskmap {

int RegionSet::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < regions.size(); ++i)
    if (regions[i].id == id) return static_cast<int>(i);
  return -1;
}

double RegionSet::total_population() const {
  double total = 0.0;
  for (const auto& r : regions) total += r.population;
  return total;
}

RegionSet read_regions_csv(const std::string& path) {
  const auto t = csv::read_csv(path);
  const int c_id = t.require_column("id", path);
  const int c_name = t.require_column("name", path);
  const int c_pop = t.require_column("population", path);
  const int c_area = t.column("area_km2");  // optional, used for density

  RegionSet rs;
  std::set<std::string> seen;
  for (const auto& row : t.rows) {
    Region r;
    r.id = row[c_id];
    r.name = row[c_name];
    r.population = parse_double(row[c_pop], path);
    if (c_area >= 0) r.area_km2 = parse_double(row[c_area], path);
    if (r.population <= 0.0)
      throw Error("region '" + r.id + "' has non-positive population");
    if (!seen.insert(r.id).second) throw Error("duplicate region id '" + r.id + "'");
    rs.regions.push_back(std::move(r));
  }
  if (rs.regions.empty()) throw Error("no regions in " + path);
  std::sort(rs.regions.begin(), rs.regions.end(),
            [](const Region& a, const Region& b) { return a.id < b.id; });
  return rs;
}

AdjacencyGraph build_adjacency_from_pairs(
    const RegionSet& regions,
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  AdjacencyGraph g;
  g.n = regions.size();
  std::set<std::pair<int, int>> edge_set;
  for (const auto& [ida, idb] : pairs) {
    const int a = regions.index_of(ida);
    const int b = regions.index_of(idb);
    if (a < 0) throw Error("unknown region id '" + ida + "' in neighbor list");
    if (b < 0) throw Error("unknown region id '" + idb + "' in neighbor list");
    if (a == b) throw Error("self-loop on region '" + ida + "' in neighbor list");
    edge_set.emplace(std::min(a, b), std::max(a, b));
  }
  g.edges.assign(edge_set.begin(), edge_set.end());
  g.neighbor_counts.assign(g.n, 0);
  for (const auto& [a, b] : g.edges) {
    ++g.neighbor_counts[a];
    ++g.neighbor_counts[b];
  }
  for (int i = 0; i < g.n; ++i)
    if (g.neighbor_counts[i] == 0)
      g.warnings.push_back("region '" + regions.regions[i].id +
                           "' has no neighbours (isolated)");
  return g;
}

AdjacencyGraph build_adjacency(const RegionSet& regions, const std::string& neighbor_csv) {
  const auto t = csv::read_csv(neighbor_csv);
  const int ca = t.require_column("id_a", neighbor_csv);
  const int cb = t.require_column("id_b", neighbor_csv);
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(t.rows.size());
  for (const auto& row : t.rows) pairs.emplace_back(row[ca], row[cb]);
  return build_adjacency_from_pairs(regions, pairs);
}

std::vector<int> AdjacencyGraph::component_of() const {
  std::vector<std::vector<int>> adj(n);
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> comp(n, -1);
  int label = 0;
  std::vector<int> stack;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    stack.push_back(s);
    comp[s] = label;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : adj[v])
        if (comp[w] < 0) {
          comp[w] = label;
          stack.push_back(w);
        }
    }
    ++label;
  }
  return comp;
}

int AdjacencyGraph::n_components() const {
  const auto comp = component_of();
  return comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
}

WeightsMatrix row_standardize(const AdjacencyGraph& graph) {
  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> trips;
  trips.reserve(graph.edges.size() * 2);
  for (const auto& [a, b] : graph.edges) {
    trips.emplace_back(a, b, 1.0 / graph.neighbor_counts[a]);
    trips.emplace_back(b, a, 1.0 / graph.neighbor_counts[b]);
  }
  WeightsMatrix wm;
  wm.w = Eigen::SparseMatrix<double>(graph.n, graph.n);
  wm.w.setFromTriplets(trips.begin(), trips.end());
  return wm;
}

StructureMatrix icar_structure(const AdjacencyGraph& graph) {
  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> trips;
  trips.reserve(graph.edges.size() * 2 + graph.n);
  for (int i = 0; i < graph.n; ++i)
    if (graph.neighbor_counts[i] > 0)
      trips.emplace_back(i, i, double(graph.neighbor_counts[i]));
  for (const auto& [a, b] : graph.edges) {
    trips.emplace_back(a, b, -1.0);
    trips.emplace_back(b, a, -1.0);
  }

  StructureMatrix s;
  s.dim = graph.n;
  s.entries = Eigen::SparseMatrix<double>(graph.n, graph.n);
  s.entries.setFromTriplets(trips.begin(), trips.end());

  const auto comp = graph.component_of();
  const int ncomp = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
  s.rank_deficiency = ncomp;
  s.null_basis = Eigen::MatrixXd::Zero(graph.n, ncomp);
  std::vector<int> sizes(ncomp, 0);
  for (int c : comp) ++sizes[c];
  for (int i = 0; i < graph.n; ++i)
    s.null_basis(i, comp[i]) = 1.0 / std::sqrt(double(sizes[comp[i]]));
  return s;
}

}  // namespace riskmap
