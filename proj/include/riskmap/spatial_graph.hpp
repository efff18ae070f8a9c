#pragma once

#include <Eigen/Sparse>
#include <string>
#include <utility>
#include <vector>

#include "riskmap/common.hpp"
#include "riskmap/structures.hpp"

namespace riskmap {

struct Region {
  std::string id;
  std::string name;
  double population = 0.0;
  double area_km2 = 0.0;  // 0 when unknown; needed only for density
};

// Areal units in canonical order (lexicographic by id, fixed at ingestion).
// All matrices in the project use this ordering.
struct RegionSet {
  std::vector<Region> regions;

  int size() const { return static_cast<int>(regions.size()); }
  int index_of(const std::string& id) const;  // -1 if absent
  double total_population() const;
};

// Contiguity structure over the canonical indices.
struct AdjacencyGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // i < j, sorted, unique
  std::vector<int> neighbor_counts;
  Warnings warnings;  // isolated regions etc.

  std::vector<int> component_of() const;  // component label per region
  int n_components() const;
};

// Row-standardised neighbourhood weights, w_ij = 1/N_i on edges.
struct WeightsMatrix {
  Eigen::SparseMatrix<double> w;
};

RegionSet read_regions_csv(const std::string& path);

// Neighbor file: CSV `id_a,id_b`, one undirected edge per row. Duplicate
// edges are deduplicated silently; unknown ids and self-loops are errors.
AdjacencyGraph build_adjacency(const RegionSet& regions, const std::string& neighbor_csv);
AdjacencyGraph build_adjacency_from_pairs(const RegionSet& regions,
                                          const std::vector<std::pair<std::string, std::string>>& pairs);

WeightsMatrix row_standardize(const AdjacencyGraph& graph);

// ICAR precision structure R_s = diag(N) - A. Rank is n minus the number of
// connected components; the null space is spanned by the (normalised)
// component indicator vectors.
StructureMatrix icar_structure(const AdjacencyGraph& graph);

}  // namespace riskmap
