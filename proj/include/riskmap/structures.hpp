#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "riskmap/common.hpp"

namespace riskmap {

// Relative eigenvalue threshold below which a mode counts as null.
inline constexpr double kRankTol = 1e-8;

// Symmetric positive-semidefinite precision structure of an intrinsic
// Gaussian effect, together with its declared nullity and an orthonormal
// basis of the null space.
struct StructureMatrix {
  int dim = 0;
  Eigen::SparseMatrix<double> entries;
  int rank_deficiency = 0;
  Eigen::MatrixXd null_basis;  // dim x rank_deficiency, orthonormal columns
  // Full spectrum when the matrix is a Kronecker product of verified
  // factors; used to rank-check without densifying the product.
  std::vector<double> known_eigenvalues;

  int rank() const { return dim - rank_deficiency; }
};

// Linear constraints A x = 0 making the intrinsic density proper on the
// constrained subspace. Rows are orthonormal (taken from a null basis), so
// the projector is x - A^T (A x).
struct ConstraintSet {
  Eigen::MatrixXd a;  // k x dim

  int count() const { return static_cast<int>(a.rows()); }
  void project(Eigen::VectorXd& x) const;
  double max_violation(const Eigen::VectorXd& x) const;
};

enum class InteractionKind { None, I, II, III, IV };

std::string to_string(InteractionKind k);
InteractionKind interaction_from_string(const std::string& s);

// Second-order random walk precision D^T D with D the (T-2) x T second
// difference operator; null space is {constant, linear-in-t}.
StructureMatrix rw2_structure(int t_units);

// Exchangeable Gaussian effect: identity, full rank.
StructureMatrix iid_structure(int m);

// Space-time interaction precision: Kronecker product of the spatial and
// temporal factors selected by `kind` (identity or the structured matrix).
// Layout is time-fastest: position of (region i, unit t) is i*T + t.
StructureMatrix interaction_structure(InteractionKind kind,
                                      const StructureMatrix& spatial,
                                      const StructureMatrix& temporal);

ConstraintSet constraint_set(const StructureMatrix& structure);

// Checks symmetry, R * null_basis ~ 0, and declared vs numerical rank
// (dense eigensolver up to `dense_limit`, known factor spectrum otherwise).
// Throws Error on any mismatch.
void verify_structure(const StructureMatrix& s, const std::string& label,
                      int dense_limit = 1024);

// Debug export in Matrix Market coordinate format (symmetric, lower part).
void write_matrix_market(const std::string& path, const Eigen::SparseMatrix<double>& m);

// How a random-effect vector maps onto panel cells.
enum class EffectLayout { PerRegion, PerTimeUnit, SpaceTime };

// One random-effect term of a model: structure, precision prior, constraints
// and the (region, time-unit) -> position map.
struct RandomEffectBlock {
  std::string label;  // "u", "v", "gamma", "phi", "delta"
  StructureMatrix structure;
  double prior_shape = 1.0;
  double prior_rate = 5e-5;
  ConstraintSet constraints;
  EffectLayout layout = EffectLayout::PerRegion;
  int n_regions = 0;
  int n_units = 0;

  int dim() const { return structure.dim; }
  int position(int region, int unit) const;
};

}  // namespace riskmap
