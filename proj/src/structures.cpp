#include "riskmap/structures.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>

namespace riskmap {

namespace {

// Eigen decomposition of a factor, with the identity short-circuited.
struct FactorEigen {
  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;
  int n_zero = 0;
};

FactorEigen factor_eigen(const StructureMatrix& s, bool use_structured) {
  FactorEigen fe;
  if (!use_structured) {
    fe.vectors = Eigen::MatrixXd::Identity(s.dim, s.dim);
    fe.values = Eigen::VectorXd::Ones(s.dim);
    fe.n_zero = 0;
    return fe;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(s.entries));
  if (es.info() != Eigen::Success) throw Error("eigendecomposition failed");
  fe.vectors = es.eigenvectors();
  fe.values = es.eigenvalues();
  const double scale = std::max(fe.values.cwiseAbs().maxCoeff(), 1e-300);
  for (int i = 0; i < fe.values.size(); ++i)
    if (fe.values[i] <= kRankTol * scale) ++fe.n_zero;
  if (fe.n_zero != s.rank_deficiency)
    throw Error("interaction factor '" + std::to_string(s.dim) +
                "-dim' numerical nullity " + std::to_string(fe.n_zero) +
                " != declared " + std::to_string(s.rank_deficiency));
  return fe;
}

Eigen::SparseMatrix<double> sparse_kron(const Eigen::SparseMatrix<double>& a,
                                        const Eigen::SparseMatrix<double>& b) {
  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(a.nonZeros()) *
                static_cast<std::size_t>(b.nonZeros()));
  for (int ka = 0; ka < a.outerSize(); ++ka)
    for (Eigen::SparseMatrix<double>::InnerIterator ia(a, ka); ia; ++ia)
      for (int kb = 0; kb < b.outerSize(); ++kb)
        for (Eigen::SparseMatrix<double>::InnerIterator ib(b, kb); ib; ++ib)
          trips.emplace_back(ia.row() * b.rows() + ib.row(),
                             ia.col() * b.cols() + ib.col(), ia.value() * ib.value());
  Eigen::SparseMatrix<double> out(a.rows() * b.rows(), a.cols() * b.cols());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

Eigen::SparseMatrix<double> sparse_identity(int n) {
  Eigen::SparseMatrix<double> id(n, n);
  id.setIdentity();
  return id;
}

}  // namespace

void ConstraintSet::project(Eigen::VectorXd& x) const {
  if (a.rows() == 0) return;
  x.noalias() -= a.transpose() * (a * x);
}

double ConstraintSet::max_violation(const Eigen::VectorXd& x) const {
  if (a.rows() == 0) return 0.0;
  return (a * x).cwiseAbs().maxCoeff();
}

std::string to_string(InteractionKind k) {
  switch (k) {
    case InteractionKind::None: return "none";
    case InteractionKind::I: return "I";
    case InteractionKind::II: return "II";
    case InteractionKind::III: return "III";
    case InteractionKind::IV: return "IV";
  }
  return "?";
}

InteractionKind interaction_from_string(const std::string& s) {
  if (s == "none") return InteractionKind::None;
  if (s == "I") return InteractionKind::I;
  if (s == "II") return InteractionKind::II;
  if (s == "III") return InteractionKind::III;
  if (s == "IV") return InteractionKind::IV;
  throw Error("unknown interaction kind '" + s + "'");
}

StructureMatrix rw2_structure(int t_units) {
  if (t_units < 3)
    throw Error("rw2_structure needs at least 3 time units, got " +
                std::to_string(t_units));
  const int T = t_units;
  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> trips;
  Eigen::SparseMatrix<double> d(T - 2, T);
  for (int r = 0; r < T - 2; ++r) {
    trips.emplace_back(r, r, 1.0);
    trips.emplace_back(r, r + 1, -2.0);
    trips.emplace_back(r, r + 2, 1.0);
  }
  d.setFromTriplets(trips.begin(), trips.end());

  StructureMatrix s;
  s.dim = T;
  s.entries = Eigen::SparseMatrix<double>(d.transpose() * d);
  s.rank_deficiency = 2;
  // Orthonormalised {1, t}.
  Eigen::MatrixXd basis(T, 2);
  basis.col(0).setConstant(1.0 / std::sqrt(double(T)));
  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(T, 1.0, double(T));
  t.array() -= t.mean();
  basis.col(1) = t / t.norm();
  s.null_basis = basis;
  return s;
}

StructureMatrix iid_structure(int m) {
  if (m < 1) throw Error("iid_structure needs m >= 1");
  StructureMatrix s;
  s.dim = m;
  s.entries = sparse_identity(m);
  s.rank_deficiency = 0;
  s.null_basis = Eigen::MatrixXd(m, 0);
  return s;
}

StructureMatrix interaction_structure(InteractionKind kind,
                                      const StructureMatrix& spatial,
                                      const StructureMatrix& temporal) {
  if (kind == InteractionKind::None)
    throw Error("interaction_structure called with kind none");
  const int n = spatial.dim;
  const int T = temporal.dim;
  const bool structured_space =
      kind == InteractionKind::III || kind == InteractionKind::IV;
  const bool structured_time =
      kind == InteractionKind::II || kind == InteractionKind::IV;

  if (kind == InteractionKind::I) {
    // Identity x identity is exactly the exchangeable structure.
    return iid_structure(n * T);
  }

  StructureMatrix s;
  s.dim = n * T;
  const Eigen::SparseMatrix<double> left =
      structured_space ? spatial.entries : sparse_identity(n);
  const Eigen::SparseMatrix<double> right =
      structured_time ? temporal.entries : sparse_identity(T);
  s.entries = sparse_kron(left, right);

  const int rank_s = structured_space ? spatial.rank() : n;
  const int rank_t = structured_time ? temporal.rank() : T;
  s.rank_deficiency = n * T - rank_s * rank_t;

  // Null modes of A (x) B are v_i (x) w_j with lambda_i * mu_j = 0; the
  // factor eigenbases give an orthonormal basis directly.
  FactorEigen fs = factor_eigen(spatial, structured_space);
  FactorEigen ft = factor_eigen(temporal, structured_time);
  s.null_basis = Eigen::MatrixXd(s.dim, s.rank_deficiency);
  s.known_eigenvalues.reserve(static_cast<std::size_t>(s.dim));
  int col = 0;
  for (int i = 0; i < n; ++i) {
    const bool zi = i < fs.n_zero;  // eigenvalues ascending
    for (int j = 0; j < T; ++j) {
      const bool zj = j < ft.n_zero;
      s.known_eigenvalues.push_back(fs.values[i] * ft.values[j]);
      if (zi || zj) {
        if (col >= s.rank_deficiency)
          throw Error("interaction " + to_string(kind) +
                      ": null mode count exceeds declared nullity");
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < T; ++b)
            s.null_basis(a * T + b, col) = fs.vectors(a, i) * ft.vectors(b, j);
        ++col;
      }
    }
  }
  if (col != s.rank_deficiency)
    throw Error("interaction " + to_string(kind) + ": declared nullity " +
                std::to_string(s.rank_deficiency) + " but found " +
                std::to_string(col) + " null modes");
  return s;
}

ConstraintSet constraint_set(const StructureMatrix& structure) {
  ConstraintSet c;
  c.a = structure.null_basis.transpose();
  return c;
}

void verify_structure(const StructureMatrix& s, const std::string& label,
                      int dense_limit) {
  if (s.entries.rows() != s.dim || s.entries.cols() != s.dim)
    throw Error(label + ": dimension mismatch");
  const Eigen::SparseMatrix<double> asym =
      Eigen::SparseMatrix<double>(s.entries - Eigen::SparseMatrix<double>(
                                                  s.entries.transpose()));
  double asym_max = 0.0;
  for (int k = 0; k < asym.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(asym, k); it; ++it)
      asym_max = std::max(asym_max, std::abs(it.value()));
  double norm = 0.0;
  for (int k = 0; k < s.entries.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(s.entries, k); it; ++it)
      norm = std::max(norm, std::abs(it.value()));
  norm = std::max(norm, 1e-300);
  if (asym_max > 1e-12 * norm) throw Error(label + ": not symmetric");

  if (s.null_basis.cols() != s.rank_deficiency)
    throw Error(label + ": null basis has " + std::to_string(s.null_basis.cols()) +
                " columns, declared nullity " + std::to_string(s.rank_deficiency));
  if (s.rank_deficiency > 0) {
    const double viol = (s.entries * s.null_basis).cwiseAbs().maxCoeff();
    if (viol > 1e-8 * norm)
      throw Error(label + ": R * null_basis deviates from zero by " +
                  std::to_string(viol));
  }

  // Numerical rank: dense spectrum when affordable, stored factor spectrum
  // for Kronecker products.
  std::vector<double> eig;
  if (!s.known_eigenvalues.empty()) {
    eig = s.known_eigenvalues;
  } else if (s.dim <= dense_limit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(s.entries),
                                                      Eigen::EigenvaluesOnly);
    eig.assign(es.eigenvalues().data(), es.eigenvalues().data() + s.dim);
  } else {
    return;  // null-product check above is the only affordable test
  }
  double emax = 0.0;
  for (double e : eig) emax = std::max(emax, std::abs(e));
  emax = std::max(emax, 1e-300);
  int nzero = 0;
  for (double e : eig) {
    if (e < -kRankTol * emax) throw Error(label + ": negative eigenvalue " +
                                          std::to_string(e));
    if (e <= kRankTol * emax) ++nzero;
  }
  if (nzero != s.rank_deficiency)
    throw Error(label + ": numerical nullity " + std::to_string(nzero) +
                " != declared " + std::to_string(s.rank_deficiency));
}

void write_matrix_market(const std::string& path,
                         const Eigen::SparseMatrix<double>& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  std::vector<std::string> lines;
  long nnz = 0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it)
      if (it.row() >= it.col()) ++nnz;
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << m.rows() << " " << m.cols() << " " << nnz << "\n";
  for (int k = 0; k < m.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it)
      if (it.row() >= it.col())
        out << (it.row() + 1) << " " << (it.col() + 1) << " "
            << format_full(it.value()) << "\n";
  if (!out) throw Error("write failed for " + path);
}

int RandomEffectBlock::position(int region, int unit) const {
  switch (layout) {
    case EffectLayout::PerRegion: return region;
    case EffectLayout::PerTimeUnit: return unit;
    case EffectLayout::SpaceTime: return region * n_units + unit;
  }
  return -1;
}

}  // namespace riskmap
