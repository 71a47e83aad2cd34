#pragma once

// Two-dimensional functional PCA, by grid discretization (with a snapshot
// solver for T < N) and by tensor basis expansion.

#include <Eigen/Dense>

#include <span>

#include "surfcp/basis.hpp"
#include "surfcp/grid.hpp"

namespace surfcp {

enum class FpcaMethod { discretized, basis };

/// How many components to keep: a fixed count, or the smallest M whose
/// cumulative share of variance reaches `threshold`.
struct ComponentSelector {
  enum class Kind { fixed, variance };
  Kind kind = Kind::variance;
  Index count = 0;
  double threshold = 0.8;

  static ComponentSelector fixed(Index m) { return {Kind::fixed, m, 0.0}; }
  static ComponentSelector variance(double threshold) { return {Kind::variance, 0, threshold}; }
  static ComponentSelector all() { return variance(1.0); }
};

/// Which eigenproblem the discretized FPCA solves. `automatic` picks the
/// T x T snapshot problem whenever there are fewer frames than grid points.
enum class EigenPath { automatic, snapshot, direct };

struct FpcaResult {
  Eigen::VectorXd eigenvalues;      // M retained, non-increasing
  Eigen::VectorXd all_eigenvalues;  // every positive eigenvalue found
  Eigen::MatrixXd eigenfunctions;   // N x M, row-major grid order
  Eigen::MatrixXd scores;           // frames x M
  FpcaMethod method = FpcaMethod::discretized;
  Index n1 = 0;
  Index n2 = 0;

  Index size() const noexcept { return eigenvalues.size(); }
  Surface eigenfunction(Index j) const { return unflatten(eigenfunctions.col(j), n1, n2); }
};

/// (1/n) Y^T Y over the selected frames, which the caller has centered.
Eigen::MatrixXd covariance_matrix(const FtsDataset& ds, std::span<const Index> indices);

/// Smallest M with cumulative variance share >= threshold (inclusive).
Index select_num_components(const Eigen::VectorXd& eigenvalues, double threshold);

/// FPCA of centered frames given as rows of an n x N matrix. Cells outside
/// any mask are expected to be zero already.
FpcaResult fpca_discretized(const Eigen::MatrixXd& centered_rows, const GridDomain& d,
                            const ComponentSelector& selector,
                            EigenPath path = EigenPath::automatic);

/// Same, reading the selected (centered) frames of a dataset.
FpcaResult fpca_discretized(const FtsDataset& ds, std::span<const Index> indices,
                            const ComponentSelector& selector,
                            EigenPath path = EigenPath::automatic);

/// FPCA from centered basis coefficients: eigenpairs of (1/T) C^T C W solved
/// through the symmetric form W^1/2 (1/T) C^T C W^1/2. Eigenfunctions are
/// phi^T b evaluated on `d` and normalized under the grid inner product.
FpcaResult fpca_basis(const BasisExpansion& be, const Eigen::MatrixXd& w, const GridDomain& d,
                      const ComponentSelector& selector);

/// Scores <f, xi_j> by grid quadrature.
Eigen::VectorXd project_scores(const Surface& f, const FpcaResult& res, const GridDomain& d);

/// Flip signs so the largest-magnitude entry of each column is positive.
void normalize_signs(Eigen::MatrixXd& columns);

}  // namespace surfcp
