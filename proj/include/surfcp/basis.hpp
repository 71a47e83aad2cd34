#pragma once

// One-dimensional basis systems on [0, 1], their tensor products and the
// least-squares projection of a dataset onto them.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "surfcp/grid.hpp"

namespace surfcp {

enum class BasisKind { bspline_cubic, fourier };

const char* to_string(BasisKind kind) noexcept;
BasisKind parse_basis_kind(const std::string& name);

/// Basis system on [0, 1].
///
/// Cubic B-splines use an open uniform knot vector (boundary knots repeated
/// four times, n_basis - 4 equispaced interior knots). Fourier uses
/// {1, sqrt2 sin(2 pi k x), sqrt2 cos(2 pi k x)}, k = 1, 2, ..., which is
/// orthonormal on [0, 1]; an even n_basis ends on an unpaired sine.
class BasisSystem1D {
 public:
  BasisSystem1D(BasisKind kind, Index n_basis);

  BasisKind kind() const noexcept { return kind_; }
  Index size() const noexcept { return n_basis_; }

  /// Values of every basis function at x in [0, 1].
  Eigen::VectorXd evaluate(double x) const;
  /// points.size() x n_basis matrix of basis values.
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& points) const;

  friend bool operator==(const BasisSystem1D& a, const BasisSystem1D& b) {
    return a.kind_ == b.kind_ && a.n_basis_ == b.n_basis_;
  }

 private:
  BasisKind kind_;
  Index n_basis_;
  std::vector<double> knots_;
};

/// Products g_i(u) h_j(v), flattened row-major: k = i * K2 + j.
class TensorBasis {
 public:
  TensorBasis(BasisSystem1D basis_u, BasisSystem1D basis_v)
      : u_(std::move(basis_u)), v_(std::move(basis_v)) {}

  const BasisSystem1D& basis_u() const noexcept { return u_; }
  const BasisSystem1D& basis_v() const noexcept { return v_; }
  Index size() const noexcept { return u_.size() * v_.size(); }
  Index flat_index(Index i, Index j) const noexcept { return i * v_.size() + j; }

  double evaluate(Index k, double u, double v) const;

  friend bool operator==(const TensorBasis& a, const TensorBasis& b) {
    return a.u_ == b.u_ && a.v_ == b.v_;
  }

 private:
  BasisSystem1D u_;
  BasisSystem1D v_;
};

/// Coefficients of each frame on a tensor basis (one row per frame).
struct BasisExpansion {
  Eigen::MatrixXd coefficients;  // T x K
  TensorBasis basis;
};

/// N x K design matrix; column k is phi_k on the grid in row-major order.
/// The grid coordinates are interpreted on [0, 1].
Eigen::MatrixXd eval_basis(const TensorBasis& tb, const GridDomain& d);

/// Basis functions as surfaces (same content as eval_basis).
std::vector<Surface> basis_surfaces(const TensorBasis& tb, const GridDomain& d);

/// W = integral of phi phi^T by grid quadrature.
Eigen::MatrixXd gram_matrix(const TensorBasis& tb, const GridDomain& d);

/// Least-squares solver for a fixed evaluated basis, factored once.
class BasisProjector {
 public:
  BasisProjector(const TensorBasis& tb, const GridDomain& d);

  const TensorBasis& basis() const noexcept { return basis_; }
  const Eigen::MatrixXd& design() const noexcept { return design_; }

  /// Coefficients minimising the grid residual of `f`.
  Eigen::VectorXd coefficients(const Surface& f) const;
  /// Same for many flattened frames at once (one per column); returns K x n.
  Eigen::MatrixXd coefficients(const Eigen::MatrixXd& flat_columns) const;
  /// phi^T c on the grid.
  Surface synthesize(const Eigen::VectorXd& c) const;

 private:
  TensorBasis basis_;
  Index n1_;
  Index n2_;
  Eigen::MatrixXd design_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

/// Row t of the result fits frame t by least squares. Throws `singular` when
/// the evaluated basis does not have full column rank on the grid.
BasisExpansion project_onto_basis(const FtsDataset& ds, const TensorBasis& tb);

/// Frames phi^T c_t on the grid of `d`, one per coefficient row.
std::vector<Surface> synthesize(const BasisExpansion& be, const GridDomain& d);

}  // namespace surfcp
