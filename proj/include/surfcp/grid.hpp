#pragma once

// Domain geometry, Riemann quadrature on the unit-normalized rectangle and
// the dataset containers shared by every other module.
//
// Surfaces are N1 x N2 row-major matrices: row i is the u-coordinate u_i and
// column j is v_j, so the flat index of grid point (i, j) is i * N2 + j. Every
// matrix in the library that is indexed by grid points uses that order.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surfcp/errors.hpp"

namespace surfcp {

using Index = Eigen::Index;

template <typename Scalar>
using SurfaceT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Surface = SurfaceT<double>;
using MaskArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Rectangular evaluation grid. Quadrature weights are 1/N1 and 1/N2 whatever
/// the physical coordinates are; coordinates are kept for I/O and labels.
class GridDomain {
 public:
  GridDomain(Eigen::VectorXd u, Eigen::VectorXd v);

  /// Midpoint grid u_i = (i + 0.5) / n1 on the unit square.
  static GridDomain unit(Index n1, Index n2);

  Index n1() const noexcept { return u_.size(); }
  Index n2() const noexcept { return v_.size(); }
  Index size() const noexcept { return n1() * n2(); }
  double weight_u() const noexcept { return 1.0 / static_cast<double>(n1()); }
  double weight_v() const noexcept { return 1.0 / static_cast<double>(n2()); }
  /// Area element w1 * w2.
  double cell_weight() const noexcept { return weight_u() * weight_v(); }

  const Eigen::VectorXd& u() const noexcept { return u_; }
  const Eigen::VectorXd& v() const noexcept { return v_; }

  Index flat_index(Index i, Index j) const noexcept { return i * n2() + j; }

  bool same_shape(const GridDomain& other) const noexcept {
    return n1() == other.n1() && n2() == other.n2();
  }

 private:
  Eigen::VectorXd u_;
  Eigen::VectorXd v_;
};

/// Inside-domain indicator; true cells belong to the region of interest.
class Mask {
 public:
  explicit Mask(MaskArray inside);

  static Mask full(Index n1, Index n2) { return Mask(MaskArray::Constant(n1, n2, true)); }

  const MaskArray& inside() const noexcept { return inside_; }
  Index rows() const noexcept { return inside_.rows(); }
  Index cols() const noexcept { return inside_.cols(); }
  Index count() const noexcept { return inside_.count(); }
  bool operator()(Index i, Index j) const noexcept { return inside_(i, j); }

  friend bool operator==(const Mask& a, const Mask& b) {
    return a.inside_.rows() == b.inside_.rows() && a.inside_.cols() == b.inside_.cols() &&
           (a.inside_ == b.inside_).all();
  }

 private:
  MaskArray inside_;
};

/// Ordered sequence of surfaces sampled on a common grid.
struct FtsDataset {
  GridDomain domain;
  std::vector<Surface> frames;
  std::optional<Mask> mask;
  std::vector<std::string> timestamps;  // empty or one label per frame

  FtsDataset(GridDomain d, std::vector<Surface> f, std::optional<Mask> m = std::nullopt);

  Index length() const noexcept { return static_cast<Index>(frames.size()); }
  const Mask* mask_ptr() const noexcept { return mask ? &*mask : nullptr; }

  /// Throws if any frame or the mask disagrees with the domain shape or holds
  /// non-finite values.
  void validate() const;
};

namespace detail {
void check_shape(Index rows, Index cols, Index n1, Index n2, const char* op);
}

/// Copy of `f` with every cell outside the mask set to zero.
Surface apply_mask(const Surface& f, const Mask* mask);

/// Quadrature inner product w1 * w2 * sum_{ij in mask} f_ij g_ij.
template <typename DerivedF, typename DerivedG>
double inner_product(const Eigen::MatrixBase<DerivedF>& f, const Eigen::MatrixBase<DerivedG>& g,
                     const GridDomain& d, const Mask* mask = nullptr) {
  detail::check_shape(f.rows(), f.cols(), d.n1(), d.n2(), "inner_product");
  detail::check_shape(g.rows(), g.cols(), d.n1(), d.n2(), "inner_product");
  double sum = 0.0;
  if (mask == nullptr) {
    sum = f.cwiseProduct(g).sum();
  } else {
    detail::check_shape(mask->rows(), mask->cols(), d.n1(), d.n2(), "inner_product");
    sum = mask->inside().select(f.cwiseProduct(g).array(), 0.0).sum();
  }
  return d.cell_weight() * sum;
}

template <typename Derived>
double squared_norm(const Eigen::MatrixBase<Derived>& f, const GridDomain& d,
                    const Mask* mask = nullptr) {
  return inner_product(f, f, d, mask);
}

/// (1 / (N1 N2)) * sum_ij (f_ij - g_ij)^2 over the whole rectangle.
template <typename DerivedF, typename DerivedG>
double mse(const Eigen::MatrixBase<DerivedF>& f, const Eigen::MatrixBase<DerivedG>& g) {
  if (f.rows() != g.rows() || f.cols() != g.cols()) {
    fail(ErrorKind::dimension, "grid", "mse", "surface shapes differ");
  }
  return (f - g).squaredNorm() / static_cast<double>(f.size());
}

/// Integral of f over the mask (or the whole rectangle).
double integral(const Surface& f, const GridDomain& d, const Mask* mask = nullptr);

/// Entrywise average of the selected frames.
Surface pointwise_mean(const FtsDataset& ds, std::span<const Index> indices);

/// Entrywise sample standard deviation (divisor n - 1); zero off the mask.
Surface pointwise_std(const FtsDataset& ds, std::span<const Index> indices);

/// Frames stacked as rows of an n x N matrix in row-major grid order.
Eigen::MatrixXd stack_frames(const FtsDataset& ds, std::span<const Index> indices);

/// Row-major flattening of a surface and its inverse.
inline Eigen::Map<const Eigen::VectorXd> flatten(const Surface& s) {
  return {s.data(), s.size()};
}
Surface unflatten(const Eigen::Ref<const Eigen::VectorXd>& flat, Index n1, Index n2);

}  // namespace surfcp
