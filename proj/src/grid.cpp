#include "surfcp/grid.hpp"

#include <cmath>
#include <string>

namespace surfcp {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::argument: return "argument";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::data: return "data";
    case ErrorKind::io: return "io";
    case ErrorKind::singular: return "singular";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::numerical: return "numerical";
  }
  return "unknown";
}

namespace {

void check_axis(const Eigen::VectorXd& axis, const char* name) {
  if (axis.size() < 1) {
    fail(ErrorKind::argument, "grid", "GridDomain", std::string("axis ") + name + " is empty");
  }
  for (Index k = 0; k < axis.size(); ++k) {
    if (!std::isfinite(axis[k])) {
      fail(ErrorKind::argument, "grid", "GridDomain", std::string("non-finite coordinate on ") + name);
    }
    if (k > 0 && !(axis[k] > axis[k - 1])) {
      fail(ErrorKind::argument, "grid", "GridDomain",
           std::string("coordinates on ") + name + " must be strictly increasing");
    }
  }
}

void check_indices(const FtsDataset& ds, std::span<const Index> indices, const char* op) {
  for (Index t : indices) {
    if (t < 0 || t >= ds.length()) {
      fail(ErrorKind::argument, "grid", op, "frame index " + std::to_string(t) + " out of range");
    }
  }
}

}  // namespace

namespace detail {
void check_shape(Index rows, Index cols, Index n1, Index n2, const char* op) {
  if (rows != n1 || cols != n2) {
    fail(ErrorKind::dimension, "grid", op,
         "expected " + std::to_string(n1) + "x" + std::to_string(n2) + " grid, got " +
             std::to_string(rows) + "x" + std::to_string(cols));
  }
}
}  // namespace detail

GridDomain::GridDomain(Eigen::VectorXd u, Eigen::VectorXd v) : u_(std::move(u)), v_(std::move(v)) {
  check_axis(u_, "u");
  check_axis(v_, "v");
}

GridDomain GridDomain::unit(Index n1, Index n2) {
  if (n1 < 1 || n2 < 1) {
    fail(ErrorKind::argument, "grid", "GridDomain", "grid needs at least 1 point per axis");
  }
  auto midpoints = [](Index n) {
    Eigen::VectorXd x(n);
    for (Index k = 0; k < n; ++k) x[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    return x;
  };
  return GridDomain(midpoints(n1), midpoints(n2));
}

Mask::Mask(MaskArray inside) : inside_(std::move(inside)) {
  if (inside_.size() == 0 || !inside_.any()) {
    fail(ErrorKind::argument, "grid", "Mask", "mask must contain at least one inside cell");
  }
}

FtsDataset::FtsDataset(GridDomain d, std::vector<Surface> f, std::optional<Mask> m)
    : domain(std::move(d)), frames(std::move(f)), mask(std::move(m)) {}

void FtsDataset::validate() const {
  for (std::size_t t = 0; t < frames.size(); ++t) {
    detail::check_shape(frames[t].rows(), frames[t].cols(), domain.n1(), domain.n2(), "FtsDataset");
    if (!frames[t].allFinite()) {
      fail(ErrorKind::data, "grid", "FtsDataset", "frame " + std::to_string(t) + " has non-finite values");
    }
  }
  if (mask) detail::check_shape(mask->rows(), mask->cols(), domain.n1(), domain.n2(), "FtsDataset");
  if (!timestamps.empty() && timestamps.size() != frames.size()) {
    fail(ErrorKind::data, "grid", "FtsDataset", "timestamp count differs from frame count");
  }
}

Surface apply_mask(const Surface& f, const Mask* mask) {
  if (mask == nullptr) return f;
  detail::check_shape(mask->rows(), mask->cols(), f.rows(), f.cols(), "apply_mask");
  return mask->inside().select(f.array(), 0.0).matrix();
}

double integral(const Surface& f, const GridDomain& d, const Mask* mask) {
  detail::check_shape(f.rows(), f.cols(), d.n1(), d.n2(), "integral");
  if (mask == nullptr) return d.cell_weight() * f.sum();
  return d.cell_weight() * mask->inside().select(f.array(), 0.0).sum();
}

Surface pointwise_mean(const FtsDataset& ds, std::span<const Index> indices) {
  if (indices.empty()) fail(ErrorKind::argument, "grid", "pointwise_mean", "empty index set");
  check_indices(ds, indices, "pointwise_mean");
  // Accumulate deviations from the first frame so identical frames average
  // to that frame exactly.
  const Surface& base = ds.frames[static_cast<std::size_t>(indices.front())];
  Surface acc = Surface::Zero(ds.domain.n1(), ds.domain.n2());
  for (Index t : indices) acc += ds.frames[static_cast<std::size_t>(t)] - base;
  return base + acc / static_cast<double>(indices.size());
}

Surface pointwise_std(const FtsDataset& ds, std::span<const Index> indices) {
  if (indices.size() < 2) {
    fail(ErrorKind::argument, "grid", "pointwise_std", "need at least 2 frames");
  }
  const Surface mean = pointwise_mean(ds, indices);
  Eigen::ArrayXXd ss = Eigen::ArrayXXd::Zero(mean.rows(), mean.cols());
  for (Index t : indices) {
    ss += (ds.frames[static_cast<std::size_t>(t)] - mean).array().square();
  }
  Surface sd = (ss / static_cast<double>(indices.size() - 1)).sqrt().matrix();
  return apply_mask(sd, ds.mask_ptr());
}

Eigen::MatrixXd stack_frames(const FtsDataset& ds, std::span<const Index> indices) {
  check_indices(ds, indices, "stack_frames");
  Eigen::MatrixXd y(static_cast<Index>(indices.size()), ds.domain.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    y.row(static_cast<Index>(r)) = flatten(ds.frames[static_cast<std::size_t>(indices[r])]).transpose();
  }
  return y;
}

Surface unflatten(const Eigen::Ref<const Eigen::VectorXd>& flat, Index n1, Index n2) {
  if (flat.size() != n1 * n2) fail(ErrorKind::dimension, "grid", "unflatten", "length mismatch");
  return Eigen::Map<const Surface>(flat.data(), n1, n2);
}

}  // namespace surfcp
