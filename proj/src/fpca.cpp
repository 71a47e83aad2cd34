#include "surfcp/fpca.hpp"

#include <cmath>
#include <string>

namespace surfcp {

namespace {

// Relative cut below which an eigenvalue counts as numerical zero.
constexpr double kRelativeZero = 1e-12;

struct Spectrum {
  Eigen::VectorXd values;   // descending, positive
  Eigen::MatrixXd vectors;  // matching columns
};

// Descending positive part of a symmetric eigendecomposition.
Spectrum positive_spectrum(const Eigen::MatrixXd& sym, const char* op) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) {
    fail(ErrorKind::numerical, "fpca", op, "symmetric eigensolver did not converge");
  }
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double top = ev.size() > 0 ? ev[ev.size() - 1] : 0.0;
  if (!(top > 0.0)) fail(ErrorKind::degenerate, "fpca", op, "data have no variability: no components");
  Index kept = 0;
  for (Index k = ev.size() - 1; k >= 0 && ev[k] > kRelativeZero * top; --k) ++kept;
  Spectrum out{Eigen::VectorXd(kept), Eigen::MatrixXd(sym.rows(), kept)};
  for (Index r = 0; r < kept; ++r) {
    out.values[r] = ev[ev.size() - 1 - r];
    out.vectors.col(r) = es.eigenvectors().col(ev.size() - 1 - r);
  }
  return out;
}

Index resolve_count(const ComponentSelector& selector, const Eigen::VectorXd& values) {
  if (selector.kind == ComponentSelector::Kind::fixed) {
    if (selector.count < 1) fail(ErrorKind::argument, "fpca", "select", "fixed M must be positive");
    return std::min(selector.count, values.size());
  }
  return select_num_components(values, selector.threshold);
}

}  // namespace

void normalize_signs(Eigen::MatrixXd& columns) {
  for (Index j = 0; j < columns.cols(); ++j) {
    Index arg = 0;
    columns.col(j).cwiseAbs().maxCoeff(&arg);
    if (columns(arg, j) < 0.0) columns.col(j) *= -1.0;
  }
}

Eigen::MatrixXd covariance_matrix(const FtsDataset& ds, std::span<const Index> indices) {
  if (indices.size() < 2) fail(ErrorKind::argument, "fpca", "covariance_matrix", "need at least 2 frames");
  const Eigen::MatrixXd y = stack_frames(ds, indices);
  return (y.transpose() * y) / static_cast<double>(y.rows());
}

Index select_num_components(const Eigen::VectorXd& eigenvalues, double threshold) {
  if (eigenvalues.size() == 0) fail(ErrorKind::argument, "fpca", "select_num_components", "no eigenvalues");
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    fail(ErrorKind::argument, "fpca", "select_num_components", "threshold must lie in (0, 1]");
  }
  Index positive = 0;
  double total = 0.0;
  for (Index k = 0; k < eigenvalues.size(); ++k) {
    if (eigenvalues[k] < 0.0) {
      fail(ErrorKind::argument, "fpca", "select_num_components", "negative eigenvalue");
    }
    if (k > 0 && eigenvalues[k] > eigenvalues[k - 1]) {
      fail(ErrorKind::argument, "fpca", "select_num_components", "eigenvalues must be non-increasing");
    }
    if (eigenvalues[k] > 0.0) ++positive;
    total += eigenvalues[k];
  }
  if (!(total > 0.0)) fail(ErrorKind::degenerate, "fpca", "select_num_components", "all eigenvalues are zero");
  double cumulative = 0.0;
  for (Index k = 0; k < positive; ++k) {
    cumulative += eigenvalues[k];
    if (cumulative >= threshold * total) return k + 1;
  }
  return positive;
}

FpcaResult fpca_discretized(const Eigen::MatrixXd& centered_rows, const GridDomain& d,
                            const ComponentSelector& selector, EigenPath path) {
  const Index n = centered_rows.rows();
  const Index big_n = d.size();
  if (centered_rows.cols() != big_n) {
    fail(ErrorKind::dimension, "fpca", "fpca_discretized", "frame length differs from grid size");
  }
  if (n < 1) fail(ErrorKind::argument, "fpca", "fpca_discretized", "no frames");
  const double w = d.cell_weight();
  const bool snapshot = path == EigenPath::snapshot || (path == EigenPath::automatic && n < big_n);

  Spectrum spec;
  Eigen::MatrixXd xi;  // N x kept, unit quadrature norm
  if (snapshot) {
    const Eigen::MatrixXd gram = (w / static_cast<double>(n)) * (centered_rows * centered_rows.transpose());
    spec = positive_spectrum(gram, "fpca_discretized");
    xi = centered_rows.transpose() * spec.vectors;
    for (Index j = 0; j < xi.cols(); ++j) xi.col(j) /= std::sqrt(w) * xi.col(j).norm();
  } else {
    const Eigen::MatrixXd cov = (w / static_cast<double>(n)) * (centered_rows.transpose() * centered_rows);
    spec = positive_spectrum(cov, "fpca_discretized");
    xi = spec.vectors / std::sqrt(w);
  }
  normalize_signs(xi);

  const Index m = resolve_count(selector, spec.values);
  FpcaResult res;
  res.all_eigenvalues = spec.values;
  res.eigenvalues = spec.values.head(m);
  res.eigenfunctions = xi.leftCols(m);
  res.scores = w * (centered_rows * res.eigenfunctions);
  res.method = FpcaMethod::discretized;
  res.n1 = d.n1();
  res.n2 = d.n2();
  return res;
}

FpcaResult fpca_discretized(const FtsDataset& ds, std::span<const Index> indices,
                            const ComponentSelector& selector, EigenPath path) {
  Eigen::MatrixXd y = stack_frames(ds, indices);
  if (ds.mask) {
    const Eigen::Map<const Eigen::Array<bool, Eigen::Dynamic, 1>> inside(ds.mask->inside().data(),
                                                                         ds.mask->inside().size());
    for (Index c = 0; c < y.cols(); ++c) {
      if (!inside[c]) y.col(c).setZero();
    }
  }
  return fpca_discretized(y, ds.domain, selector, path);
}

FpcaResult fpca_basis(const BasisExpansion& be, const Eigen::MatrixXd& w, const GridDomain& d,
                      const ComponentSelector& selector) {
  const Index k = be.basis.size();
  if (be.coefficients.cols() != k || w.rows() != k || w.cols() != k) {
    fail(ErrorKind::dimension, "fpca", "fpca_basis", "coefficients, Gram matrix and basis sizes differ");
  }
  const Index n = be.coefficients.rows();
  if (n < 1) fail(ErrorKind::argument, "fpca", "fpca_basis", "no frames");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> wes(0.5 * (w + w.transpose()));
  const Eigen::VectorXd wd = wes.eigenvalues();
  const double wmax = wd.maxCoeff();
  if (!(wmax > 0.0) || wd.minCoeff() < -1e-10 * wmax) {
    fail(ErrorKind::numerical, "fpca", "fpca_basis", "Gram matrix W is not positive semi-definite");
  }
  Eigen::VectorXd root(k);
  Eigen::VectorXd inv_root(k);
  for (Index r = 0; r < k; ++r) {
    const double val = wd[r] > kRelativeZero * wmax ? wd[r] : 0.0;
    root[r] = std::sqrt(val);
    inv_root[r] = val > 0.0 ? 1.0 / std::sqrt(val) : 0.0;
  }
  const Eigen::MatrixXd& q = wes.eigenvectors();
  const Eigen::MatrixXd w_half = q * root.asDiagonal() * q.transpose();
  const Eigen::MatrixXd w_inv_half = q * inv_root.asDiagonal() * q.transpose();

  const Eigen::MatrixXd& c = be.coefficients;
  const Eigen::MatrixXd sym = w_half * ((c.transpose() * c) / static_cast<double>(n)) * w_half;
  const Spectrum spec = positive_spectrum(0.5 * (sym + sym.transpose()), "fpca_basis");

  const Eigen::MatrixXd phi = eval_basis(be.basis, d);
  const Eigen::MatrixXd b = w_inv_half * spec.vectors;
  Eigen::MatrixXd xi = phi * b;
  for (Index j = 0; j < xi.cols(); ++j) {
    const double norm = std::sqrt(d.cell_weight()) * xi.col(j).norm();
    if (!(norm > 0.0)) fail(ErrorKind::numerical, "fpca", "fpca_basis", "eigenfunction vanishes on the grid");
    xi.col(j) /= norm;
  }
  normalize_signs(xi);

  const Index m = resolve_count(selector, spec.values);
  FpcaResult res;
  res.all_eigenvalues = spec.values;
  res.eigenvalues = spec.values.head(m);
  res.eigenfunctions = xi.leftCols(m);
  res.scores = c * (d.cell_weight() * (phi.transpose() * res.eigenfunctions));
  res.method = FpcaMethod::basis;
  res.n1 = d.n1();
  res.n2 = d.n2();
  return res;
}

Eigen::VectorXd project_scores(const Surface& f, const FpcaResult& res, const GridDomain& d) {
  detail::check_shape(f.rows(), f.cols(), res.n1, res.n2, "project_scores");
  detail::check_shape(f.rows(), f.cols(), d.n1(), d.n2(), "project_scores");
  return d.cell_weight() * (res.eigenfunctions.transpose() * flatten(f));
}

}  // namespace surfcp
