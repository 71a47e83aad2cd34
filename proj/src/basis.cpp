#include "surfcp/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace surfcp {

const char* to_string(BasisKind kind) noexcept {
  return kind == BasisKind::fourier ? "fourier" : "bspline";
}

BasisKind parse_basis_kind(const std::string& name) {
  if (name == "bspline" || name == "bspline_cubic") return BasisKind::bspline_cubic;
  if (name == "fourier") return BasisKind::fourier;
  fail(ErrorKind::argument, "basis", "parse_basis_kind", "unknown basis kind '" + name + "'");
}

namespace {
constexpr int kOrder = 4;  // cubic
}

BasisSystem1D::BasisSystem1D(BasisKind kind, Index n_basis) : kind_(kind), n_basis_(n_basis) {
  if (n_basis < 1) fail(ErrorKind::argument, "basis", "BasisSystem1D", "n_basis must be positive");
  if (kind == BasisKind::bspline_cubic) {
    if (n_basis < kOrder) {
      fail(ErrorKind::argument, "basis", "BasisSystem1D", "cubic B-splines need n_basis >= 4");
    }
    const Index interior = n_basis - kOrder;
    knots_.assign(kOrder, 0.0);
    for (Index k = 1; k <= interior; ++k) {
      knots_.push_back(static_cast<double>(k) / static_cast<double>(interior + 1));
    }
    knots_.insert(knots_.end(), kOrder, 1.0);
  }
}

Eigen::VectorXd BasisSystem1D::evaluate(double x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_basis_);
  if (kind_ == BasisKind::fourier) {
    out[0] = 1.0;
    for (Index k = 1; k < n_basis_; ++k) {
      const double freq = static_cast<double>((k + 1) / 2);
      const double arg = 2.0 * std::numbers::pi * freq * x;
      out[k] = std::numbers::sqrt2 * ((k % 2 == 1) ? std::sin(arg) : std::cos(arg));
    }
    return out;
  }

  // Cox-de Boor on the open knot vector; x = 1 belongs to the last span.
  const auto& t = knots_;
  const Index n_knots = static_cast<Index>(t.size());
  const double xc = std::clamp(x, 0.0, 1.0);
  Index span = kOrder - 1;
  while (span + 1 < n_knots - kOrder && xc >= t[static_cast<std::size_t>(span + 1)]) ++span;

  // Degree-0 indicator on `span`, then raise the degree.
  std::vector<double> b(static_cast<std::size_t>(n_knots - 1), 0.0);
  b[static_cast<std::size_t>(span)] = 1.0;
  for (int degree = 1; degree < kOrder; ++degree) {
    for (Index i = 0; i + degree + 1 < n_knots; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      double value = 0.0;
      const double left = t[ui + degree] - t[ui];
      if (left > 0.0) value += (xc - t[ui]) / left * b[ui];
      const double right = t[ui + degree + 1] - t[ui + 1];
      if (right > 0.0) value += (t[ui + degree + 1] - xc) / right * b[ui + 1];
      b[ui] = value;
    }
  }
  for (Index k = 0; k < n_basis_; ++k) out[k] = b[static_cast<std::size_t>(k)];
  return out;
}

Eigen::MatrixXd BasisSystem1D::evaluate(const Eigen::VectorXd& points) const {
  Eigen::MatrixXd out(points.size(), n_basis_);
  for (Index r = 0; r < points.size(); ++r) out.row(r) = evaluate(points[r]).transpose();
  return out;
}

double TensorBasis::evaluate(Index k, double u, double v) const {
  const Index i = k / v_.size();
  const Index j = k % v_.size();
  return u_.evaluate(u)[i] * v_.evaluate(v)[j];
}

Eigen::MatrixXd eval_basis(const TensorBasis& tb, const GridDomain& d) {
  const Eigen::MatrixXd gu = tb.basis_u().evaluate(d.u());
  const Eigen::MatrixXd hv = tb.basis_v().evaluate(d.v());
  const Index k2 = tb.basis_v().size();
  Eigen::MatrixXd phi(d.size(), tb.size());
  for (Index i = 0; i < d.n1(); ++i) {
    for (Index j = 0; j < d.n2(); ++j) {
      const Index row = d.flat_index(i, j);
      for (Index a = 0; a < gu.cols(); ++a) {
        for (Index b = 0; b < k2; ++b) phi(row, a * k2 + b) = gu(i, a) * hv(j, b);
      }
    }
  }
  return phi;
}

std::vector<Surface> basis_surfaces(const TensorBasis& tb, const GridDomain& d) {
  const Eigen::MatrixXd phi = eval_basis(tb, d);
  std::vector<Surface> out;
  out.reserve(static_cast<std::size_t>(phi.cols()));
  for (Index k = 0; k < phi.cols(); ++k) out.push_back(unflatten(phi.col(k), d.n1(), d.n2()));
  return out;
}

Eigen::MatrixXd gram_matrix(const TensorBasis& tb, const GridDomain& d) {
  const Eigen::MatrixXd phi = eval_basis(tb, d);
  Eigen::MatrixXd w = d.cell_weight() * (phi.transpose() * phi);
  return 0.5 * (w + w.transpose());
}

BasisProjector::BasisProjector(const TensorBasis& tb, const GridDomain& d)
    : basis_(tb), n1_(d.n1()), n2_(d.n2()), design_(eval_basis(tb, d)), qr_(design_) {
  if (qr_.rank() < design_.cols()) {
    fail(ErrorKind::singular, "basis", "project_onto_basis",
         "evaluated basis is rank deficient on this grid (rank " + std::to_string(qr_.rank()) +
             " < " + std::to_string(design_.cols()) + ")");
  }
}

Eigen::VectorXd BasisProjector::coefficients(const Surface& f) const {
  detail::check_shape(f.rows(), f.cols(), n1_, n2_, "project_onto_basis");
  return qr_.solve(Eigen::VectorXd(flatten(f)));
}

Eigen::MatrixXd BasisProjector::coefficients(const Eigen::MatrixXd& flat_columns) const {
  if (flat_columns.rows() != design_.rows()) {
    fail(ErrorKind::dimension, "basis", "project_onto_basis", "frame length differs from grid size");
  }
  return qr_.solve(flat_columns);
}

Surface BasisProjector::synthesize(const Eigen::VectorXd& c) const {
  if (c.size() != design_.cols()) {
    fail(ErrorKind::dimension, "basis", "synthesize", "coefficient length differs from basis size");
  }
  return unflatten(design_ * c, n1_, n2_);
}

BasisExpansion project_onto_basis(const FtsDataset& ds, const TensorBasis& tb) {
  const BasisProjector proj(tb, ds.domain);
  Eigen::MatrixXd y(ds.domain.size(), ds.length());
  for (Index t = 0; t < ds.length(); ++t) {
    const Surface& f = ds.frames[static_cast<std::size_t>(t)];
    detail::check_shape(f.rows(), f.cols(), ds.domain.n1(), ds.domain.n2(), "project_onto_basis");
    y.col(t) = flatten(f);
  }
  return BasisExpansion{proj.coefficients(y).transpose(), tb};
}

std::vector<Surface> synthesize(const BasisExpansion& be, const GridDomain& d) {
  const Eigen::MatrixXd phi = eval_basis(be.basis, d);
  if (be.coefficients.cols() != phi.cols()) {
    fail(ErrorKind::dimension, "basis", "synthesize", "coefficient width differs from basis size");
  }
  std::vector<Surface> out;
  out.reserve(static_cast<std::size_t>(be.coefficients.rows()));
  for (Index t = 0; t < be.coefficients.rows(); ++t) {
    out.push_back(unflatten(phi * be.coefficients.row(t).transpose(), d.n1(), d.n2()));
  }
  return out;
}

}  // namespace surfcp
