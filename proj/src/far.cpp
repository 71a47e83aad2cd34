#include "surfcp/far.hpp"

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

namespace surfcp {

const char* to_string(FarMethod method) noexcept {
  switch (method) {
    case FarMethod::naive: return "naive";
    case FarMethod::oracle: return "oracle";
    case FarMethod::concurrent: return "concurrent";
    case FarMethod::ek: return "ek";
    case FarMethod::ek_plus: return "ek+";
    case FarMethod::var_scores: return "var";
  }
  return "unknown";
}

FarMethod parse_far_method(const std::string& name) {
  if (name == "naive") return FarMethod::naive;
  if (name == "oracle") return FarMethod::oracle;
  if (name == "concurrent") return FarMethod::concurrent;
  if (name == "ek") return FarMethod::ek;
  if (name == "ek+" || name == "ek_plus") return FarMethod::ek_plus;
  if (name == "var" || name == "var_scores") return FarMethod::var_scores;
  fail(ErrorKind::argument, "far", "parse_far_method", "unknown method '" + name + "'");
}

namespace {

struct LagPairs {
  std::vector<std::pair<Index, Index>> pairs;  // (regressor frame, response frame)
  double divisor = 1.0;
};

LagPairs lag_pairs(std::span<const Index> sorted, Index length, Gamma1Variant variant, const char* op) {
  const auto m = static_cast<Index>(sorted.size());
  LagPairs out;
  switch (variant) {
    case Gamma1Variant::trim_forward:
      if (m < 2) fail(ErrorKind::argument, "far", op, "trim_forward needs at least 2 indices");
      for (Index k = 0; k + 1 < m; ++k) {
        const Index t = sorted[static_cast<std::size_t>(k)];
        if (t + 1 >= length) fail(ErrorKind::argument, "far", op, "trim_forward needs frame t+1");
        out.pairs.emplace_back(t, t + 1);
      }
      out.divisor = static_cast<double>(m - 1);
      break;
    case Gamma1Variant::trim_backward:
      if (m < 2) fail(ErrorKind::argument, "far", op, "trim_backward needs at least 2 indices");
      for (Index k = 1; k < m; ++k) {
        const Index t = sorted[static_cast<std::size_t>(k)];
        if (t < 1) fail(ErrorKind::argument, "far", op, "trim_backward needs frame t-1");
        out.pairs.emplace_back(t - 1, t);
      }
      out.divisor = static_cast<double>(m - 1);
      break;
    case Gamma1Variant::burn_in:
      if (m < 1) fail(ErrorKind::argument, "far", op, "empty index set");
      for (Index t : sorted) {
        if (t < 1) fail(ErrorKind::argument, "far", op, "burn_in needs a predecessor for every index");
        out.pairs.emplace_back(t - 1, t);
      }
      out.divisor = static_cast<double>(m);
      break;
  }
  return out;
}

std::vector<Index> sorted_unique(std::span<const Index> indices, Index length, const char* op) {
  std::vector<Index> s(indices.begin(), indices.end());
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
    fail(ErrorKind::argument, "far", op, "duplicate frame index");
  }
  for (Index t : s) {
    if (t < 0 || t >= length) fail(ErrorKind::argument, "far", op, "frame index out of range");
  }
  return s;
}

Eigen::VectorXd centered_flat(const Surface& f, const Surface& mean, const Mask* mask) {
  return flatten(apply_mask(f, mask) - mean);
}

}  // namespace

FarPredictor make_oracle(const TrueKernel& kernel, const GridDomain& d, const std::optional<Mask>& mask) {
  const Index k = kernel.basis.size();
  if (kernel.coefficient_operator.rows() != k || kernel.coefficient_operator.cols() != k) {
    fail(ErrorKind::dimension, "far", "fit", "kernel operator does not match its basis");
  }
  FarPredictor p;
  p.method_ = FarMethod::oracle;
  p.n1_ = d.n1();
  p.n2_ = d.n2();
  p.cell_weight_ = d.cell_weight();
  p.mask_ = mask;
  p.mean_ = Surface::Zero(d.n1(), d.n2());
  p.projector_ = std::make_shared<const BasisProjector>(kernel.basis, d);
  p.operator_ = kernel.coefficient_operator;
  return p;
}

FarPredictor fit(FarMethod method, const FtsDataset& ds, std::span<const Index> train,
                 const FarOptions& options, const TrueKernel* kernel) {
  const GridDomain& d = ds.domain;
  const std::vector<Index> idx = sorted_unique(train, ds.length(), "fit");
  if (idx.size() < 2) fail(ErrorKind::argument, "far", "fit", "training set needs at least 2 frames");
  if (idx.front() < 1) {
    fail(ErrorKind::argument, "far", "fit", "frame 0 is a covariate only and cannot be in the training set");
  }
  const Mask* mask = ds.mask_ptr();

  if (method == FarMethod::oracle) {
    if (kernel == nullptr) fail(ErrorKind::argument, "far", "fit", "oracle needs the true kernel");
    return make_oracle(*kernel, d, ds.mask);
  }

  FarPredictor p;
  p.method_ = method;
  p.n1_ = d.n1();
  p.n2_ = d.n2();
  p.cell_weight_ = d.cell_weight();
  p.mask_ = ds.mask;

  const Surface mean = apply_mask(pointwise_mean(ds, idx), mask);
  p.mean_ = mean;

  if (method == FarMethod::naive) return p;

  if (method == FarMethod::concurrent) {
    Eigen::ArrayXXd num = Eigen::ArrayXXd::Zero(d.n1(), d.n2());
    Eigen::ArrayXXd den = Eigen::ArrayXXd::Zero(d.n1(), d.n2());
    for (Index t : idx) {
      const Eigen::ArrayXXd y = (apply_mask(ds.frames[static_cast<std::size_t>(t)], mask) - mean).array();
      const Eigen::ArrayXXd x = (apply_mask(ds.frames[static_cast<std::size_t>(t - 1)], mask) - mean).array();
      num += x * y;
      den += x.square();
    }
    p.psi_ = (den > 0.0).select(num / den, 0.0).matrix();
    return p;
  }

  // FPCA-based estimators.
  const auto m = static_cast<Index>(idx.size());
  Eigen::MatrixXd centered(m, d.size());
  for (Index r = 0; r < m; ++r) {
    centered.row(r) = centered_flat(ds.frames[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])],
                                    mean, mask)
                          .transpose();
  }
  if (centered.squaredNorm() == 0.0) {
    fail(ErrorKind::degenerate, "far", "fit", "training frames are identical after centering");
  }
  p.fpca_ = fpca_discretized(centered, d, options.selector);
  const FpcaResult& fp = *p.fpca_;
  const Index k = fp.size();
  const double w = d.cell_weight();
  auto scores_of = [&](Index t) -> Eigen::VectorXd {
    return w * (fp.eigenfunctions.transpose() *
                centered_flat(ds.frames[static_cast<std::size_t>(t)], mean, mask));
  };

  if (method == FarMethod::var_scores) {
    const LagPairs lp = lag_pairs(idx, ds.length(), Gamma1Variant::burn_in, "fit");
    Eigen::MatrixXd sx(static_cast<Index>(lp.pairs.size()), k);
    Eigen::MatrixXd sy(static_cast<Index>(lp.pairs.size()), k);
    for (std::size_t r = 0; r < lp.pairs.size(); ++r) {
      sx.row(static_cast<Index>(r)) = scores_of(lp.pairs[r].first).transpose();
      sy.row(static_cast<Index>(r)) = scores_of(lp.pairs[r].second).transpose();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sx);
    if (qr.rank() < k) {
      fail(ErrorKind::singular, "far", "fit", "regressor scores are rank deficient for the VAR fit");
    }
    // sy ~ sx B^T, solved column-wise by least squares.
    p.transfer_ = qr.solve(sy).transpose();
    return p;
  }

  // ek / ek+: transfer[i, j] = <Gamma1 xi_j, xi_i> * weight(lambda_j).
  const LagPairs lp = lag_pairs(idx, ds.length(), options.gamma1, "fit");
  Eigen::MatrixXd c1 = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [lag, lead] : lp.pairs) c1 += scores_of(lead) * scores_of(lag).transpose();
  c1 /= lp.divisor;

  Eigen::VectorXd lambda = fp.eigenvalues;
  if (method == FarMethod::ek_plus) {
    const Eigen::VectorXd& all = fp.all_eigenvalues;
    const double shift = options.ek_plus_factor * (all[0] + (all.size() > 1 ? all[1] : 0.0));
    lambda.array() += shift;
  }
  Eigen::VectorXd weight = options.weighting == EigenWeighting::inverse ? lambda.cwiseInverse() : lambda;
  p.transfer_ = c1 * weight.asDiagonal();
  return p;
}

Surface FarPredictor::predict(const Surface& x) const {
  detail::check_shape(x.rows(), x.cols(), n1_, n2_, "predict");
  const Mask* mask = mask_ ? &*mask_ : nullptr;
  const Surface mx = apply_mask(x, mask);
  switch (method_) {
    case FarMethod::naive:
      return mx;
    case FarMethod::concurrent:
      return apply_mask(mean_ + psi_.cwiseProduct(mx - mean_), mask);
    case FarMethod::oracle:
      return apply_mask(projector_->synthesize(operator_ * projector_->coefficients(mx)), mask);
    case FarMethod::ek:
    case FarMethod::ek_plus:
    case FarMethod::var_scores: {
      const Eigen::MatrixXd& xi = fpca_->eigenfunctions;
      const Eigen::VectorXd s = cell_weight_ * (xi.transpose() * flatten(Surface(mx - mean_)));
      const Eigen::VectorXd out = xi * (transfer_ * s);
      return apply_mask(mean_ + unflatten(out, n1_, n2_), mask);
    }
  }
  fail(ErrorKind::argument, "far", "predict", "unknown method");
}

Surface lag1_covariance_apply(const FtsDataset& ds, std::span<const Index> indices, Gamma1Variant variant,
                              const Surface& x) {
  detail::check_shape(x.rows(), x.cols(), ds.domain.n1(), ds.domain.n2(), "lag1_covariance_apply");
  const std::vector<Index> idx = sorted_unique(indices, ds.length(), "lag1_covariance_apply");
  const LagPairs lp = lag_pairs(idx, ds.length(), variant, "lag1_covariance_apply");
  Surface acc = Surface::Zero(ds.domain.n1(), ds.domain.n2());
  for (const auto& [lag, lead] : lp.pairs) {
    const double c = inner_product(ds.frames[static_cast<std::size_t>(lag)], x, ds.domain, ds.mask_ptr());
    acc += c * ds.frames[static_cast<std::size_t>(lead)];
  }
  return apply_mask(acc / lp.divisor, ds.mask_ptr());
}

}  // namespace surfcp
