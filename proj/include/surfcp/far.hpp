#pragma once

// Point predictors for the next surface of a functional time series. Every
// estimator is fit on a designated training index set only, so the remaining
// frames can be used for conformal calibration.

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <span>
#include <string>

#include "surfcp/basis.hpp"
#include "surfcp/fpca.hpp"
#include "surfcp/grid.hpp"

namespace surfcp {

enum class FarMethod { naive, oracle, concurrent, ek, ek_plus, var_scores };

/// CLI spelling: naive, oracle, concurrent, ek, ek+, var.
const char* to_string(FarMethod method) noexcept;
FarMethod parse_far_method(const std::string& name);

/// Lag-1 autocovariance estimators adapted to a training index set I1
/// (sorted ascending, size m):
///   trim_forward   1/(m-1) sum_{t in I1[1:m-1]} <Y_t, x> Y_{t+1}
///   trim_backward  1/(m-1) sum_{t in I1[2:m]}   <Y_{t-1}, x> Y_t
///   burn_in        1/m     sum_{t in I1}        <Y_{t-1}, x> Y_t
enum class Gamma1Variant { trim_forward, trim_backward, burn_in };

/// Weight given to eigenvalue j in the EK operator. `inverse` uses
/// 1 / lambda_j as the pseudo-inverse of the covariance requires; `printed`
/// multiplies by lambda_j and exists only for comparison with that form.
enum class EigenWeighting { inverse, printed };

struct FarOptions {
  ComponentSelector selector = ComponentSelector::variance(0.8);
  Gamma1Variant gamma1 = Gamma1Variant::burn_in;
  EigenWeighting weighting = EigenWeighting::inverse;
  /// EK+ replaces lambda_i by lambda_i + factor * (lambda_1 + lambda_2).
  double ek_plus_factor = 1.5;
};

/// Data-generating operator in coefficient space: y_t = A y_{t-1} + e_t on
/// a tensor basis. Used by the oracle predictor.
struct TrueKernel {
  TensorBasis basis;
  Eigen::MatrixXd coefficient_operator;  // K x K
};

class FarPredictor {
 public:
  FarMethod method() const noexcept { return method_; }
  const Surface& train_mean() const noexcept { return mean_; }
  /// Concurrent coefficient field (empty for other methods).
  const Surface& concurrent_coefficients() const noexcept { return psi_; }
  /// FPCA of the centered training frames (ek, ek+, var only).
  const std::optional<FpcaResult>& fpca() const noexcept { return fpca_; }
  /// M x M score-space operator (ek, ek+, var only).
  const Eigen::MatrixXd& transfer() const noexcept { return transfer_; }

  /// mu + L(x - mu), zero outside the mask.
  Surface predict(const Surface& x) const;

 private:
  friend FarPredictor fit(FarMethod, const FtsDataset&, std::span<const Index>, const FarOptions&,
                          const TrueKernel*);
  friend FarPredictor make_oracle(const TrueKernel&, const GridDomain&, const std::optional<Mask>&);

  FarMethod method_ = FarMethod::naive;
  Index n1_ = 0;
  Index n2_ = 0;
  double cell_weight_ = 0.0;
  std::optional<Mask> mask_;
  Surface mean_;
  Surface psi_;
  std::optional<FpcaResult> fpca_;
  Eigen::MatrixXd transfer_;
  std::shared_ptr<const BasisProjector> projector_;
  Eigen::MatrixXd operator_;
};

/// Fits `method` on the frames indexed by `train` (0-based; index 0 has no
/// predecessor and cannot be used). `kernel` is required for the oracle.
FarPredictor fit(FarMethod method, const FtsDataset& ds, std::span<const Index> train,
                 const FarOptions& options = {}, const TrueKernel* kernel = nullptr);

/// Oracle predictor x -> phi^T A c(x), c(x) the least-squares coefficients.
FarPredictor make_oracle(const TrueKernel& kernel, const GridDomain& d,
                         const std::optional<Mask>& mask = std::nullopt);

inline Surface predict(const FarPredictor& p, const Surface& x) { return p.predict(x); }

/// Gamma1 x for the selected estimator, applied to the frames as stored (no
/// centering). Masked cells are excluded from the inner products.
Surface lag1_covariance_apply(const FtsDataset& ds, std::span<const Index> indices,
                              Gamma1Variant variant, const Surface& x);

}  // namespace surfcp
