#pragma once

// Split conformal prediction bands for surface-valued forecasts: train /
// calibration splits, the blocked permutation family, sup-norm
// nonconformity scores with a modulation surface, randomization p-values and
// the closed-form band g +/- k s.
//
// Frame indices are 0-based. Frame 0 is a burn-in covariate: it regresses
// frame 1 but belongs to neither the training nor the calibration set.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surfcp/far.hpp"
#include "surfcp/grid.hpp"

namespace surfcp {

enum class SplitMode { random, sequential };

const char* to_string(SplitMode mode) noexcept;
SplitMode parse_split_mode(const std::string& name);

struct SplitPlan {
  std::vector<Index> train;        // I1, ascending
  std::vector<Index> calibration;  // I2, ascending
  SplitMode mode = SplitMode::random;
  std::uint64_t seed = 0;
  Index burn_in = 1;

  Index m() const noexcept { return static_cast<Index>(train.size()); }
  Index l() const noexcept { return static_cast<Index>(calibration.size()); }
};

/// Partitions frames burn_in..T-1 into I1 and I2 with
/// m = round(ratio * (T - burn_in)). Random mode draws a uniform partition
/// from `seed`; sequential mode gives I1 the first m usable frames.
SplitPlan make_split(Index length, double ratio, SplitMode mode, std::uint64_t seed, Index burn_in = 1);

/// Same with an explicit calibration size l.
SplitPlan make_split_sized(Index length, Index calibration_size, SplitMode mode, std::uint64_t seed,
                           Index burn_in = 1);

/// Smallest calibration size >= round((1 - ratio) * usable) such that l + 1
/// is a multiple of every block size and no band degenerates to the whole
/// space (alpha >= b / (l + 1) for every b). Throws when no such l leaves at
/// least two training frames.
Index calibration_size_for_blocks(Index length, double ratio, std::span<const Index> block_sizes,
                                  double alpha, Index burn_in = 1);

/// Non-overlapping block rotations of {0, ..., l}. Member i (0-based) shifts
/// by i * b: map[i][j] = j + i b if that is <= l, otherwise j + i b - l - 1.
/// Member 0 is the identity.
struct PermutationFamily {
  Index l = 0;
  Index b = 1;
  std::vector<std::vector<Index>> maps;

  Index size() const noexcept { return static_cast<Index>(maps.size()); }
  /// Calibration position (0-based, in I2 order) that member i moves into the
  /// slot of the new observation. Undefined for the identity.
  Index source_of_new_slot(Index i) const { return maps[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)]; }
};

PermutationFamily make_permutation_family(Index l, Index b);

/// Order-statistic rank used for the band radius.
///  exact:   ceil(|Pi| (1 - alpha)), the exact inversion of p(y) > alpha.
///  printed: ceil((|Pi| + 1) (1 - alpha)), one rank more conservative.
enum class RadiusRule { exact, printed };

/// Which surface modulates the band width.
enum class ModulationKind { data_std, residual_std };

struct ConformalOptions {
  RadiusRule radius_rule = RadiusRule::exact;
  ModulationKind modulation = ModulationKind::data_std;
  /// Replace a flat (zero-variance) modulation by the uniform surface rather
  /// than throwing.
  bool uniform_if_degenerate = false;
};

/// Pointwise std of the training frames (or of the training residuals),
/// floored at 1e-8 of its mask maximum, zero off the mask and scaled to unit
/// integral over the mask.
Surface modulation_function(const FtsDataset& ds, const SplitPlan& plan, const FarPredictor& predictor,
                            const ConformalOptions& options = {});

/// max over mask cells of |y - g| / s.
double nonconformity_score(const Surface& y, const Surface& forecast, const Surface& modulation,
                           const Mask* mask);

/// Scores of the calibration pairs (Y_{t-1}, Y_t), t in I2, in I2 order.
std::vector<double> calibration_scores(const FtsDataset& ds, const SplitPlan& plan,
                                       const FarPredictor& predictor, const Surface& modulation);

/// Scores S(Z^pi) of the non-identity family members, in member order.
std::vector<double> permutation_scores(std::span<const double> calibration, const PermutationFamily& fam);

/// 1-based rank of k^s among the |Pi| - 1 permutation scores (0 means empty
/// band, > |Pi| - 1 means whole space).
Index radius_rank(Index family_size, double alpha, RadiusRule rule = RadiusRule::exact);

/// k^s: +inf when the band is the whole space, -inf when it is empty.
double band_radius(std::span<const double> calibration, const PermutationFamily& fam, double alpha,
                   RadiusRule rule = RadiusRule::exact);

/// (1 + #{non-identity pi : S_pi >= candidate}) / |Pi|.
double p_value(double candidate_score, std::span<const double> calibration, const PermutationFamily& fam);

class ConformalBand {
 public:
  ConformalBand(Surface center, Surface modulation, double radius, std::optional<Mask> mask, double alpha,
                const GridDomain& domain);

  /// Band center: the forecast plus any translation.
  Surface center() const;
  /// Forecast g before any translation.
  const Surface& forecast() const noexcept { return center_; }
  /// Accumulated translation (empty when never translated).
  const Surface& offset() const noexcept { return offset_; }
  const Surface& modulation() const noexcept { return modulation_; }
  double radius() const noexcept { return radius_; }
  double alpha() const noexcept { return alpha_; }
  const std::optional<Mask>& mask() const noexcept { return mask_; }
  bool whole_space() const noexcept;
  bool empty() const noexcept;

  /// Lower/upper surfaces; zero off the mask.
  Surface lower() const;
  Surface upper() const;
  /// |(y - offset) - forecast| / s <= k at every mask cell, the same arithmetic
  /// as the nonconformity score.
  bool contains(const Surface& y) const;
  /// Cellwise version of contains; false off the mask.
  MaskArray contains_cells(const Surface& y) const;
  /// Volume between upper and lower surfaces, 2 k for a unit-integral
  /// modulation; +inf for the whole space and 0 for the empty band.
  double size() const;

  /// Same band moved by `shift`. Membership subtracts the shift from the
  /// candidate first, so it matches the untranslated test on y - shift bit for bit.
  ConformalBand translated(const Surface& shift) const;

 private:
  Surface center_;
  Surface offset_;
  Surface modulation_;
  double radius_;
  std::optional<Mask> mask_;
  double alpha_;
  double cell_weight_;
};

struct ConformalResult {
  ConformalBand band;
  std::vector<double> calibration;  // I2 order
  PermutationFamily family;
};

/// Full band construction for the next observation given its regressor.
ConformalResult conformal_band(const FtsDataset& ds, const SplitPlan& plan, const FarPredictor& predictor,
                               const PermutationFamily& fam, double alpha, const Surface& x_next,
                               const ConformalOptions& options = {});

}  // namespace surfcp
