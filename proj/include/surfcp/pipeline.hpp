#pragma once

// Case-study machinery: second differencing of a raw surface series, bands
// mapped back to the raw scale, and the rolling-window backtest with
// pointwise hit and width maps.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "surfcp/conformal.hpp"
#include "surfcp/far.hpp"
#include "surfcp/grid.hpp"
#include "surfcp/simulate.hpp"

namespace surfcp {

/// frame k = raw_{k+2 lag} - (2 raw_{k+lag} - raw_k). Length T - 2 lag.
/// Timestamps, when present, follow the last frame of each stencil.
FtsDataset second_difference(const FtsDataset& raw, Index lag = 1);

/// The additive term 2 raw_T - raw_Tm1 that maps a differenced value back
/// to the raw scale; second_difference subtracts exactly this surface.
Surface difference_offset(const Surface& raw_T, const Surface& raw_Tm1);

/// Band for the raw frame: center moved by 2 raw_T - raw_Tm1, radius and
/// modulation unchanged.
ConformalBand back_transform_band(const ConformalBand& band, const Surface& raw_T, const Surface& raw_Tm1);

struct RollingConfig {
  Index window = 99;
  Index n_shifts = 1000;
  double alpha = 0.1;
  Index block_size = 1;
  FarMethod method = FarMethod::ek;
  double split_ratio = 0.5;
  SplitMode split = SplitMode::random;
  /// Draw a new split for every shift; otherwise every shift reuses the
  /// split drawn from the master seed.
  bool resplit_each_shift = true;
  std::uint64_t seed = 0;
  Index lag = 1;
  FarOptions far;
  ConformalOptions conformal{RadiusRule::exact, ModulationKind::data_std, true};
  IntervalMethod interval = IntervalMethod::normal;
  double confidence = 0.99;
  unsigned threads = 0;

  void validate(Index series_length) const;
};

struct RollingShift {
  Index shift = 0;
  bool covered = false;
  /// Membership of the differenced test frame in the differenced-scale band.
  bool covered_differenced = false;
  double band_size = std::numeric_limits<double>::quiet_NaN();
  double radius = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
};

struct RollingReport {
  std::vector<RollingShift> shifts;
  /// Number of successful shifts whose raw value lay inside the band, per cell.
  Surface hits;
  /// Sum over successful shifts of upper - lower, per cell.
  Surface width_sum;
  Index n_ok = 0;
  double coverage = std::numeric_limits<double>::quiet_NaN();
  Interval ci;
  GridDomain domain;
  std::optional<Mask> mask;

  Surface mean_width() const;
  /// hits / n_ok.
  Surface pointwise_coverage() const;
};

/// Per-shift seed derived from the master seed.
std::uint64_t shift_seed(std::uint64_t master, Index shift);

/// Shift s uses raw frames s .. s + window + 2 lag - 1, differenced to a
/// window of length `window`, and tests raw frame s + window + 2 lag.
/// Requires series length >= window + 2 lag + n_shifts.
RollingReport rolling_run(const FtsDataset& raw, const RollingConfig& cfg);

struct SyntheticRawConfig {
  SimulationConfig simulation;  // drives the differenced series
  /// Restrict the domain to the ellipse ((u - .5)/.45)^2 + ((v - .5)/.35)^2 <= 1.
  bool elliptic_mask = true;
};

/// Raw series whose second differences follow FAR(1): raw_0 = raw_1 = 0 and
/// raw_t = 2 raw_{t-1} - raw_{t-2} + d_t, zero off the mask.
FtsDataset synthetic_raw_series(const SyntheticRawConfig& cfg);

Mask elliptic_mask(const GridDomain& d);

}  // namespace surfcp
