#include "surfcp/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace surfcp {

const char* to_string(SplitMode mode) noexcept {
  return mode == SplitMode::random ? "random" : "sequential";
}

SplitMode parse_split_mode(const std::string& name) {
  if (name == "random") return SplitMode::random;
  if (name == "sequential") return SplitMode::sequential;
  fail(ErrorKind::argument, "conformal", "parse_split_mode", "unknown split mode '" + name + "'");
}

namespace {

Index training_size(Index usable, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    fail(ErrorKind::argument, "conformal", "make_split", "split ratio must lie in (0, 1)");
  }
  return static_cast<Index>(std::llround(ratio * static_cast<double>(usable)));
}

Index usable_frames(Index length, Index burn_in) {
  if (length < 3) fail(ErrorKind::argument, "conformal", "make_split", "need at least 3 frames");
  if (burn_in < 1 || burn_in >= length) {
    fail(ErrorKind::argument, "conformal", "make_split", "burn-in must leave usable frames");
  }
  return length - burn_in;
}

}  // namespace

SplitPlan make_split_sized(Index length, Index calibration_size, SplitMode mode, std::uint64_t seed,
                           Index burn_in) {
  const Index usable = usable_frames(length, burn_in);
  const Index l = calibration_size;
  const Index m = usable - l;
  if (l < 1 || m < 1) {
    fail(ErrorKind::argument, "conformal", "make_split",
         "split leaves an empty set (m=" + std::to_string(m) + ", l=" + std::to_string(l) + ")");
  }
  std::vector<Index> order(static_cast<std::size_t>(usable));
  std::iota(order.begin(), order.end(), burn_in);
  if (mode == SplitMode::random) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  SplitPlan plan;
  plan.train.assign(order.begin(), order.begin() + m);
  plan.calibration.assign(order.begin() + m, order.end());
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.calibration.begin(), plan.calibration.end());
  plan.mode = mode;
  plan.seed = seed;
  plan.burn_in = burn_in;
  return plan;
}

SplitPlan make_split(Index length, double ratio, SplitMode mode, std::uint64_t seed, Index burn_in) {
  const Index usable = usable_frames(length, burn_in);
  return make_split_sized(length, usable - training_size(usable, ratio), mode, seed, burn_in);
}

Index calibration_size_for_blocks(Index length, double ratio, std::span<const Index> block_sizes,
                                  double alpha, Index burn_in) {
  const Index usable = usable_frames(length, burn_in);
  const Index nominal = usable - training_size(usable, ratio);
  if (block_sizes.empty()) return nominal;
  Index step = 1;
  for (Index b : block_sizes) {
    if (b < 1) fail(ErrorKind::argument, "conformal", "calibration_size_for_blocks", "block size must be >= 1");
    step = std::lcm(step, b);
  }
  for (Index l = std::max<Index>(nominal, 1); usable - l >= 2; ++l) {
    if ((l + 1) % step != 0) continue;
    bool finite = true;
    for (Index b : block_sizes) {
      const Index fam = (l + 1) / b;
      if (radius_rank(fam, alpha) > fam - 1) finite = false;
    }
    if (finite) return l;
  }
  fail(ErrorKind::argument, "conformal", "calibration_size_for_blocks",
       "no calibration size fits these block sizes and alpha with at least 2 training frames");
}

PermutationFamily make_permutation_family(Index l, Index b) {
  if (l < 1) fail(ErrorKind::argument, "conformal", "make_permutation_family", "calibration set is empty");
  if (b < 1 || (l + 1) % b != 0) {
    fail(ErrorKind::argument, "conformal", "make_permutation_family",
         "block size " + std::to_string(b) + " does not divide l + 1 = " + std::to_string(l + 1));
  }
  PermutationFamily fam;
  fam.l = l;
  fam.b = b;
  const Index count = (l + 1) / b;
  fam.maps.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    const Index shift = i * b;
    std::vector<Index> map(static_cast<std::size_t>(l + 1));
    for (Index j = 0; j <= l; ++j) {
      map[static_cast<std::size_t>(j)] = (j + shift <= l) ? j + shift : j + shift - l - 1;
    }
    fam.maps.push_back(std::move(map));
  }
  return fam;
}

Surface modulation_function(const FtsDataset& ds, const SplitPlan& plan, const FarPredictor& predictor,
                            const ConformalOptions& options) {
  const Mask* mask = ds.mask_ptr();
  Surface sd;
  if (options.modulation == ModulationKind::data_std) {
    sd = pointwise_std(ds, plan.train);
  } else {
    if (plan.train.size() < 2) {
      fail(ErrorKind::argument, "conformal", "modulation_function", "need at least 2 training frames");
    }
    std::vector<Surface> residuals;
    for (Index t : plan.train) {
      if (t < 1) fail(ErrorKind::argument, "conformal", "modulation_function", "training frame without predecessor");
      residuals.push_back(apply_mask(ds.frames[static_cast<std::size_t>(t)], mask) -
                          predictor.predict(ds.frames[static_cast<std::size_t>(t - 1)]));
    }
    FtsDataset res(ds.domain, std::move(residuals), ds.mask);
    std::vector<Index> all(res.frames.size());
    std::iota(all.begin(), all.end(), Index{0});
    sd = pointwise_std(res, all);
  }

  const double top = mask ? mask->inside().select(sd.array(), 0.0).maxCoeff() : sd.maxCoeff();
  if (!(top > 0.0) || !std::isfinite(top)) {
    if (!options.uniform_if_degenerate) {
      fail(ErrorKind::degenerate, "conformal", "modulation_function",
           "training frames show no variability on the domain");
    }
    sd.setOnes();
  } else {
    sd = sd.cwiseMax(1e-8 * top);
  }
  sd = apply_mask(sd, mask);
  return sd / integral(sd, ds.domain, mask);
}

double nonconformity_score(const Surface& y, const Surface& forecast, const Surface& modulation, const Mask* mask) {
  detail::check_shape(y.rows(), y.cols(), forecast.rows(), forecast.cols(), "nonconformity_score");
  detail::check_shape(y.rows(), y.cols(), modulation.rows(), modulation.cols(), "nonconformity_score");
  if (mask) detail::check_shape(mask->rows(), mask->cols(), y.rows(), y.cols(), "nonconformity_score");
  double worst = 0.0;
  for (Index i = 0; i < y.rows(); ++i) {
    for (Index j = 0; j < y.cols(); ++j) {
      if (mask && !(*mask)(i, j)) continue;
      const double s = modulation(i, j);
      if (!(s > 0.0)) {
        fail(ErrorKind::argument, "conformal", "nonconformity_score", "modulation must be positive on the mask");
      }
      worst = std::max(worst, std::abs(y(i, j) - forecast(i, j)) / s);
    }
  }
  return worst;
}

std::vector<double> calibration_scores(const FtsDataset& ds, const SplitPlan& plan, const FarPredictor& predictor,
                                       const Surface& modulation) {
  std::vector<double> out;
  out.reserve(plan.calibration.size());
  for (Index t : plan.calibration) {
    if (t < 1 || t >= ds.length()) {
      fail(ErrorKind::argument, "conformal", "calibration_scores", "calibration index without predecessor");
    }
    const Surface forecast = predictor.predict(ds.frames[static_cast<std::size_t>(t - 1)]);
    out.push_back(nonconformity_score(ds.frames[static_cast<std::size_t>(t)], forecast, modulation, ds.mask_ptr()));
  }
  return out;
}

std::vector<double> permutation_scores(std::span<const double> calibration, const PermutationFamily& fam) {
  if (static_cast<Index>(calibration.size()) != fam.l) {
    fail(ErrorKind::dimension, "conformal", "permutation_scores", "score count differs from the family's l");
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(fam.size() - 1));
  for (Index i = 1; i < fam.size(); ++i) {
    out.push_back(calibration[static_cast<std::size_t>(fam.source_of_new_slot(i))]);
  }
  return out;
}

Index radius_rank(Index family_size, double alpha, RadiusRule rule) {
  if (!(alpha > 0.0 && alpha <= 1.0)) fail(ErrorKind::argument, "conformal", "band_radius", "alpha must lie in (0, 1]");
  if (family_size < 1) fail(ErrorKind::argument, "conformal", "band_radius", "empty permutation family");
  if (rule == RadiusRule::printed) {
    return static_cast<Index>(std::ceil(static_cast<double>(family_size + 1) * (1.0 - alpha)));
  }
  // Largest x with x / |Pi| <= alpha, using the same arithmetic as p_value.
  Index x = 0;
  while (x < family_size && static_cast<double>(x + 1) / static_cast<double>(family_size) <= alpha) ++x;
  return family_size - x;
}

double band_radius(std::span<const double> calibration, const PermutationFamily& fam, double alpha, RadiusRule rule) {
  std::vector<double> perm = permutation_scores(calibration, fam);
  const Index rank = radius_rank(fam.size(), alpha, rule);
  if (rank <= 0) return -std::numeric_limits<double>::infinity();
  if (rank > static_cast<Index>(perm.size())) return std::numeric_limits<double>::infinity();
  std::sort(perm.begin(), perm.end());
  return perm[static_cast<std::size_t>(rank - 1)];
}

double p_value(double candidate_score, std::span<const double> calibration, const PermutationFamily& fam) {
  const std::vector<double> perm = permutation_scores(calibration, fam);
  const auto at_least = std::count_if(perm.begin(), perm.end(), [&](double s) { return s >= candidate_score; });
  return static_cast<double>(1 + at_least) / static_cast<double>(fam.size());
}

ConformalBand::ConformalBand(Surface center, Surface modulation, double radius, std::optional<Mask> mask,
                             double alpha, const GridDomain& domain)
    : center_(std::move(center)),
      modulation_(std::move(modulation)),
      radius_(radius),
      mask_(std::move(mask)),
      alpha_(alpha),
      cell_weight_(domain.cell_weight()) {
  detail::check_shape(center_.rows(), center_.cols(), domain.n1(), domain.n2(), "ConformalBand");
  detail::check_shape(modulation_.rows(), modulation_.cols(), domain.n1(), domain.n2(), "ConformalBand");
}

bool ConformalBand::whole_space() const noexcept { return std::isinf(radius_) && radius_ > 0.0; }
bool ConformalBand::empty() const noexcept { return std::isinf(radius_) && radius_ < 0.0; }

Surface ConformalBand::center() const {
  const Mask* m = mask_ ? &*mask_ : nullptr;
  return offset_.size() == 0 ? apply_mask(center_, m) : apply_mask(center_ + offset_, m);
}

Surface ConformalBand::lower() const {
  const Mask* m = mask_ ? &*mask_ : nullptr;
  return apply_mask(center() - radius_ * modulation_, m);
}

Surface ConformalBand::upper() const {
  const Mask* m = mask_ ? &*mask_ : nullptr;
  return apply_mask(center() + radius_ * modulation_, m);
}

MaskArray ConformalBand::contains_cells(const Surface& y) const {
  detail::check_shape(y.rows(), y.cols(), center_.rows(), center_.cols(), "contains");
  MaskArray out(y.rows(), y.cols());
  const bool shifted = offset_.size() != 0;
  for (Index i = 0; i < y.rows(); ++i) {
    for (Index j = 0; j < y.cols(); ++j) {
      if (mask_ && !(*mask_)(i, j)) {
        out(i, j) = false;
      } else if (whole_space()) {
        out(i, j) = true;
      } else if (empty()) {
        out(i, j) = false;
      } else {
        const double yy = shifted ? y(i, j) - offset_(i, j) : y(i, j);
        out(i, j) = std::abs(yy - center_(i, j)) / modulation_(i, j) <= radius_;
      }
    }
  }
  return out;
}

bool ConformalBand::contains(const Surface& y) const {
  detail::check_shape(y.rows(), y.cols(), center_.rows(), center_.cols(), "contains");
  if (whole_space()) return true;
  if (empty()) return false;
  const bool shifted = offset_.size() != 0;
  for (Index i = 0; i < y.rows(); ++i) {
    for (Index j = 0; j < y.cols(); ++j) {
      if (mask_ && !(*mask_)(i, j)) continue;
      const double yy = shifted ? y(i, j) - offset_(i, j) : y(i, j);
      if (!(std::abs(yy - center_(i, j)) / modulation_(i, j) <= radius_)) return false;
    }
  }
  return true;
}

double ConformalBand::size() const {
  if (whole_space()) return std::numeric_limits<double>::infinity();
  if (empty()) return 0.0;
  const double mass = mask_ ? cell_weight_ * mask_->inside().select(modulation_.array(), 0.0).sum()
                            : cell_weight_ * modulation_.sum();
  return 2.0 * radius_ * mass;
}

ConformalBand ConformalBand::translated(const Surface& shift) const {
  detail::check_shape(shift.rows(), shift.cols(), center_.rows(), center_.cols(), "back_transform_band");
  ConformalBand out = *this;
  out.offset_ = offset_.size() == 0 ? shift : Surface(offset_ + shift);
  return out;
}

ConformalResult conformal_band(const FtsDataset& ds, const SplitPlan& plan, const FarPredictor& predictor,
                               const PermutationFamily& fam, double alpha, const Surface& x_next,
                               const ConformalOptions& options) {
  if (fam.l != plan.l()) {
    fail(ErrorKind::argument, "conformal", "conformal_band", "permutation family does not match the calibration set");
  }
  Surface s = modulation_function(ds, plan, predictor, options);
  std::vector<double> cal = calibration_scores(ds, plan, predictor, s);
  const double radius = band_radius(cal, fam, alpha, options.radius_rule);
  ConformalBand band(predictor.predict(x_next), std::move(s), radius, ds.mask, alpha, ds.domain);
  return ConformalResult{std::move(band), std::move(cal), fam};
}

}  // namespace surfcp
