#include "surfcp/pipeline.hpp"

#include <cmath>

#include "surfcp/parallel.hpp"

namespace surfcp {

Surface difference_offset(const Surface& raw_T, const Surface& raw_Tm1) {
  detail::check_shape(raw_T.rows(), raw_T.cols(), raw_Tm1.rows(), raw_Tm1.cols(), "back_transform_band");
  return 2.0 * raw_T - raw_Tm1;
}

FtsDataset second_difference(const FtsDataset& raw, Index lag) {
  if (lag < 1) fail(ErrorKind::argument, "pipeline", "second_difference", "lag must be positive");
  const Index t = raw.length();
  if (t < 2 * lag + 1) {
    fail(ErrorKind::argument, "pipeline", "second_difference",
         "series of length " + std::to_string(t) + " is too short for lag " + std::to_string(lag));
  }
  std::vector<Surface> frames;
  frames.reserve(static_cast<std::size_t>(t - 2 * lag));
  for (Index k = 0; k + 2 * lag < t; ++k) {
    const auto& f = raw.frames;
    frames.push_back(f[static_cast<std::size_t>(k + 2 * lag)] -
                     difference_offset(f[static_cast<std::size_t>(k + lag)], f[static_cast<std::size_t>(k)]));
  }
  FtsDataset out(raw.domain, std::move(frames), raw.mask);
  if (!raw.timestamps.empty()) {
    out.timestamps.assign(raw.timestamps.begin() + 2 * lag, raw.timestamps.end());
  }
  return out;
}

ConformalBand back_transform_band(const ConformalBand& band, const Surface& raw_T, const Surface& raw_Tm1) {
  return band.translated(difference_offset(raw_T, raw_Tm1));
}

void RollingConfig::validate(Index series_length) const {
  if (window < 3) fail(ErrorKind::argument, "pipeline", "rolling_run", "window must be at least 3");
  if (n_shifts < 1) fail(ErrorKind::argument, "pipeline", "rolling_run", "n_shifts must be positive");
  if (lag < 1) fail(ErrorKind::argument, "pipeline", "rolling_run", "lag must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0)) fail(ErrorKind::argument, "pipeline", "rolling_run", "alpha must lie in (0, 1]");
  const Index need = window + 2 * lag + n_shifts;
  if (series_length < need) {
    fail(ErrorKind::argument, "pipeline", "rolling_run",
         "series has " + std::to_string(series_length) + " frames, need " + std::to_string(need));
  }
}

Surface RollingReport::mean_width() const {
  if (n_ok == 0) return Surface::Zero(hits.rows(), hits.cols());
  return width_sum / static_cast<double>(n_ok);
}

Surface RollingReport::pointwise_coverage() const {
  if (n_ok == 0) return Surface::Zero(hits.rows(), hits.cols());
  return hits / static_cast<double>(n_ok);
}

std::uint64_t shift_seed(std::uint64_t master, Index shift) {
  return mix_seed(mix_seed(master) ^ static_cast<std::uint64_t>(shift));
}

namespace {

struct ShiftOutcome {
  RollingShift record;
  std::optional<ConformalBand> band;  // raw scale
  MaskArray hit_cells;
};

ShiftOutcome run_shift(const FtsDataset& raw, const RollingConfig& cfg, Index s) {
  ShiftOutcome out;
  out.record.shift = s;
  out.record.seed = shift_seed(cfg.seed, s);
  const Index lag = cfg.lag;
  const Index span = cfg.window + 2 * lag;
  try {
    std::vector<Surface> window_frames(raw.frames.begin() + s, raw.frames.begin() + s + span);
    const FtsDataset diff = second_difference(FtsDataset(raw.domain, std::move(window_frames), raw.mask), lag);

    const std::uint64_t split_seed = cfg.resplit_each_shift ? out.record.seed : mix_seed(cfg.seed);
    const Index l = make_split(cfg.window, cfg.split_ratio, cfg.split, 0).l();
    const SplitPlan plan = make_split_sized(cfg.window, l, cfg.split, split_seed);
    const FarPredictor predictor = fit(cfg.method, diff, plan.train, cfg.far);
    const PermutationFamily fam = make_permutation_family(plan.l(), cfg.block_size);
    const ConformalResult res =
        conformal_band(diff, plan, predictor, fam, cfg.alpha, diff.frames.back(), cfg.conformal);

    const auto test = static_cast<std::size_t>(s + span);
    const Surface& raw_t = raw.frames[test - static_cast<std::size_t>(lag)];
    const Surface& raw_tm = raw.frames[test - 2 * static_cast<std::size_t>(lag)];
    const Surface offset = difference_offset(raw_t, raw_tm);
    const Surface diff_test = raw.frames[test] - offset;
    ConformalBand raw_band = res.band.translated(offset);

    out.record.covered_differenced = res.band.contains(diff_test);
    out.record.covered = raw_band.contains(raw.frames[test]);
    out.record.band_size = raw_band.size();
    out.record.radius = raw_band.radius();
    out.hit_cells = raw_band.contains_cells(raw.frames[test]);
    out.band = std::move(raw_band);
  } catch (const std::exception& e) {
    out.record.failed = true;
    out.record.error = describe(e);
  }
  return out;
}

}  // namespace

RollingReport rolling_run(const FtsDataset& raw, const RollingConfig& cfg) {
  raw.validate();
  cfg.validate(raw.length());
  const Index n1 = raw.domain.n1();
  const Index n2 = raw.domain.n2();

  std::vector<ShiftOutcome> outcomes(static_cast<std::size_t>(cfg.n_shifts));
  parallel_for(outcomes.size(), cfg.threads, [&](std::size_t s) {
    outcomes[s] = run_shift(raw, cfg, static_cast<Index>(s));
  });

  RollingReport rep{{}, Surface::Zero(n1, n2), Surface::Zero(n1, n2), 0, std::numeric_limits<double>::quiet_NaN(),
                    {}, raw.domain, raw.mask};
  Index covered = 0;
  for (ShiftOutcome& o : outcomes) {
    if (!o.record.failed) {
      ++rep.n_ok;
      if (o.record.covered) ++covered;
      rep.hits += o.hit_cells.cast<double>().matrix();
      Surface width;
      if (o.band->whole_space()) {
        width = Surface::Constant(n1, n2, std::numeric_limits<double>::infinity());
      } else if (o.band->empty()) {
        width = Surface::Zero(n1, n2);
      } else {
        width = 2.0 * o.band->radius() * o.band->modulation();
      }
      rep.width_sum += apply_mask(width, raw.mask_ptr());
    }
    rep.shifts.push_back(std::move(o.record));
  }
  if (rep.n_ok > 0) {
    rep.coverage = static_cast<double>(covered) / static_cast<double>(rep.n_ok);
    rep.ci = cfg.interval == IntervalMethod::normal ? normal_interval(rep.coverage, rep.n_ok, cfg.confidence)
                                                    : clopper_pearson(covered, rep.n_ok, cfg.confidence);
  }
  return rep;
}

Mask elliptic_mask(const GridDomain& d) {
  MaskArray inside(d.n1(), d.n2());
  for (Index i = 0; i < d.n1(); ++i) {
    for (Index j = 0; j < d.n2(); ++j) {
      const double a = (d.u()[i] - 0.5) / 0.45;
      const double b = (d.v()[j] - 0.5) / 0.35;
      inside(i, j) = a * a + b * b <= 1.0;
    }
  }
  return Mask(std::move(inside));
}

FtsDataset synthetic_raw_series(const SyntheticRawConfig& cfg) {
  SimulationOutput sim = simulate_far1(cfg.simulation);
  const GridDomain& d = sim.data.domain;
  std::optional<Mask> mask;
  if (cfg.elliptic_mask) mask = elliptic_mask(d);
  const Mask* mp = mask ? &*mask : nullptr;

  const Index t = sim.data.length();
  std::vector<Surface> raw;
  raw.reserve(static_cast<std::size_t>(t + 2));
  raw.push_back(Surface::Zero(d.n1(), d.n2()));
  raw.push_back(Surface::Zero(d.n1(), d.n2()));
  for (Index k = 0; k < t; ++k) {
    const std::size_t n = raw.size();
    raw.push_back(apply_mask(2.0 * raw[n - 1] - raw[n - 2] + sim.data.frames[static_cast<std::size_t>(k)], mp));
  }
  return FtsDataset(d, std::move(raw), std::move(mask));
}

}  // namespace surfcp
