#include "surfcp/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include "surfcp/parallel.hpp"

namespace surfcp {

void SimulationConfig::validate() const {
  if (!(psi_norm >= 0.0 && psi_norm < 1.0)) {
    fail(ErrorKind::argument, "simulate", "simulate_far1", "psi_norm must lie in [0, 1)");
  }
  if (!(innovation.df > 2.0)) {
    fail(ErrorKind::argument, "simulate", "simulate_far1", "innovation df must exceed 2");
  }
  if (!(innovation.multiplier >= 0.0)) {
    fail(ErrorKind::argument, "simulate", "simulate_far1", "innovation multiplier must be non-negative");
  }
  if (n1 < 2 || n2 < 2) fail(ErrorKind::argument, "simulate", "simulate_far1", "grid needs at least 2x2 points");
  if (length < 1) fail(ErrorKind::argument, "simulate", "simulate_far1", "length must be positive");
  if (burn_in_steps < 0) fail(ErrorKind::argument, "simulate", "simulate_far1", "negative warm-up");
  if (initial_state && initial_state->size() != basis.size()) {
    fail(ErrorKind::dimension, "simulate", "simulate_far1", "initial state does not match the basis size");
  }
}

Eigen::MatrixXd make_psi_matrix(const SimulationConfig& cfg) {
  const Index k = cfg.basis.size();
  Eigen::MatrixXd psi = Eigen::MatrixXd::Constant(k, k, cfg.psi_tilde_offdiag);
  psi.diagonal().setConstant(cfg.psi_tilde_diag);
  const double norm = psi.norm();
  if (!(norm > 0.0)) return Eigen::MatrixXd::Zero(k, k);
  return (cfg.psi_norm / norm) * psi;
}

Eigen::MatrixXd innovation_scale(const SimulationConfig& cfg) {
  const Index k = cfg.basis.size();
  if (cfg.innovation.scale) {
    if (cfg.innovation.scale->rows() != k || cfg.innovation.scale->cols() != k) {
      fail(ErrorKind::dimension, "simulate", "innovation_scale", "scale matrix does not match the basis size");
    }
    return *cfg.innovation.scale;
  }
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(k, k, cfg.innovation.scale_offdiag);
  s.diagonal().setConstant(cfg.innovation.scale_diag);
  return s;
}

MvtSampler::MvtSampler(const Eigen::MatrixXd& scale, double df) : df_(df) {
  if (scale.rows() != scale.cols()) fail(ErrorKind::dimension, "simulate", "sample_mvt", "scale must be square");
  if (!(df > 0.0)) fail(ErrorKind::argument, "simulate", "sample_mvt", "df must be positive");
  if (!(scale - scale.transpose()).isZero(1e-12 * std::max(1.0, scale.cwiseAbs().maxCoeff()))) {
    fail(ErrorKind::numerical, "simulate", "sample_mvt", "scale matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scale);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double top = std::max(0.0, ev.maxCoeff());
  if (ev.minCoeff() < -1e-10 * std::max(top, 1.0)) {
    fail(ErrorKind::numerical, "simulate", "sample_mvt", "scale matrix is not positive semi-definite");
  }
  factor_ = es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

Eigen::VectorXd MvtSampler::operator()(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(factor_.rows());
  for (Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  Eigen::VectorXd x = factor_ * z;
  if (std::isfinite(df_)) {
    std::chi_squared_distribution<double> chi2(df_);
    x *= std::sqrt(df_ / chi2(rng));
  }
  return x;
}

Eigen::VectorXd sample_mvt(const Eigen::MatrixXd& scale, double df, std::mt19937_64& rng) {
  return MvtSampler(scale, df)(rng);
}

SimulationOutput simulate_far1(const SimulationConfig& cfg) {
  cfg.validate();
  const GridDomain d = GridDomain::unit(cfg.n1, cfg.n2);
  const Index k = cfg.basis.size();
  const Eigen::MatrixXd phi = eval_basis(cfg.basis, d);
  const Eigen::MatrixXd a = make_psi_matrix(cfg) * gram_matrix(cfg.basis, d);
  const double mult = cfg.innovation.multiplier;
  const MvtSampler sampler(innovation_scale(cfg), cfg.innovation.df);
  std::mt19937_64 rng(cfg.seed);

  Eigen::VectorXd y = cfg.initial_state ? *cfg.initial_state : Eigen::VectorXd::Zero(k);
  auto step = [&] {
    y = a * y;
    if (mult > 0.0) y += mult * sampler(rng);
  };
  for (Index s = 0; s < cfg.burn_in_steps; ++s) step();

  Eigen::MatrixXd coefs(cfg.length, k);
  std::vector<Surface> frames;
  frames.reserve(static_cast<std::size_t>(cfg.length));
  for (Index t = 0; t < cfg.length; ++t) {
    step();
    coefs.row(t) = y.transpose();
    frames.push_back(unflatten(phi * y, cfg.n1, cfg.n2));
  }
  return SimulationOutput{FtsDataset(d, std::move(frames)), TrueKernel{cfg.basis, a}, std::move(coefs)};
}

// ---------------------------------------------------------------------------

double normal_quantile_two_sided(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    fail(ErrorKind::argument, "simulate", "normal_interval", "confidence must lie in (0, 1)");
  }
  const double tail = 0.5 * (1.0 - confidence);
  double lo = 0.0;
  double hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(mid / std::sqrt(2.0)) > tail ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Interval normal_interval(double p_hat, Index n, double confidence) {
  if (n < 1) fail(ErrorKind::argument, "simulate", "normal_interval", "n must be positive");
  const double half = normal_quantile_two_sided(confidence) * std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n));
  return {std::max(0.0, p_hat - half), std::min(1.0, p_hat + half)};
}

double binomial_cdf(Index k, Index n, double p) {
  if (n < 0 || !(p >= 0.0 && p <= 1.0)) fail(ErrorKind::argument, "simulate", "binomial_cdf", "invalid n or p");
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  if (p == 0.0) return 1.0;
  if (p == 1.0) return 0.0;
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  const double ln = std::lgamma(static_cast<double>(n) + 1.0);
  double sum = 0.0;
  for (Index i = 0; i <= k; ++i) {
    const double di = static_cast<double>(i);
    sum += std::exp(ln - std::lgamma(di + 1.0) - std::lgamma(static_cast<double>(n - i) + 1.0) + di * lp +
                    static_cast<double>(n - i) * lq);
  }
  return std::min(1.0, sum);
}

namespace {

// Root of a monotone function on [0, 1] by bisection; `increasing` gives the
// direction of f.
template <typename F>
double bisect_unit(F f, double target, bool increasing) {
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const bool below = increasing ? f(mid) < target : f(mid) > target;
    (below ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Interval clopper_pearson(Index successes, Index n, double confidence) {
  if (n < 1 || successes < 0 || successes > n) {
    fail(ErrorKind::argument, "simulate", "clopper_pearson", "need 0 <= successes <= n, n >= 1");
  }
  const double tail = 0.5 * (1.0 - confidence);
  Interval out{0.0, 1.0};
  if (successes > 0) {
    // P(X >= x | p) = tail, increasing in p.
    out.lower = bisect_unit([&](double p) { return 1.0 - binomial_cdf(successes - 1, n, p); }, tail, true);
  }
  if (successes < n) {
    // P(X <= x | p) = tail, decreasing in p.
    out.upper = bisect_unit([&](double p) { return binomial_cdf(successes, n, p); }, tail, false);
  }
  return out;
}

Interval binomial_acceptance_interval(Index n, double p, double confidence) {
  if (n < 1) fail(ErrorKind::argument, "simulate", "binomial_acceptance_interval", "n must be positive");
  const double tail = 0.5 * (1.0 - confidence);
  Index lo = 0;
  while (lo < n && binomial_cdf(lo, n, p) <= tail) ++lo;
  Index hi = lo;
  while (hi < n && 1.0 - binomial_cdf(hi, n, p) > tail) ++hi;
  const double dn = static_cast<double>(n);
  return {static_cast<double>(lo) / dn, static_cast<double>(hi) / dn};
}

// ---------------------------------------------------------------------------

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t replication_seed(std::uint64_t master, Index length, Index rep) {
  return mix_seed(mix_seed(mix_seed(master) ^ static_cast<std::uint64_t>(length)) ^ static_cast<std::uint64_t>(rep));
}

namespace {

struct RepOutcome {
  std::vector<StudyRecord> records;  // methods x block sizes
};

RepOutcome run_replication(const StudyConfig& cfg, Index length, Index rep) {
  const std::uint64_t seed = replication_seed(cfg.seed, length, rep);
  RepOutcome out;
  auto record = [&](FarMethod m, Index b) {
    StudyRecord r;
    r.method = m;
    r.length = length;
    r.block_size = b;
    r.rep = rep;
    r.seed = seed;
    return r;
  };
  auto fail_all = [&](const std::string& why) {
    out.records.clear();
    for (FarMethod m : cfg.methods) {
      for (Index b : cfg.block_sizes) {
        StudyRecord r = record(m, b);
        r.failed = true;
        r.error = why;
        out.records.push_back(std::move(r));
      }
    }
  };

  std::optional<SimulationOutput> sim;
  std::optional<SplitPlan> plan;
  try {
    SimulationConfig sc = cfg.simulation;
    sc.length = length + 1;
    sc.seed = seed;
    sim = simulate_far1(sc);
    Index l = 0;
    if (cfg.adjust_calibration_for_blocks) {
      l = calibration_size_for_blocks(length, cfg.split_ratio, cfg.block_sizes, cfg.alpha);
    } else {
      l = make_split(length, cfg.split_ratio, cfg.split, 0).l();
    }
    plan = make_split_sized(length, l, cfg.split, mix_seed(seed ^ 0x73706c6974ULL));
  } catch (const std::exception& e) {
    fail_all(describe(e));
    return out;
  }

  const FtsDataset& ds = sim->data;
  const Surface& x_next = ds.frames[static_cast<std::size_t>(length - 1)];
  const Surface& y_next = ds.frames[static_cast<std::size_t>(length)];
  for (FarMethod m : cfg.methods) {
    std::optional<FarPredictor> predictor;
    std::string fit_error;
    try {
      predictor = fit(m, ds, plan->train, cfg.far, &sim->kernel);
    } catch (const std::exception& e) {
      fit_error = describe(e);
    }
    for (Index b : cfg.block_sizes) {
      StudyRecord r = record(m, b);
      if (!predictor) {
        r.failed = true;
        r.error = fit_error;
      } else {
        try {
          const PermutationFamily fam = make_permutation_family(plan->l(), b);
          const ConformalResult res = conformal_band(ds, *plan, *predictor, fam, cfg.alpha, x_next, cfg.conformal);
          r.covered = res.band.contains(y_next);
          r.band_size = res.band.size();
        } catch (const std::exception& e) {
          r.failed = true;
          r.error = describe(e);
        }
      }
      out.records.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace

StudyResult run_study(const StudyConfig& cfg) {
  if (cfg.methods.empty() || cfg.lengths.empty() || cfg.block_sizes.empty()) {
    fail(ErrorKind::argument, "simulate", "run_study", "methods, T values and block sizes must be non-empty");
  }
  if (cfg.replications < 1) fail(ErrorKind::argument, "simulate", "run_study", "need at least one replication");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) fail(ErrorKind::argument, "simulate", "run_study", "alpha must lie in (0, 1)");
  for (Index t : cfg.lengths) {
    if (t < 3) fail(ErrorKind::argument, "simulate", "run_study", "every T must be at least 3");
  }

  const auto n_lengths = cfg.lengths.size();
  const auto reps = static_cast<std::size_t>(cfg.replications);
  std::vector<RepOutcome> outcomes(n_lengths * reps);
  parallel_for(outcomes.size(), cfg.threads, [&](std::size_t task) {
    outcomes[task] = run_replication(cfg, cfg.lengths[task / reps], static_cast<Index>(task % reps));
  });

  // Reorder to (method, T, b, rep).
  StudyResult result;
  const std::size_t nb = cfg.block_sizes.size();
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    for (std::size_t ti = 0; ti < n_lengths; ++ti) {
      for (std::size_t bi = 0; bi < nb; ++bi) {
        for (std::size_t r = 0; r < reps; ++r) {
          result.records.push_back(outcomes[ti * reps + r].records[mi * nb + bi]);
        }
      }
    }
  }
  result.aggregates = aggregate_records(result.records, cfg.interval, cfg.confidence);
  return result;
}

std::vector<StudyAggregate> aggregate_records(const std::vector<StudyRecord>& records, IntervalMethod method,
                                              double confidence) {
  using Key = std::tuple<FarMethod, Index, Index>;
  std::vector<Key> order;
  std::map<Key, std::vector<const StudyRecord*>> groups;
  for (const StudyRecord& r : records) {
    const Key key{r.method, r.length, r.block_size};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }

  std::vector<StudyAggregate> out;
  for (const Key& key : order) {
    const auto& group = groups[key];
    StudyAggregate a;
    std::tie(a.method, a.length, a.block_size) = key;
    a.n_reps = static_cast<Index>(group.size());
    std::vector<double> sizes;
    Index covered = 0;
    for (const StudyRecord* r : group) {
      if (r->failed) {
        ++a.n_failed;
        continue;
      }
      sizes.push_back(r->band_size);
      if (r->covered) ++covered;
    }
    const auto ok = static_cast<Index>(sizes.size());
    if (ok == 0) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      a.coverage = a.mean_size = a.median_size = nan;
      a.ci = {nan, nan};
    } else {
      a.coverage = static_cast<double>(covered) / static_cast<double>(ok);
      a.ci = method == IntervalMethod::normal ? normal_interval(a.coverage, ok, confidence)
                                              : clopper_pearson(covered, ok, confidence);
      a.mean_size = std::accumulate(sizes.begin(), sizes.end(), 0.0) / static_cast<double>(ok);
      std::sort(sizes.begin(), sizes.end());
      const auto h = sizes.size() / 2;
      a.median_size = sizes.size() % 2 == 1 ? sizes[h] : 0.5 * (sizes[h - 1] + sizes[h]);
    }
    out.push_back(a);
  }
  return out;
}

}  // namespace surfcp
