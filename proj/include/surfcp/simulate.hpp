#pragma once

// FAR(1) surfaces generated on a tensor-product basis, and the replication
// harness that measures coverage and size of the conformal bands.

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "surfcp/basis.hpp"
#include "surfcp/conformal.hpp"
#include "surfcp/far.hpp"
#include "surfcp/grid.hpp"

namespace surfcp {

struct InnovationConfig {
  /// Degrees of freedom of the multivariate t; +inf gives Gaussian draws.
  double df = 4.0;
  double scale_diag = 0.5;
  double scale_offdiag = 0.3;
  /// Explicit K x K scale matrix; overrides the diag/offdiag pattern.
  std::optional<Eigen::MatrixXd> scale;
  /// Multiplies every draw (0 switches the noise off).
  double multiplier = 1.0;
};

struct SimulationConfig {
  TensorBasis basis{BasisSystem1D(BasisKind::bspline_cubic, 5), BasisSystem1D(BasisKind::bspline_cubic, 5)};
  double psi_tilde_diag = 0.8;
  double psi_tilde_offdiag = 0.3;
  double psi_norm = 0.9;
  InnovationConfig innovation;
  Index n1 = 100;
  Index n2 = 100;
  /// Number of frames returned.
  Index length = 100;
  /// Discarded steps before the first returned frame.
  Index burn_in_steps = 50;
  std::uint64_t seed = 0;
  /// Coefficient state before warm-up; zero when absent.
  std::optional<Eigen::VectorXd> initial_state;

  void validate() const;
};

/// psi_norm * Psi_tilde / ||Psi_tilde||_F.
Eigen::MatrixXd make_psi_matrix(const SimulationConfig& cfg);

/// K x K innovation scale implied by cfg.innovation.
Eigen::MatrixXd innovation_scale(const SimulationConfig& cfg);

/// Multivariate Student t draws z sqrt(df / w), z ~ N(0, scale), w ~ chi2(df).
class MvtSampler {
 public:
  MvtSampler(const Eigen::MatrixXd& scale, double df);

  Eigen::VectorXd operator()(std::mt19937_64& rng) const;
  Index dimension() const noexcept { return factor_.rows(); }

 private:
  Eigen::MatrixXd factor_;  // symmetric square root of the scale
  double df_;
};

Eigen::VectorXd sample_mvt(const Eigen::MatrixXd& scale, double df, std::mt19937_64& rng);

struct SimulationOutput {
  FtsDataset data;
  TrueKernel kernel;             // coefficient operator Psi W
  Eigen::MatrixXd coefficients;  // length x K, row t generates frame t
};

/// y_t = (Psi W) y_{t-1} + e_t, W the basis Gram matrix on the grid; frames
/// are phi^T y_t on the unit midpoint grid.
SimulationOutput simulate_far1(const SimulationConfig& cfg);

// ---------------------------------------------------------------------------
// Coverage intervals

enum class IntervalMethod { normal, exact };

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Two-sided standard normal quantile for the given confidence (2.5758... at 0.99).
double normal_quantile_two_sided(double confidence);
/// p_hat +/- z sqrt(p_hat (1 - p_hat) / n), clipped to [0, 1].
Interval normal_interval(double p_hat, Index n, double confidence);
/// Clopper-Pearson interval for x successes in n trials.
Interval clopper_pearson(Index successes, Index n, double confidence);
/// P(X <= k) for X ~ Binomial(n, p).
double binomial_cdf(Index k, Index n, double p);
/// Central region [lo, hi] of Binomial(n, p) holding at least `confidence`
/// mass, returned as proportions lo / n and hi / n.
Interval binomial_acceptance_interval(Index n, double p, double confidence);

// ---------------------------------------------------------------------------
// Study harness

/// Reproducible 64-bit seed for (master, T, replication).
std::uint64_t replication_seed(std::uint64_t master, Index length, Index rep);
/// splitmix64 finalizer.
std::uint64_t mix_seed(std::uint64_t x);

struct StudyConfig {
  std::vector<FarMethod> methods{FarMethod::naive, FarMethod::concurrent, FarMethod::ek,
                                 FarMethod::ek_plus, FarMethod::var_scores, FarMethod::oracle};
  std::vector<Index> lengths{99};
  std::vector<Index> block_sizes{1};
  Index replications = 100;
  double alpha = 0.1;
  double split_ratio = 0.5;
  SplitMode split = SplitMode::random;
  /// Grow l so that l + 1 is a multiple of every block size (shared split).
  bool adjust_calibration_for_blocks = true;
  std::uint64_t seed = 0;
  SimulationConfig simulation;  // length and seed are set per replication
  FarOptions far;
  ConformalOptions conformal{RadiusRule::exact, ModulationKind::data_std, true};
  IntervalMethod interval = IntervalMethod::normal;
  double confidence = 0.99;
  unsigned threads = 0;
};

struct StudyRecord {
  FarMethod method = FarMethod::naive;
  Index length = 0;
  Index block_size = 1;
  Index rep = 0;
  bool covered = false;
  double band_size = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
};

struct StudyAggregate {
  FarMethod method = FarMethod::naive;
  Index length = 0;
  Index block_size = 1;
  Index n_reps = 0;
  Index n_failed = 0;
  double coverage = 0.0;
  Interval ci;
  double mean_size = 0.0;
  double median_size = 0.0;
};

struct StudyResult {
  std::vector<StudyRecord> records;       // ordered by (method, T, b, rep)
  std::vector<StudyAggregate> aggregates;  // ordered by (method, T, b)
};

/// One replication per (T, rep): simulate T + 1 frames, split the first T,
/// fit every method on I1, and test the band for frame T given frame T - 1.
StudyResult run_study(const StudyConfig& cfg);

/// Aggregates recomputed from per-replication records.
std::vector<StudyAggregate> aggregate_records(const std::vector<StudyRecord>& records,
                                              IntervalMethod method, double confidence);

}  // namespace surfcp
