#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "surfcp/basis.hpp"
#include "surfcp/far.hpp"
#include "surfcp/simulate.hpp"
#include "test_support.hpp"

namespace surfcp {
namespace {

using testing::iota_indices;
using testing::random_dataset;
using testing::random_surface;

constexpr double kPi = 3.14159265358979323846;

TEST(ParseFarMethod, CliSpellings) {
  EXPECT_EQ(parse_far_method("ek+"), FarMethod::ek_plus);
  EXPECT_EQ(parse_far_method("var"), FarMethod::var_scores);
  EXPECT_STREQ(to_string(FarMethod::ek_plus), "ek+");
  EXPECT_SURFCP_ERROR(parse_far_method("arima"), ErrorKind::argument);
}

TEST(Fit, RejectsBadTrainingSets) {
  const FtsDataset ds = random_dataset(5, 5, 10, 1);
  EXPECT_SURFCP_ERROR(fit(FarMethod::ek, ds, std::vector<Index>{0, 1, 2}), ErrorKind::argument);
  EXPECT_SURFCP_ERROR(fit(FarMethod::ek, ds, std::vector<Index>{3}), ErrorKind::argument);
  EXPECT_SURFCP_ERROR(fit(FarMethod::oracle, ds, std::vector<Index>{1, 2}), ErrorKind::argument);
  EXPECT_SURFCP_ERROR(fit(FarMethod::naive, ds, std::vector<Index>{2, 2}), ErrorKind::argument);
}

TEST(Fit, ZeroTrainingDataIsDegenerate) {
  const Surface z = Surface::Zero(4, 4);
  const FtsDataset ds(GridDomain::unit(4, 4), {z, z, z, z});
  for (FarMethod m : {FarMethod::ek, FarMethod::ek_plus, FarMethod::var_scores}) {
    EXPECT_SURFCP_ERROR(fit(m, ds, std::vector<Index>{1, 2, 3}), ErrorKind::degenerate);
  }
}

TEST(Naive, PredictReturnsInput) {
  const FtsDataset ds = random_dataset(5, 6, 6, 2);
  const FarPredictor p = fit(FarMethod::naive, ds, iota_indices(1, 6));
  std::mt19937_64 rng(3);
  const Surface x = random_surface(5, 6, rng);
  EXPECT_EQ(predict(p, x), x);
}

TEST(Concurrent, PersistentPairsGiveUnitCoefficient) {
  // Each training frame repeats its predecessor: frames 2k and 2k-1 coincide.
  std::mt19937_64 rng(4);
  std::vector<Surface> frames{random_surface(4, 5, rng)};
  for (int k = 0; k < 6; ++k) {
    const Surface f = random_surface(4, 5, rng);
    frames.push_back(f);
    frames.push_back(f);
  }
  const FtsDataset ds(GridDomain::unit(4, 5), std::move(frames));
  const FarPredictor p = fit(FarMethod::concurrent, ds, std::vector<Index>{2, 4, 6, 8, 10, 12});
  EXPECT_LT((p.concurrent_coefficients().array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(Concurrent, ZeroCoefficientPredictsTheMean) {
  std::mt19937_64 rng(5);
  const Surface a = random_surface(3, 3, rng);
  const Surface b = random_surface(3, 3, rng);
  const Surface mean = pointwise_mean(FtsDataset(GridDomain::unit(3, 3), {a, b}), std::vector<Index>{0, 1});
  const FtsDataset ds(GridDomain::unit(3, 3), {mean, a, mean, b});
  const FarPredictor p = fit(FarMethod::concurrent, ds, std::vector<Index>{1, 3});
  EXPECT_EQ(p.concurrent_coefficients().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(predict(p, random_surface(3, 3, rng)).isApprox(mean, 1e-15));
}

TEST(Ek, RankOneDataReducesToScalarRatio) {
  const GridDomain d = GridDomain::unit(10, 8);
  std::mt19937_64 rng(6);
  Surface xi = random_surface(10, 8, rng);
  xi /= std::sqrt(squared_norm(xi, d));
  std::normal_distribution<double> nd;
  std::vector<double> a(12);
  for (auto& v : a) v = nd(rng);
  std::vector<Surface> frames;
  for (double v : a) frames.push_back(v * xi);
  const FtsDataset ds(d, std::move(frames));
  const std::vector<Index> train{2, 3, 5, 7, 8, 11};

  double abar = 0.0;
  for (Index t : train) abar += a[t];
  abar /= 6.0;
  double c1 = 0.0, c0 = 0.0;
  for (Index t : train) {
    c1 += (a[t - 1] - abar) * (a[t] - abar) / 6.0;
    c0 += (a[t] - abar) * (a[t] - abar) / 6.0;
  }
  const FarPredictor p = fit(FarMethod::ek, ds, train, FarOptions{ComponentSelector::fixed(1)});
  ASSERT_EQ(p.transfer().rows(), 1);
  EXPECT_NEAR(p.transfer()(0, 0), c1 / c0, 1e-10);
  const double b = 0.37;
  EXPECT_LT((predict(p, Surface(b * xi)) - Surface((abar + (c1 / c0) * (b - abar)) * xi)).cwiseAbs().maxCoeff(), 1e-10);

  // ek+ shifts the eigenvalue by 1.5 (lambda_1 + lambda_2), lambda_2 = 0 here.
  const FarPredictor q = fit(FarMethod::ek_plus, ds, train, FarOptions{ComponentSelector::fixed(1)});
  EXPECT_NEAR(q.transfer()(0, 0), c1 / (c0 + 1.5 * c0), 1e-10);
  // The printed weighting multiplies by lambda.
  FarOptions printed{ComponentSelector::fixed(1)};
  printed.weighting = EigenWeighting::printed;
  EXPECT_NEAR(fit(FarMethod::ek, ds, train, printed).transfer()(0, 0), c1 * c0, 1e-10);
}

TEST(Ek, MatchesDenseKernelQuadrature) {
  const GridDomain d = GridDomain::unit(6, 6);
  const FtsDataset ds = random_dataset(6, 6, 20, 7);
  const FarPredictor p = fit(FarMethod::ek, ds, iota_indices(1, 20), FarOptions{ComponentSelector::fixed(4)});
  const FpcaResult& fp = *p.fpca();
  const Eigen::MatrixXd& xi = fp.eigenfunctions;
  // psi(s; r) = sum_ij transfer_ij xi_i(s) xi_j(r) on the 36 x 36 grid.
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(36, 36);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) kernel += p.transfer()(i, j) * xi.col(i) * xi.col(j).transpose();
  std::mt19937_64 rng(8);
  const Surface x = random_surface(6, 6, rng);
  const Surface centered = x - p.train_mean();
  Surface expected = p.train_mean();
  for (Index s = 0; s < 36; ++s) {
    double acc = 0.0;
    for (Index r = 0; r < 36; ++r) acc += kernel(s, r) * centered.data()[r];
    expected.data()[s] += d.cell_weight() * acc;
  }
  EXPECT_LT((predict(p, x) - expected).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(VarScores, RecoversRotationFromNoiselessScores) {
  const GridDomain d = GridDomain::unit(16, 16);
  const TensorBasis tb(BasisSystem1D(BasisKind::fourier, 3), BasisSystem1D(BasisKind::fourier, 1));
  const auto phi = basis_surfaces(tb, d);  // constant, sqrt2 sin, sqrt2 cos in u
  const double theta = 2.0 * kPi / 8.0;
  Eigen::Matrix2d b;
  b << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  std::vector<Surface> frames;
  Eigen::Vector2d s(1.0, 0.4);
  for (int t = 0; t < 10; ++t) {
    frames.push_back(s[0] * phi[1] + s[1] * phi[2]);
    s = b * s;
  }
  const FtsDataset ds(d, std::move(frames));
  // I1 covers a full period, so the training mean is zero.
  const FarPredictor p = fit(FarMethod::var_scores, ds, iota_indices(1, 9), FarOptions{ComponentSelector::fixed(2)});
  const Eigen::MatrixXd& xi = p.fpca()->eigenfunctions;
  Eigen::Matrix2d rot;
  for (Index j = 0; j < 2; ++j)
    for (Index k = 0; k < 2; ++k) rot(j, k) = d.cell_weight() * flatten(phi[1 + j]).dot(xi.col(k));
  const Eigen::Matrix2d recovered = rot * p.transfer() * rot.transpose();
  EXPECT_LT((recovered - b).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(VarScores, MatchesOlsOnScores) {
  const FtsDataset ds = random_dataset(7, 7, 30, 9);
  const auto train = iota_indices(1, 30);
  const FarPredictor p = fit(FarMethod::var_scores, ds, train, FarOptions{ComponentSelector::fixed(3)});
  const FpcaResult& fp = *p.fpca();
  Eigen::MatrixXd sx(29, 3), sy(29, 3);
  for (Index r = 0; r < 29; ++r) {
    const Index t = train[r];
    sx.row(r) = project_scores(Surface(ds.frames[t - 1] - p.train_mean()), fp, ds.domain).transpose();
    sy.row(r) = project_scores(Surface(ds.frames[t] - p.train_mean()), fp, ds.domain).transpose();
  }
  const Eigen::MatrixXd ols = (sx.transpose() * sx).ldlt().solve(sx.transpose() * sy).transpose();
  EXPECT_LT((p.transfer() - ols).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(VarScores, RepeatedRegressorIsSingular) {
  std::mt19937_64 rng(10);
  const Surface lag = random_surface(5, 5, rng);
  const FtsDataset ds(GridDomain::unit(5, 5),
                      {lag, lag, random_surface(5, 5, rng), lag, random_surface(5, 5, rng), lag, random_surface(5, 5, rng)});
  // Training frames 2, 4, 6 all regress on the same surface.
  EXPECT_SURFCP_ERROR(fit(FarMethod::var_scores, ds, std::vector<Index>{2, 4, 6}, FarOptions{ComponentSelector::fixed(2)}),
                      ErrorKind::singular);
}

TEST(Predict, LinearInTheCenteredInput) {
  const FtsDataset ds = random_dataset(6, 5, 25, 11);
  SimulationConfig sc;
  sc.n1 = 6;
  sc.n2 = 5;
  sc.basis = TensorBasis(BasisSystem1D(BasisKind::fourier, 2), BasisSystem1D(BasisKind::fourier, 2));
  sc.length = 3;
  const SimulationOutput sim = simulate_far1(sc);
  std::mt19937_64 rng(12);
  const Surface x1 = random_surface(6, 5, rng), x2 = random_surface(6, 5, rng);
  const double a = 0.7, b = -1.3;
  for (FarMethod m : {FarMethod::naive, FarMethod::concurrent, FarMethod::ek, FarMethod::ek_plus, FarMethod::var_scores,
                      FarMethod::oracle}) {
    const FarPredictor p = fit(m, ds, iota_indices(1, 25), FarOptions{}, &sim.kernel);
    const Surface& mu = p.train_mean();
    const Surface lhs = predict(p, Surface(mu + a * (x1 - mu) + b * (x2 - mu))) - mu;
    const Surface rhs = a * (predict(p, x1) - mu) + b * (predict(p, x2) - mu);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10) << to_string(m);
    EXPECT_LT((predict(p, mu) - mu).cwiseAbs().maxCoeff(), 1e-12) << to_string(m);
  }
}

TEST(Predict, ZeroOffMaskAndShapeChecked) {
  FtsDataset ds = random_dataset(6, 6, 12, 13, testing::half_mask(6, 6));
  std::mt19937_64 rng(14);
  const Surface x = random_surface(6, 6, rng);
  for (FarMethod m : {FarMethod::naive, FarMethod::concurrent, FarMethod::ek, FarMethod::var_scores}) {
    const FarPredictor p = fit(m, ds, iota_indices(1, 12));
    EXPECT_EQ(predict(p, x).bottomRows(3).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_SURFCP_ERROR(predict(p, Surface(Surface::Zero(5, 6))), ErrorKind::dimension);
  }
}

TEST(Fit, IsolatedFromCalibrationFrames) {
  FtsDataset ds = random_dataset(6, 6, 20, 15);
  const std::vector<Index> train{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::mt19937_64 rng(16);
  const Surface x = random_surface(6, 6, rng);
  for (FarMethod m : {FarMethod::concurrent, FarMethod::ek, FarMethod::ek_plus, FarMethod::var_scores}) {
    const Surface before = predict(fit(m, ds, train), x);
    FtsDataset shuffled = ds;
    std::shuffle(shuffled.frames.begin() + 11, shuffled.frames.end(), rng);
    shuffled.frames[15] = random_surface(6, 6, rng);
    const Surface after = predict(fit(m, shuffled, train), x);
    EXPECT_EQ(before, after) << to_string(m);
  }
}

TEST(Oracle, ReproducesNoiselessSteps) {
  SimulationConfig sc;
  sc.n1 = 30;
  sc.n2 = 30;
  sc.length = 8;
  sc.burn_in_steps = 0;
  sc.innovation.multiplier = 0.0;
  sc.initial_state = Eigen::VectorXd::LinSpaced(25, -1.0, 2.0);
  const SimulationOutput sim = simulate_far1(sc);
  const FarPredictor p = make_oracle(sim.kernel, sim.data.domain);
  for (Index t = 0; t + 1 < sim.data.length(); ++t) {
    const Surface next = predict(p, sim.data.frames[t]);
    EXPECT_LT((next - sim.data.frames[t + 1]).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, next.cwiseAbs().maxCoeff()));
  }
}

TEST(Lag1Covariance, OrthogonalInputGivesZero) {
  const GridDomain d = GridDomain::unit(8, 8);
  const TensorBasis tb(BasisSystem1D(BasisKind::fourier, 3), BasisSystem1D(BasisKind::fourier, 3));
  const auto phi = basis_surfaces(tb, d);
  const FtsDataset ds(d, {phi[0], Surface(2 * phi[1]), Surface(phi[0] - phi[1]), phi[3]});
  for (auto v : {Gamma1Variant::trim_forward, Gamma1Variant::trim_backward, Gamma1Variant::burn_in}) {
    const std::vector<Index> idx{1, 2};
    EXPECT_LT(lag1_covariance_apply(ds, idx, v, phi[8]).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Lag1Covariance, VariantsMatchLoopSums) {
  const GridDomain d = GridDomain::unit(5, 5);
  const FtsDataset ds = random_dataset(5, 5, 12, 17);
  std::mt19937_64 rng(18);
  const Surface x = random_surface(5, 5, rng);
  const std::vector<Index> idx{2, 3, 4, 5, 6, 7};  // contiguous, m = 6
  const Index m = 6;
  Surface fwd = Surface::Zero(5, 5), bwd = Surface::Zero(5, 5), burn = Surface::Zero(5, 5);
  for (Index k = 0; k < m; ++k) {
    const Index t = idx[k];
    if (k + 1 < m) fwd += inner_product(ds.frames[t], x, d) * ds.frames[t + 1];
    if (k > 0) bwd += inner_product(ds.frames[t - 1], x, d) * ds.frames[t];
    burn += inner_product(ds.frames[t - 1], x, d) * ds.frames[t];
  }
  EXPECT_LT((lag1_covariance_apply(ds, idx, Gamma1Variant::trim_forward, x) - fwd / 5.0).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((lag1_covariance_apply(ds, idx, Gamma1Variant::trim_backward, x) - bwd / 5.0).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((lag1_covariance_apply(ds, idx, Gamma1Variant::burn_in, x) - burn / 6.0).cwiseAbs().maxCoeff(), 1e-12);
  // On a contiguous set, burn_in adds the pair (1, 2) to trim_backward.
  const Surface extra = inner_product(ds.frames[1], x, d) * ds.frames[2];
  EXPECT_LT((6.0 * lag1_covariance_apply(ds, idx, Gamma1Variant::burn_in, x) -
             (5.0 * lag1_covariance_apply(ds, idx, Gamma1Variant::trim_backward, x) + extra))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(Lag1Covariance, SinglePair) {
  const GridDomain d = GridDomain::unit(4, 4);
  const FtsDataset ds = random_dataset(4, 4, 3, 19);
  std::mt19937_64 rng(20);
  const Surface x = random_surface(4, 4, rng);
  const Surface expected = inner_product(ds.frames[1], x, d) * ds.frames[2];
  EXPECT_LT((lag1_covariance_apply(ds, std::vector<Index>{1, 2}, Gamma1Variant::trim_forward, x) - expected)
                .cwiseAbs()
                .maxCoeff(),
            1e-13);
  EXPECT_LT((lag1_covariance_apply(ds, std::vector<Index>{1, 2}, Gamma1Variant::trim_backward, x) - expected)
                .cwiseAbs()
                .maxCoeff(),
            1e-13);
  EXPECT_SURFCP_ERROR(lag1_covariance_apply(ds, std::vector<Index>{0, 1}, Gamma1Variant::burn_in, x),
                      ErrorKind::argument);
}

// True score-space operator <Psi xi_j, xi_i> for the estimated FPCs.
Eigen::MatrixXd true_score_operator(const FarPredictor& p, const FarPredictor& oracle, const GridDomain& d) {
  const Eigen::MatrixXd& xi = p.fpca()->eigenfunctions;
  const Index m = xi.cols();
  Eigen::MatrixXd out(m, m);
  for (Index j = 0; j < m; ++j) {
    const Surface image = predict(oracle, unflatten(xi.col(j), d.n1(), d.n2()));
    for (Index i = 0; i < m; ++i) out(i, j) = d.cell_weight() * xi.col(i).dot(flatten(image));
  }
  return out;
}

TEST(Ek, ErrorShrinksWithSampleSize) {
  std::vector<double> medians;
  for (Index t : {50, 200, 800}) {
    std::vector<double> errs;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SimulationConfig sc;
      sc.n1 = 16;
      sc.n2 = 16;
      sc.length = t;
      sc.seed = 1000 + seed;
      sc.innovation.multiplier = 0.1;
      const SimulationOutput sim = simulate_far1(sc);
      const FarPredictor p = fit(FarMethod::ek, sim.data, iota_indices(1, t), FarOptions{ComponentSelector::fixed(3)});
      const FarPredictor oracle = make_oracle(sim.kernel, sim.data.domain);
      errs.push_back((p.transfer() - true_score_operator(p, oracle, sim.data.domain)).norm());
    }
    std::nth_element(errs.begin(), errs.begin() + 10, errs.end());
    medians.push_back(errs[10]);
  }
  EXPECT_GT(medians[0], medians[1]);
  EXPECT_GT(medians[1], medians[2]);
}

}  // namespace
}  // namespace surfcp
