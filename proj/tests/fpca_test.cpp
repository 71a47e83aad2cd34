#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "surfcp/basis.hpp"
#include "surfcp/fpca.hpp"
#include "test_support.hpp"

namespace surfcp {
namespace {

using testing::iota_indices;
using testing::random_dataset;
using testing::random_surface;

FtsDataset centered_random(Index n1, Index n2, Index t, std::uint64_t seed) {
  FtsDataset ds = random_dataset(n1, n2, t, seed);
  const auto idx = iota_indices(0, t);
  const Surface mean = pointwise_mean(ds, idx);
  for (auto& f : ds.frames) f -= mean;
  return ds;
}

double max_orthonormality_error(const FpcaResult& r, const GridDomain& d) {
  double worst = 0.0;
  for (Index i = 0; i < r.size(); ++i)
    for (Index j = 0; j < r.size(); ++j)
      worst = std::max(worst, std::abs(inner_product(r.eigenfunction(i), r.eigenfunction(j), d) - (i == j ? 1.0 : 0.0)));
  return worst;
}

TEST(CovarianceMatrix, RepeatedFrameCentersToZero) {
  std::mt19937_64 rng(1);
  const Surface y = random_surface(3, 3, rng);
  FtsDataset ds(GridDomain::unit(3, 3), {y, y, y});
  const Surface mean = pointwise_mean(ds, std::vector<Index>{0, 1, 2});
  for (auto& f : ds.frames) f -= mean;
  EXPECT_EQ(covariance_matrix(ds, std::vector<Index>{0, 1, 2}).cwiseAbs().maxCoeff(), 0.0);
}

TEST(CovarianceMatrix, PlusMinusPairIsRankOne) {
  std::mt19937_64 rng(2);
  const Surface y = random_surface(3, 4, rng);
  const FtsDataset ds(GridDomain::unit(3, 4), {y, Surface(-y)});
  const Eigen::VectorXd v = flatten(y);
  EXPECT_TRUE(covariance_matrix(ds, std::vector<Index>{0, 1}).isApprox(v * v.transpose(), 1e-14));
}

TEST(CovarianceMatrix, MatchesLoopOracle) {
  const FtsDataset ds = centered_random(3, 2, 5, 3);
  const Eigen::MatrixXd c = covariance_matrix(ds, iota_indices(0, 5));
  for (Index a = 0; a < 6; ++a) {
    for (Index b = 0; b < 6; ++b) {
      double s = 0.0;
      for (const auto& f : ds.frames) s += f.data()[a] * f.data()[b];
      EXPECT_NEAR(c(a, b), s / 5.0, 1e-14);
    }
  }
  EXPECT_SURFCP_ERROR(covariance_matrix(ds, std::vector<Index>{0}), ErrorKind::argument);
}

TEST(SelectNumComponents, Examples) {
  EXPECT_EQ(select_num_components(Eigen::Vector3d(0.6, 0.3, 0.1), 0.8), 2);
  EXPECT_EQ(select_num_components(Eigen::VectorXd::Constant(1, 1.0), 0.8), 1);
  Eigen::VectorXd ev(5);
  ev << 3, 2, 1, 0, 0;
  EXPECT_EQ(select_num_components(ev, 1.0), 3);
  // Inclusive comparison: exactly 0.9 of the variance at M = 2.
  EXPECT_EQ(select_num_components(Eigen::Vector3d(0.5, 0.4, 0.1), 0.9), 2);
  EXPECT_SURFCP_ERROR(select_num_components(Eigen::VectorXd(), 0.8), ErrorKind::argument);
  EXPECT_SURFCP_ERROR(select_num_components(Eigen::Vector3d(0.1, 0.3, 0.2), 0.8), ErrorKind::argument);
}

TEST(FpcaDiscretized, RankOneData) {
  const GridDomain d = GridDomain::unit(12, 10);
  std::mt19937_64 rng(4);
  Surface phi = random_surface(12, 10, rng);
  phi /= std::sqrt(squared_norm(phi, d));
  const std::vector<double> a{1.5, -0.3, 2.0, 0.7, -1.1};
  std::vector<Surface> frames;
  double second_moment = 0.0;
  for (double x : a) {
    frames.push_back(x * phi);
    second_moment += x * x / 5.0;
  }
  const FtsDataset ds(d, std::move(frames));
  const FpcaResult r = fpca_discretized(ds, iota_indices(0, 5), ComponentSelector::all());
  ASSERT_EQ(r.all_eigenvalues.size(), 1);
  EXPECT_NEAR(r.eigenvalues[0], second_moment, 1e-12);
  const double align = inner_product(r.eigenfunction(0), phi, d);
  EXPECT_NEAR(std::abs(align), 1.0, 1e-12);
}

TEST(FpcaDiscretized, TraceIdentityOrthonormalityAndScores) {
  const GridDomain d = GridDomain::unit(9, 11);
  const FtsDataset ds = centered_random(9, 11, 15, 5);
  const auto idx = iota_indices(0, 15);
  const FpcaResult r = fpca_discretized(ds, idx, ComponentSelector::all());
  double total = 0.0;
  for (const auto& f : ds.frames) total += squared_norm(f, d) / 15.0;
  EXPECT_NEAR(r.all_eigenvalues.sum(), total, 1e-8);
  EXPECT_LT(max_orthonormality_error(r, d), 1e-6);
  for (Index t = 0; t < 15; ++t) {
    EXPECT_LT((project_scores(ds.frames[t], r, d) - r.scores.row(t).transpose()).cwiseAbs().maxCoeff(), 1e-8);
  }
  for (Index k = 1; k < r.eigenvalues.size(); ++k) EXPECT_LE(r.eigenvalues[k], r.eigenvalues[k - 1]);
}

TEST(FpcaDiscretized, SnapshotMatchesDirect) {
  const GridDomain d = GridDomain::unit(8, 8);
  const FtsDataset ds = centered_random(8, 8, 6, 6);
  const auto idx = iota_indices(0, 6);
  const FpcaResult snap = fpca_discretized(ds, idx, ComponentSelector::all(), EigenPath::snapshot);
  const FpcaResult direct = fpca_discretized(ds, idx, ComponentSelector::all(), EigenPath::direct);
  ASSERT_EQ(snap.all_eigenvalues.size(), direct.all_eigenvalues.size());
  for (Index k = 0; k < snap.all_eigenvalues.size(); ++k) {
    EXPECT_NEAR(snap.all_eigenvalues[k], direct.all_eigenvalues[k], 1e-8 * direct.all_eigenvalues[0]);
  }
  for (Index k = 0; k < snap.size(); ++k) {
    // Same sign convention on both paths, so no sign alignment is needed.
    EXPECT_LT((snap.eigenfunctions.col(k) - direct.eigenfunctions.col(k)).cwiseAbs().maxCoeff(), 1e-6);
  }
  EXPECT_LT(max_orthonormality_error(direct, d), 1e-6);
}

TEST(FpcaDiscretized, SignConventionAndMask) {
  const GridDomain d = GridDomain::unit(6, 6);
  FtsDataset ds = centered_random(6, 6, 8, 7);
  ds.mask = testing::half_mask(6, 6);
  const FpcaResult r = fpca_discretized(ds, iota_indices(0, 8), ComponentSelector::fixed(3));
  EXPECT_EQ(r.size(), 3);
  for (Index k = 0; k < r.size(); ++k) {
    Index arg = 0;
    r.eigenfunctions.col(k).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(r.eigenfunctions(arg, k), 0.0);
    // Off-mask rows of the eigenfunctions vanish.
    EXPECT_EQ(r.eigenfunction(k).bottomRows(3).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(FpcaDiscretized, AllZeroDataIsDegenerate) {
  const FtsDataset ds(GridDomain::unit(4, 4), {Surface::Zero(4, 4), Surface::Zero(4, 4)});
  EXPECT_SURFCP_ERROR(fpca_discretized(ds, std::vector<Index>{0, 1}, ComponentSelector::all()), ErrorKind::degenerate);
}

TEST(FpcaBasis, SingleColumnGivesThatBasisFunction) {
  const GridDomain d = GridDomain::unit(40, 40);
  const TensorBasis tb(BasisSystem1D(BasisKind::fourier, 3), BasisSystem1D(BasisKind::fourier, 3));
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(6, 9);
  c.col(4) << 1.0, -2.0, 0.5, 0.3, -0.8, 1.0;
  const FpcaResult r = fpca_basis(BasisExpansion{c, tb}, Eigen::MatrixXd::Identity(9, 9), d, ComponentSelector::all());
  ASSERT_EQ(r.all_eigenvalues.size(), 1);
  EXPECT_NEAR(r.eigenvalues[0], c.col(4).squaredNorm() / 6.0, 1e-12);
  const Surface phi4 = basis_surfaces(tb, d)[4];
  EXPECT_NEAR(std::abs(inner_product(r.eigenfunction(0), phi4, d)), 1.0, 1e-10);
}

TEST(FpcaBasis, NonPsdGramIsRejected) {
  const GridDomain d = GridDomain::unit(10, 10);
  const TensorBasis tb(BasisSystem1D(BasisKind::fourier, 1), BasisSystem1D(BasisKind::fourier, 2));
  Eigen::MatrixXd w(2, 2);
  w << 1.0, 0.0, 0.0, -1.0;
  EXPECT_SURFCP_ERROR(fpca_basis(BasisExpansion{Eigen::MatrixXd::Ones(3, 2), tb}, w, d, ComponentSelector::all()),
                      ErrorKind::numerical);
}

TEST(FpcaBasis, OrthonormalAndAgreesWithDiscretizedOnRepresentableData) {
  // Frames lying exactly in a B-spline span: both methods see the same
  // covariance operator, so their spectra coincide.
  const GridDomain d = GridDomain::unit(30, 30);
  const TensorBasis tb(BasisSystem1D(BasisKind::bspline_cubic, 5), BasisSystem1D(BasisKind::bspline_cubic, 5));
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd c(20, 25);
  for (Index k = 0; k < c.size(); ++k) c.data()[k] = nd(rng);
  c.rowwise() -= c.colwise().mean();
  const BasisExpansion be{c, tb};
  const FtsDataset ds(d, synthesize(be, d));
  const FpcaResult rb = fpca_basis(be, gram_matrix(tb, d), d, ComponentSelector::fixed(4));
  const FpcaResult rd = fpca_discretized(ds, iota_indices(0, 20), ComponentSelector::fixed(4));
  EXPECT_LT(max_orthonormality_error(rb, d), 1e-6);
  for (Index k = 0; k < 4; ++k) {
    EXPECT_NEAR(rb.eigenvalues[k], rd.eigenvalues[k], 1e-8 * rd.eigenvalues[0]);
    EXPECT_LT(mse(rb.eigenfunction(k), rd.eigenfunction(k)), 1e-10);
  }
}

TEST(ProjectScores, Examples) {
  const GridDomain d = GridDomain::unit(10, 10);
  const FtsDataset ds = centered_random(10, 10, 12, 9);
  const FpcaResult r = fpca_discretized(ds, iota_indices(0, 12), ComponentSelector::fixed(3));
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(3);
  e1[0] = 1.0;
  EXPECT_LT((project_scores(r.eigenfunction(0), r, d) - e1).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_EQ(project_scores(Surface::Zero(10, 10), r, d).cwiseAbs().maxCoeff(), 0.0);
  std::mt19937_64 rng(10);
  const Surface f = random_surface(10, 10, rng);
  const Eigen::VectorXd s = project_scores(f, r, d);
  for (Index k = 0; k < 3; ++k) {
    const Surface xi = r.eigenfunction(k);
    double acc = 0.0;
    for (Index i = 0; i < 10; ++i)
      for (Index j = 0; j < 10; ++j) acc += f(i, j) * xi(i, j);
    EXPECT_NEAR(s[k], acc / 100.0, 1e-12);
  }
  EXPECT_SURFCP_ERROR(project_scores(Surface::Zero(9, 10), r, d), ErrorKind::dimension);
}

}  // namespace
}  // namespace surfcp
