#include <gtest/gtest.h>

#include <random>

#include "cbdsel/aligner.hpp"
#include "cbdsel/synthetic.hpp"
#include "test_util.hpp"

using namespace cbdsel;

TEST(Aligner, IdentityWhenSourceEqualsTarget) {
  std::mt19937_64 rng(3);
  const auto x = synthetic::gaussian_matrix(200, 12, rng);
  const auto model = fit_aligner(x, x, 0.0);
  EXPECT_LT((model.weights - RowMatrix<double>::Identity(12, 12)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT(model.bias.cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(model.r_squared, 1.0, 1e-12);
}

TEST(Aligner, RecoversNoiselessAffineMap) {
  const auto pair = synthetic::make_affine_pair(300, 10, 6, 0.0, 11);
  const auto model = fit_aligner(pair.source, pair.target, 0.0);
  EXPECT_LT((model.weights - pair.weights).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((model.bias - pair.bias).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_GE(model.r_squared, 1.0 - 1e-9);
  EXPECT_FALSE(model.underdetermined);
}

TEST(Aligner, HeldOutPointsFollowTheKnownMap) {
  const auto pair = synthetic::make_affine_pair(300, 10, 6, 0.0, 11);
  const auto model = fit_aligner(pair.source, pair.target, 0.0);
  std::mt19937_64 rng(99);
  const auto held_out = synthetic::gaussian_matrix(25, 10, rng);
  RowMatrix<double> expected = held_out * pair.weights;
  expected.rowwise() += pair.bias.transpose();
  EXPECT_LT((map(model, held_out) - expected).cwiseAbs().maxCoeff(), 1e-5);
}

// Frozen regression value: n=500, d_s=16, d_t=8, sigma=0.1, lambda=1e-3, seed 42.
constexpr double kNoisyR2 = 0.98862812041648196;
TEST(Aligner, NoisyFitRSquaredRegression) {
  const auto pair = synthetic::make_affine_pair(500, 16, 8, 0.1, 42);
  const auto model = fit_aligner(pair.source, pair.target, 1e-3);
  EXPECT_NEAR(model.r_squared, kNoisyR2, 1e-9);
  EXPECT_NEAR(r_squared_of(model, pair.source, pair.target), model.r_squared, 1e-15);
  EXPECT_GT(model.r_squared, 0.9);
  EXPECT_LT(model.r_squared, 1.0);
}

TEST(Aligner, ShapeAndRankErrors) {
  std::mt19937_64 rng(5);
  const auto x = synthetic::gaussian_matrix(20, 4, rng);
  const auto y = synthetic::gaussian_matrix(19, 3, rng);
  EXPECT_THROW(fit_aligner(x, y, 0.0), ShapeError);

  RowMatrix<double> collinear = synthetic::gaussian_matrix(20, 4, rng);
  collinear.col(3) = 2.0 * collinear.col(1);
  const auto t = synthetic::gaussian_matrix(20, 3, rng);
  EXPECT_THROW(fit_aligner(collinear, t, 0.0), RankDeficiencyError);
  EXPECT_NO_THROW(fit_aligner(collinear, t, 1e-3));

  // n < d_s + 1 with the default ridge still solves, flagged as underdetermined.
  const auto wide = synthetic::gaussian_matrix(5, 8, rng);
  const auto wide_t = synthetic::gaussian_matrix(5, 2, rng);
  const auto m = fit_aligner(wide, wide_t);
  EXPECT_TRUE(m.underdetermined);
  EXPECT_THROW(fit_aligner(wide, wide_t, 0.0), RankDeficiencyError);
}

TEST(Aligner, MapContracts) {
  std::mt19937_64 rng(8);
  const auto x = synthetic::gaussian_matrix(7, 5, rng);
  EXPECT_EQ(map(AlignerModel::identity(5), x), x);

  AlignerModel constant;
  constant.weights = RowMatrix<double>::Zero(5, 3);
  constant.bias = Vector<double>::LinSpaced(3, 1.0, 3.0);
  const auto out = map(constant, x);
  for (Eigen::Index r = 0; r < out.rows(); ++r) EXPECT_EQ(Vector<double>(out.row(r).transpose()), constant.bias);

  EXPECT_THROW(map(constant, synthetic::gaussian_matrix(2, 4, rng)), ShapeError);
}

TEST(Aligner, RSquaredDefinition) {
  std::mt19937_64 rng(4);
  const auto x = synthetic::gaussian_matrix(50, 3, rng);
  const auto y = synthetic::gaussian_matrix(50, 2, rng);
  AlignerModel mean_model;
  mean_model.weights = RowMatrix<double>::Zero(3, 2);
  mean_model.bias = y.colwise().mean().transpose();
  EXPECT_NEAR(r_squared_of(mean_model, x, y), 0.0, 1e-12);

  // Constant target: exact fit -> 1, otherwise degenerate.
  RowMatrix<double> flat = RowMatrix<double>::Ones(50, 2);
  AlignerModel ones;
  ones.weights = RowMatrix<double>::Zero(3, 2);
  ones.bias = Vector<double>::Ones(2);
  EXPECT_EQ(r_squared_of(ones, x, flat), 1.0);
  ones.bias[0] = 2.0;
  EXPECT_THROW(r_squared_of(ones, x, flat), DegenerateError);

  // Worse than the mean goes negative.
  AlignerModel bad = mean_model;
  bad.bias.array() += 10.0;
  EXPECT_LT(r_squared_of(bad, x, y), 0.0);
}

TEST(AlignerProperty, LeastSquaresOptimality) {
  const auto pair = synthetic::make_affine_pair(120, 6, 4, 0.3, 17);
  const auto model = fit_aligner(pair.source, pair.target, 0.0);
  const double best = training_mse(model, pair.source, pair.target);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> scale(1e-4, 1e-1);
  for (int trial = 0; trial < 100; ++trial) {
    AlignerModel perturbed = model;
    const double s = scale(rng);
    perturbed.weights += s * synthetic::gaussian_matrix(6, 4, rng);
    perturbed.bias += s * Vector<double>(synthetic::gaussian_matrix(4, 1, rng));
    EXPECT_GT(training_mse(perturbed, pair.source, pair.target), best);
  }
}

TEST(AlignerProperty, MapIsAffine) {
  const auto pair = synthetic::make_affine_pair(80, 6, 4, 0.2, 5);
  const auto model = fit_aligner(pair.source, pair.target, 1e-3);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = synthetic::gaussian_matrix(1, 6, rng);
    const auto x2 = synthetic::gaussian_matrix(1, 6, rng);
    const double a = unit(rng);
    const RowMatrix<double> mixed = a * x + (1.0 - a) * x2;
    const RowMatrix<double> lhs = map(model, mixed);
    const RowMatrix<double> rhs = a * map(model, x) + (1.0 - a) * map(model, x2);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(AlignerProperty, DeterministicAndRidgeMonotone) {
  const auto pair = synthetic::make_affine_pair(150, 8, 5, 0.2, 31);
  const auto a = fit_aligner(pair.source, pair.target, 1e-2);
  const auto b = fit_aligner(pair.source, pair.target, 1e-2);
  EXPECT_EQ(encode_aligner(a), encode_aligner(b));

  double previous = -1.0;
  for (double lambda : {0.0, 1e-4, 1e-2, 1.0, 10.0}) {
    const double mse = training_mse(fit_aligner(pair.source, pair.target, lambda), pair.source, pair.target);
    EXPECT_GE(mse, previous);
    previous = mse;
  }
}

TEST(Aligner, PersistenceRoundTripAndLayout) {
  const auto pair = synthetic::make_affine_pair(60, 3, 2, 0.1, 2);
  const auto model = fit_aligner(pair.source, pair.target, 0.5);
  const auto bytes = encode_aligner(model);
  ASSERT_EQ(bytes.size(), 4u + 4u + 4u + 8u + 8u + 8u * (3 * 2 + 2));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "ALN1");

  testutil::TempDir dir;
  save_aligner(model, dir.path() / "m.aln");
  const auto back = load_aligner(dir.path() / "m.aln");
  EXPECT_EQ(back.weights, model.weights);
  EXPECT_EQ(back.bias, model.bias);
  EXPECT_EQ(back.lambda, 0.5);
  EXPECT_EQ(back.r_squared, model.r_squared);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 1);
  EXPECT_THROW(decode_aligner(truncated), FormatError);
}
