#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mvreprobit/stochastic.hpp"
#include "oracles.hpp"

using namespace mvreprobit;

TEST(Cholesky, IdentityMapsToIdentity) {
  const Matrix id = Matrix::Identity(4, 4);
  EXPECT_EQ(cholesky_lower(id), id);
}

TEST(Cholesky, HandCheckedTwoByTwo) {
  Matrix m(2, 2);
  m << 4, 2, 2, 5;
  Matrix expected(2, 2);
  expected << 2, 0, 1, 2;
  EXPECT_TRUE(cholesky_lower(m).isApprox(expected, 1e-14));
}

TEST(Cholesky, ReconstructsRandomPdMatrices) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n01;
  for (int rep = 0; rep < 50; ++rep) {
    Matrix a(5, 5);
    for (auto i = 0; i < a.size(); ++i) a.data()[i] = n01(gen);
    const Matrix m = a * a.transpose() + Matrix::Identity(5, 5);
    const Matrix g = cholesky_lower(m);
    EXPECT_LT((g * g.transpose() - m).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_TRUE(g.isLowerTriangular());
  }
}

TEST(Cholesky, NegativePivotNamesThePivot) {
  Matrix m(3, 3);
  m << 1, 0, 0, 0, 1, 2, 0, 2, 1;
  try {
    cholesky_lower(m);
    FAIL() << "expected DecompositionError";
  } catch (const DecompositionError& e) {
    EXPECT_EQ(e.pivot(), 2u);
  }
}

TEST(Cholesky, TinyPivotRecoversWithJitter) {
  Matrix m(2, 2);
  m << 1, 1, 1, 1 + 1e-13;
  const Matrix g = cholesky_lower(m);
  EXPECT_GT(g(1, 1), 0.0);
}

TEST(Cholesky, AsymmetricInputRejected) {
  Matrix m(2, 2);
  m << 1, 0.5, 0.4, 1;
  EXPECT_THROW(cholesky_lower(m), ValidationError);
}

TEST(TruncatedNormal, UntruncatedMean) {
  RandomStream rng(11, 0);
  double sum = 0;
  const int n = 1'000'000;
  for (int i = 0; i < n; ++i) sum += sample_truncated_normal(0, 1, -kInf, kInf, rng);
  EXPECT_NEAR(sum / n, 0.0, 0.005);
}

TEST(TruncatedNormal, NegativeHalfLineMatchesAnalyticAndRejection) {
  RandomStream rng(12, 0);
  const int n = 200'000;
  double sum = 0;
  for (int i = 0; i < n; ++i) sum += sample_truncated_normal(0, 1, -kInf, 0, rng);
  EXPECT_NEAR(sum / n, -std::sqrt(2.0 / std::numbers::pi), 0.01);

  std::mt19937_64 gen(5);
  std::normal_distribution<double> n01;
  double rej = 0;
  int kept = 0;
  while (kept < n) {
    const double x = n01(gen);
    if (x < 0) {
      rej += x;
      ++kept;
    }
  }
  EXPECT_NEAR(sum / n, rej / n, 0.01);
}

TEST(TruncatedNormal, FarTailUsesFallback) {
  RandomStream rng(13, 0);
  const int n = 200'000;
  double sum = 0;
  double lowest = kInf;
  for (int i = 0; i < n; ++i) {
    const double x = sample_truncated_normal(0, 1, 5, kInf, rng);
    sum += x;
    lowest = std::min(lowest, x);
  }
  EXPECT_NEAR(sum / n, oracle::phi(5) / (1 - oracle::big_phi(5)), 0.01);
  EXPECT_NEAR(sum / n, 5.1865, 0.01);
  EXPECT_GT(lowest, 5.0);

  // Beyond the inverse-CDF range, both one-sided and two-sided.
  for (int i = 0; i < 1000; ++i) {
    const double x = sample_truncated_normal(0, 1, 9, 9.5, rng);
    ASSERT_GT(x, 9.0);
    ASSERT_LT(x, 9.5);
    const double y = sample_truncated_normal(0, 1, -kInf, -12, rng);
    ASSERT_LT(y, -12.0);
  }
}

TEST(TruncatedNormal, ScaledInterval) {
  RandomStream rng(14, 0);
  for (int i = 0; i < 10000; ++i) {
    const double x = sample_truncated_normal(3, 2, 2.9, 3.0, rng);
    ASSERT_GT(x, 2.9);
    ASSERT_LT(x, 3.0);
  }
  EXPECT_THROW(sample_truncated_normal(0, 1, 1, 1, rng), ValidationError);
  EXPECT_THROW(sample_truncated_normal(0, -1, 0, 1, rng), ValidationError);
}

TEST(TruncatedMvn, IdentityCorrelationIsIndependent) {
  RandomStream rng(21, 0);
  const Vector mean = Vector::Zero(3);
  TruncationBox box{Vector::Constant(3, 0.0), Vector::Constant(3, kInf)};
  std::vector<Vector> draws;
  for (int i = 0; i < 50'000; ++i) draws.push_back(sample_truncated_mvn(mean, CorrVector(3), box, rng, 1));
  const auto m = oracle::moments(draws);
  const double half_mean = std::sqrt(2.0 / std::numbers::pi);
  for (int r = 0; r < 3; ++r) {
    EXPECT_NEAR(m.mean[r], half_mean, 0.01);
    EXPECT_NEAR(m.cov(r, r), 1.0 - 2.0 / std::numbers::pi, 0.01);
  }
  EXPECT_NEAR(m.cov(0, 1), 0.0, 0.01);
}

TEST(TruncatedMvn, PositiveOrthantMatchesRejectionOracle) {
  RandomStream rng(22, 0);
  const Vector mean = Vector::Zero(2);
  const CorrVector corr(2, {0.5});
  TruncationBox box{Vector::Zero(2), Vector::Constant(2, kInf)};
  std::vector<Vector> draws;
  for (int i = 0; i < 100'000; ++i) draws.push_back(sample_truncated_mvn(mean, corr, box, rng));
  const auto ref = oracle::moments(
      oracle::rejection_truncated_mvn(mean, corr.to_matrix(), box.lower, box.upper, 100'000, 7));
  const auto got = oracle::moments(draws);
  for (int r = 0; r < 2; ++r) EXPECT_NEAR(got.mean[r], ref.mean[r], 0.01);
  EXPECT_LT((got.cov - ref.cov).cwiseAbs().maxCoeff(), 0.01);
}

TEST(TruncatedMvn, MixedBoxShiftedMean) {
  RandomStream rng(23, 0);
  const Vector mean = (Vector(3) << 0.3, -0.5, 1.0).finished();
  const CorrVector corr(3, {0.6, -0.3, 0.2});
  TruncationBox box{(Vector(3) << 0, -kInf, 0).finished(), (Vector(3) << kInf, 0, kInf).finished()};
  std::vector<Vector> draws;
  for (int i = 0; i < 100'000; ++i) draws.push_back(sample_truncated_mvn(mean, corr, box, rng));
  const auto ref =
      oracle::moments(oracle::rejection_truncated_mvn(mean, corr.to_matrix(), box.lower, box.upper, 100'000, 8));
  const auto got = oracle::moments(draws);
  for (int r = 0; r < 3; ++r) EXPECT_NEAR(got.mean[r], ref.mean[r], 0.01);
  EXPECT_LT((got.cov - ref.cov).cwiseAbs().maxCoeff(), 0.01);
}

TEST(TruncatedMvn, UpperZeroRespected) {
  RandomStream rng(24, 0);
  const CorrVector corr(2, {-0.8});
  TruncationBox box{Vector::Constant(2, -kInf), (Vector(2) << 0, kInf).finished()};
  for (int i = 0; i < 10'000; ++i) {
    const Vector y = sample_truncated_mvn((Vector(2) << 4, -3).finished(), corr, box, rng);
    ASSERT_LT(y[0], 0.0);
  }
}

TEST(InverseWishart, MeanFormula) {
  RandomStream rng(31, 0);
  Matrix psi(3, 3);
  psi << 2, 0.5, 0.2, 0.5, 1.5, -0.3, 0.2, -0.3, 1;
  const double nu = 10;
  Matrix sum = Matrix::Zero(3, 3);
  const int n = 100'000;
  for (int i = 0; i < n; ++i) {
    const Matrix s = sample_inverse_wishart(psi, nu, rng);
    ASSERT_GT(s.llt().info() == Eigen::Success ? 1 : 0, 0);
    sum += s;
  }
  const Matrix expected = psi / (nu - 3 - 1);
  const Matrix got = sum / n;
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(got(i, i), expected(i, i), 0.02 * expected(i, i));
  EXPECT_NEAR(got(0, 1), expected(0, 1), 0.02 * expected(0, 0));
}

TEST(InverseWishart, ScalarCaseIsInverseGamma) {
  // IW(psi, nu) in one dimension is inverse-gamma(nu/2, psi/2).
  RandomStream rng(32, 0);
  std::mt19937_64 gen(9);
  const double psi = 3.0;
  const double nu = 7.0;
  std::gamma_distribution<double> gamma(nu / 2, 2.0 / psi);
  double lib = 0;
  double ref = 0;
  const int n = 200'000;
  for (int i = 0; i < n; ++i) {
    lib += sample_inverse_wishart(Matrix::Constant(1, 1, psi), nu, rng)(0, 0);
    ref += 1.0 / gamma(gen);
  }
  EXPECT_NEAR(lib / n, ref / n, 0.02 * psi / (nu - 2));
  EXPECT_NEAR(lib / n, psi / (nu - 2), 0.02 * psi / (nu - 2));
}

TEST(InverseWishart, DofMustExceedDimensionMinusOne) {
  RandomStream rng(33, 0);
  EXPECT_THROW(sample_inverse_wishart(Matrix::Identity(3, 3), 2.0, rng), ValidationError);
}

TEST(Sylvester, IdentityIsPd) { EXPECT_TRUE(is_positive_definite_corr(CorrVector(4))); }

TEST(Sylvester, KnownIndefiniteMatrix) {
  const CorrVector rho(3, {0.9, 0.9, -0.9});
  EXPECT_NEAR(rho.to_matrix().determinant(), -2.888, 1e-9);
  EXPECT_FALSE(is_positive_definite_corr(rho));
  EXPECT_FALSE(oracle::positive_definite_by_eigenvalues(rho.to_matrix()));
}

TEST(Sylvester, AgreesWithEigenvalueOracle) {
  std::mt19937_64 gen(41);
  std::uniform_real_distribution<double> u(-1, 1);
  int disagreements = 0;
  int positives = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t k = 2 + rep % 4;
    std::vector<double> e(CorrVector::length_for(k));
    // Shrink some entries so both verdicts occur often.
    const double scale = (rep % 3 == 0) ? 0.4 : 1.0;
    for (auto& x : e) x = scale * u(gen);
    const CorrVector rho(k, e);
    const bool lib = is_positive_definite_corr(rho);
    const bool ref = oracle::positive_definite_by_eigenvalues(rho.to_matrix());
    disagreements += lib != ref;
    positives += ref;
  }
  EXPECT_EQ(disagreements, 0);
  EXPECT_GT(positives, 100);
  EXPECT_LT(positives, 900);
}

TEST(Sylvester, SingleEntryShortcutAgreesWithFullCheck) {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> u(-1, 1);
  int checked = 0;
  while (checked < 1000) {
    std::vector<double> e(CorrVector::length_for(4));
    for (auto& x : e) x = 0.5 * u(gen);
    const CorrVector rho(4, e);
    if (!is_positive_definite_corr(rho)) continue;
    const std::size_t l = gen() % e.size();
    const double value = 0.999 * u(gen);
    CorrVector moved = rho;
    moved.set(l, value);
    EXPECT_EQ(is_positive_definite_corr_update(rho, l, value), is_positive_definite_corr(moved));
    ++checked;
  }
}

TEST(CorrVector, LayoutAndValidation) {
  EXPECT_EQ(CorrVector::length_for(1), 0u);
  EXPECT_EQ(CorrVector::length_for(4), 6u);
  for (std::size_t l = 0; l < 10; ++l) {
    const auto [i, j] = CorrVector::position(l);
    EXPECT_GT(i, j);
    EXPECT_EQ(CorrVector::index(i, j), l);
    EXPECT_EQ(CorrVector::index(j, i), l);
  }
  EXPECT_THROW(CorrVector(3, {0.1, 0.2}), ValidationError);
  EXPECT_THROW(CorrVector(2, {1.5}), ValidationError);
  CorrVector bad(3, {0.9, 0.9, -0.9});
  EXPECT_FALSE(bad.validated());
  EXPECT_THROW(bad.validate(), ValidationError);
  CorrVector good(3, {0.2, 0.1, 0.3});
  good.validate();
  EXPECT_TRUE(good.validated());
  EXPECT_EQ(CorrVector::from_matrix(good.to_matrix()), good);
}

TEST(RandomStream, StreamsAreReproducibleAndDistinct) {
  RandomStream a(5, 0);
  RandomStream b(5, 0);
  RandomStream c(5, 1);
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    EXPECT_NE(x, c.normal());
  }
}
