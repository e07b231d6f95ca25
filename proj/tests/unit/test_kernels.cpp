#include <gtest/gtest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "gplvm/errors.hpp"
#include "gplvm/kernels.hpp"
#include "oracles.hpp"

using namespace gplvm;
using gplvm::testing::random_matrix;
using gplvm::testing::uniform;

namespace {

const KernelSpec kSe{KernelKind::se, KernelForm::printed};
const KernelSpec kExp{KernelKind::exp, KernelForm::printed};
const KernelSpec kM32{KernelKind::m32, KernelForm::printed};
const KernelSpec kLinear{KernelKind::linear, KernelForm::printed};

HyperParams stationary_hyper(Eigen::Index n, double l, double scale, double noise) {
  HyperParams h;
  h.lengthscale = l;
  h.scales = Eigen::VectorXd::Constant(n, scale);
  h.noise = Eigen::VectorXd::Constant(n, noise);
  return h;
}

} // namespace

TEST(PairwiseDistances, IdenticalRowsGiveZero) {
  const Eigen::MatrixXd b = Eigen::MatrixXd::Constant(4, 3, 0.7);
  EXPECT_EQ(pairwise_distances(b), Eigen::MatrixXd::Zero(4, 4));
}

TEST(PairwiseDistances, ThreeFourFive) {
  Eigen::MatrixXd b(2, 2);
  b << 0, 0, 3, 4;
  const Eigen::MatrixXd d = pairwise_distances(b);
  EXPECT_DOUBLE_EQ(d(0, 1), 5.0);
  EXPECT_EQ(d(0, 0), 0.0);
}

TEST(PairwiseDistances, ExactlySymmetric) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd d = pairwise_distances(random_matrix(9, 3, rng));
  EXPECT_EQ(d, d.transpose());
  EXPECT_GE(d.minCoeff(), 0.0);
}

TEST(Correlation, PrintedScalarValues) {
  EXPECT_NEAR(correlation(kSe, 1.0, 1.0), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(correlation(kSe, 1.0, 1.0), 0.606531, 1e-6);
  EXPECT_NEAR(correlation(kExp, 1.0, 1.0), std::exp(-0.5), 1e-15);
  const double m32 = (1.0 + std::sqrt(3.0)) * std::exp(-std::sqrt(3.0) / 2.0);
  EXPECT_NEAR(correlation(kM32, 1.0, 1.0), m32, 1e-15);
  EXPECT_NEAR(correlation(kM32, 1.0, 1.0), 1.149155, 1e-6);
  EXPECT_GT(correlation(kM32, 1.0, 1.0), 1.0);
}

TEST(Correlation, StandardFormScalarValues) {
  const KernelSpec exp_std{KernelKind::exp, KernelForm::standard};
  const KernelSpec m32_std{KernelKind::m32, KernelForm::standard};
  EXPECT_NEAR(correlation(exp_std, 2.0, 2.0), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(correlation(m32_std, 1.0, 1.0), (1.0 + std::sqrt(3.0)) * std::exp(-std::sqrt(3.0)),
              1e-15);
  EXPECT_LE(correlation(m32_std, 0.3, 1.0), 1.0);
}

TEST(Correlation, SquaredExponentialDecreasesInDistance) {
  double previous = correlation(kSe, 0.0, 1.3);
  EXPECT_EQ(previous, 1.0);
  for (int i = 1; i <= 400; ++i) {
    const double value = correlation(kSe, 0.01 * i, 1.3);
    EXPECT_LT(value, previous) << "d = " << 0.01 * i;
    previous = value;
  }
}

TEST(CorrelationGram, UnitDiagonalForEveryStationaryKernel) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd b = random_matrix(7, 2, rng);
  for (const auto &spec : {kSe, kExp, kM32}) {
    HyperParams h;
    h.lengthscale = 0.8;
    const Eigen::MatrixXd c = correlation_gram(spec, b, h);
    EXPECT_EQ(c.diagonal(), Eigen::VectorXd::Ones(7)) << to_string(spec.kind);
    EXPECT_EQ(c, c.transpose());
  }
}

TEST(CorrelationGram, LinearKernelIsAContractViolation) {
  EXPECT_THROW(correlation_gram(kLinear, Eigen::MatrixXd::Zero(3, 1), HyperParams{}),
               ContractViolation);
}

TEST(CorrelationGram, PositiveSemidefiniteAtBaseJitter) {
  std::mt19937_64 rng(3);
  const KernelSpec m32_std{KernelKind::m32, KernelForm::standard};
  const KernelSpec exp_std{KernelKind::exp, KernelForm::standard};
  for (const auto &spec : {kSe, kExp, m32_std, exp_std}) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto n = static_cast<Eigen::Index>(2 + trial % 29);
      const auto q = static_cast<Eigen::Index>(1 + trial % 4);
      HyperParams h;
      h.lengthscale = uniform(rng, 0.3, 3.0);
      const Eigen::MatrixXd c = correlation_gram(spec, random_matrix(n, q, rng), h);
      const CholeskyFactor f = safe_cholesky(c);
      EXPECT_EQ(f.jitter, 1e-8) << to_string(spec.kind) << " trial " << trial;
    }
  }
}

// The printed m32 expression is not a positive-definite kernel, so its Gram
// matrices are routinely indefinite.
TEST(CorrelationGram, PrintedMatern32IsIndefinite) {
  std::mt19937_64 rng(4);
  int indefinite = 0;
  for (int trial = 0; trial < 100; ++trial) {
    HyperParams h;
    h.lengthscale = 1.0;
    const Eigen::MatrixXd c = correlation_gram(kM32, random_matrix(10, 2, rng), h);
    const double lowest = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c).eigenvalues()(0);
    if (lowest < -1e-6) ++indefinite;
  }
  EXPECT_GT(indefinite, 50);
}

TEST(CorrelationGramDerivatives, MatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd b = random_matrix(5, 2, rng);
  const double l = 0.9;
  const double h = 1e-6;
  for (const auto &spec : {kSe, kExp, kM32, KernelSpec{KernelKind::m32, KernelForm::standard}}) {
    const CorrelationDerivatives d = correlation_gram_derivatives(spec, b, l);
    HyperParams hp;
    hp.lengthscale = l;
    EXPECT_LT((d.value - correlation_gram(spec, b, hp)).norm(), 1e-15);
    const Eigen::MatrixXd dist = pairwise_distances(b);
    for (Eigen::Index i = 0; i < 5; ++i) {
      for (Eigen::Index j = 0; j < 5; ++j) {
        const double r = dist(i, j);
        const double fd_l = (correlation(spec, r, l + h) - correlation(spec, r, l - h)) / (2 * h);
        EXPECT_NEAR(d.by_lengthscale(i, j), fd_l, 1e-6);
        if (i == j) continue;
        const double s2 = r * r;
        const double fd_s =
            (correlation(spec, std::sqrt(s2 + h), l) - correlation(spec, std::sqrt(s2 - h), l)) /
            (2 * h);
        EXPECT_NEAR(d.by_squared_distance(i, j), fd_s, 1e-6);
      }
    }
  }
}

TEST(AssembleCovariance, StationaryDiagonalIsScalePlusNoise) {
  std::mt19937_64 rng(6);
  const Eigen::Index n = 6;
  HyperParams h;
  h.lengthscale = 1.2;
  h.scales = Eigen::VectorXd::LinSpaced(n, 0.1, 0.6);
  h.noise = Eigen::VectorXd::LinSpaced(n, 0.05, 0.3);
  for (const auto &spec : {kSe, kExp, kM32}) {
    const CovarianceEstimate k = assemble_covariance(spec, random_matrix(n, 2, rng), h);
    const Eigen::VectorXd expected = h.scales.array().square() + h.noise.array().square();
    EXPECT_LT(((k.matrix.diagonal() - expected).array() / expected.array()).abs().maxCoeff(),
              1e-12);
    EXPECT_EQ(k.matrix, k.matrix.transpose());
  }
}

TEST(AssembleCovariance, LinearDiagonalClosedForm) {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd b = random_matrix(5, 3, rng);
  HyperParams h;
  h.kernel_scale = 0.7;
  h.noise = Eigen::VectorXd::LinSpaced(5, 0.1, 0.5);
  const CovarianceEstimate k = assemble_covariance(kLinear, b, h);
  for (Eigen::Index i = 0; i < 5; ++i) {
    const double expected = 0.49 * b.row(i).squaredNorm() + h.noise(i) * h.noise(i);
    EXPECT_NEAR(k.matrix(i, i) / expected, 1.0, 1e-12);
  }
  EXPECT_EQ(k.tag, "gplvm-linear-Q3");
}

TEST(AssembleCovariance, LinearZeroLatentsLeaveNoise) {
  HyperParams h;
  h.kernel_scale = 3.0;
  h.noise = Eigen::VectorXd::LinSpaced(4, 0.1, 0.4);
  const CovarianceEstimate k = assemble_covariance(kLinear, Eigen::MatrixXd::Zero(4, 2), h);
  const Eigen::MatrixXd expected = h.noise.array().square().matrix().asDiagonal();
  EXPECT_EQ(k.matrix, expected);
}

TEST(AssembleCovariance, UnitScalesNoNoiseEqualsCorrelation) {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd b = random_matrix(5, 2, rng);
  const HyperParams h = stationary_hyper(5, 0.7, 1.0, 0.0);
  for (const auto &spec : {kSe, kExp, kM32}) {
    EXPECT_EQ(assemble_covariance(spec, b, h).matrix, correlation_gram(spec, b, h));
  }
}

TEST(AssembleCovariance, DimensionMismatchIsAContractViolation) {
  HyperParams h = stationary_hyper(3, 1.0, 1.0, 0.1);
  EXPECT_THROW(assemble_covariance(kSe, Eigen::MatrixXd::Zero(4, 2), h), ContractViolation);
  h.noise = Eigen::VectorXd::Constant(2, 0.1);
  EXPECT_THROW(assemble_covariance(kLinear, Eigen::MatrixXd::Zero(3, 2), h), ContractViolation);
}

TEST(AssembleCovariance, PermutationEquivariance) {
  std::mt19937_64 rng(9);
  const Eigen::Index n = 6;
  const Eigen::MatrixXd b = random_matrix(n, 2, rng);
  HyperParams h;
  h.lengthscale = 1.1;
  h.kernel_scale = 0.8;
  h.scales = Eigen::VectorXd::LinSpaced(n, 0.2, 0.7);
  h.noise = Eigen::VectorXd::LinSpaced(n, 0.05, 0.2);
  Eigen::VectorXi perm(n);
  perm << 3, 0, 5, 1, 4, 2;
  const Eigen::PermutationMatrix<Eigen::Dynamic> p(perm);
  HyperParams hp = h;
  hp.scales = p * h.scales;
  hp.noise = p * h.noise;
  for (const auto &spec : {kSe, kExp, kM32, kLinear}) {
    const Eigen::MatrixXd k = assemble_covariance(spec, b, h).matrix;
    const Eigen::MatrixXd kp = assemble_covariance(spec, p * b, hp).matrix;
    EXPECT_LT((kp - p * k * p.transpose()).norm(), 1e-14) << to_string(spec.kind);
  }
}

TEST(SafeCholesky, IdentityGetsBaseJitter) {
  const CholeskyFactor f = safe_cholesky(Eigen::MatrixXd::Identity(4, 4));
  EXPECT_EQ(f.jitter, 1e-8);
  const Eigen::MatrixXd expected = std::sqrt(1.0 + 1e-8) * Eigen::MatrixXd::Identity(4, 4);
  EXPECT_LT((f.lower() - expected).norm(), 1e-15);
}

TEST(SafeCholesky, ExactFirstSkipsJitterWhenPositiveDefinite) {
  const CholeskyFactor f = safe_cholesky(Eigen::MatrixXd::Identity(3, 3), JitterPolicy::exact_first());
  EXPECT_EQ(f.jitter, 0.0);
}

TEST(SafeCholesky, RankOneReconstructsWithinJitter) {
  Eigen::VectorXd v(5);
  v << 1.0, -2.0, 0.5, 3.0, 1.5;
  const Eigen::MatrixXd k = v * v.transpose();
  const CholeskyFactor f = safe_cholesky(k);
  EXPECT_GT(f.jitter, 0.0);
  EXPECT_LE(f.jitter, 1e-4 * k.diagonal().mean());
  const Eigen::MatrixXd l = f.lower();
  const Eigen::MatrixXd target = k + f.jitter * Eigen::MatrixXd::Identity(5, 5);
  EXPECT_LT((l * l.transpose() - target).norm(), 1e-12 * k.norm());
}

TEST(SafeCholesky, LargeNegativeEigenvalueFails) {
  Eigen::MatrixXd k = Eigen::MatrixXd::Identity(3, 3);
  k(2, 2) = -1.0;
  try {
    safe_cholesky(k);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError &e) {
    EXPECT_NE(std::string(e.what()).find("eigen"), std::string::npos) << e.what();
  }
}

TEST(SafeCholesky, LogDeterminant) {
  Eigen::MatrixXd k(2, 2);
  k << 4, 1, 1, 3;
  const CholeskyFactor f = safe_cholesky(k, JitterPolicy::exact_first());
  EXPECT_NEAR(f.log_determinant(), std::log(11.0), 1e-14);
}

TEST(KernelNames, ParseAndPrint) {
  for (auto kind : {KernelKind::linear, KernelKind::se, KernelKind::exp, KernelKind::m32}) {
    EXPECT_EQ(parse_kernel_kind(to_string(kind)), kind);
  }
  EXPECT_EQ(parse_kernel_form("standard"), KernelForm::standard);
  EXPECT_THROW(parse_kernel_kind("rbf"), InputError);
}
