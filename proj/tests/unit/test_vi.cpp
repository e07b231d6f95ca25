#include <gtest/gtest.h>

#include <cmath>

#include "gplvm/errors.hpp"
#include "gplvm/finance.hpp"
#include "gplvm/vi.hpp"
#include "oracles.hpp"

using namespace gplvm;
using namespace gplvm::testing;

namespace {

const KernelSpec kAllKernels[] = {{KernelKind::linear, KernelForm::printed},
                                  {KernelKind::se, KernelForm::printed},
                                  {KernelKind::exp, KernelForm::printed},
                                  {KernelKind::m32, KernelForm::standard}};

ConjugateToy toy() {
  ConjugateToy t;
  t.y.resize(5);
  t.y << 0.3, -0.4, 1.1, 0.8, 0.2;
  t.noise = 0.7;
  t.prior_mean = 0.5;
  t.prior_std = 1.5;
  return t;
}

SyntheticData linear_factor_data(std::size_t n, std::size_t d, std::size_t q, std::uint64_t seed) {
  SyntheticSpec s;
  s.n_assets = n;
  s.n_days = d;
  s.latent_dim = q;
  s.noise_scales = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 0.01);
  s.kernel.kind = KernelKind::linear;
  s.kernel_scale = 0.02;
  s.seed = seed;
  return generate_synthetic(s);
}

FitConfig small_config() {
  FitConfig cfg;
  cfg.iterations = 400;
  cfg.restarts = 3;
  cfg.final_elbo_samples = 50;
  cfg.threads = 1;
  return cfg;
}

} // namespace

TEST(Transform, RoundTripIsIdentity) {
  std::mt19937_64 rng(1);
  for (const auto &spec : kAllKernels) {
    const ModelParams p = random_params(spec.kind, 5, 3, rng);
    const ParameterLayout layout(spec.kind, 5, 3);
    const ModelParams back = layout.from_unconstrained(layout.to_unconstrained(p));
    const Eigen::VectorXd a = flatten(p, spec.kind);
    const Eigen::VectorXd b = flatten(back, spec.kind);
    EXPECT_LT(((a - b).array().abs() / a.array().abs()).maxCoeff(), 1e-14);
  }
}

TEST(Transform, UnitParameterMapsToZero) {
  ModelParams p;
  p.latents = Eigen::MatrixXd::Zero(2, 1);
  p.hyper.lengthscale = 1.0;
  p.hyper.scales = Eigen::VectorXd::Ones(2);
  p.hyper.noise = Eigen::VectorXd::Ones(2);
  const Eigen::VectorXd z = to_unconstrained(p, KernelKind::se);
  EXPECT_EQ(z, Eigen::VectorXd::Zero(7));
}

TEST(Transform, JacobianIsSumOfPositiveCoordinates) {
  const ParameterLayout layout(KernelKind::linear, 1, 1);
  Eigen::VectorXd z(3);
  z << 0.4, -1.3, 0.25;
  EXPECT_DOUBLE_EQ(layout.log_jacobian(z), -1.3 + 0.25);
  EXPECT_EQ(layout.first_positive(), 1u);
}

TEST(Transform, NonFiniteInputIsAContractViolation) {
  const ParameterLayout layout(KernelKind::se, 2, 1);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.size()));
  z(3) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(layout.from_unconstrained(z), ContractViolation);
  EXPECT_THROW(layout.from_unconstrained(Eigen::VectorXd::Zero(3)), ContractViolation);
}

TEST(GplvmPosterior, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(2);
  for (const auto &spec : kAllKernels) {
    const Eigen::MatrixXd r = random_matrix(5, 9, rng);
    const GplvmPosterior target(r, spec, 2);
    Eigen::VectorXd z = 0.3 * random_matrix(static_cast<Eigen::Index>(target.dimension()), 1, rng);
    Eigen::VectorXd grad;
    const double value = target.log_density_gradient(z, grad);
    EXPECT_NEAR(value, target.log_density(z), 1e-10);
    const Eigen::VectorXd fd = central_gradient(
        [&](const Eigen::VectorXd &x) { return target.log_density(x); }, z, 1e-5);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      EXPECT_TRUE(close(grad(i), fd(i), 1e-4, 1e-6)) << to_string(spec.kind) << " coord " << i;
    }
  }
}

TEST(Entropy, DoublingStddevsAddsDimTimesLogTwo) {
  VariationalPosterior q;
  q.means = Eigen::VectorXd::Zero(7);
  q.log_stddevs = Eigen::VectorXd::LinSpaced(7, -2.0, 1.0);
  VariationalPosterior doubled = q;
  doubled.log_stddevs.array() += std::log(2.0);
  EXPECT_NEAR(gaussian_entropy(doubled) - gaussian_entropy(q), 7.0 * std::log(2.0), 1e-12);
}

TEST(Elbo, ConjugateOptimumEqualsEvidence) {
  const ConjugateToy t = toy();
  VariationalPosterior q;
  q.means = Eigen::VectorXd::Constant(1, t.posterior_mean());
  q.log_stddevs = Eigen::VectorXd::Constant(1, std::log(t.posterior_std()));
  std::mt19937_64 rng(3);
  const ElboEstimate e = elbo_estimate(q, t, 10000, rng);
  EXPECT_LE(std::abs(e.value - t.log_evidence()), 3.0 * e.std_error + 1e-12);
}

TEST(Elbo, NeverExceedsEvidence) {
  const ConjugateToy t = toy();
  std::mt19937_64 rng(4);
  for (double mean : {-2.0, 0.0, t.posterior_mean(), 1.0, 3.0}) {
    for (double sd : {0.05, t.posterior_std(), 0.5, 2.0}) {
      VariationalPosterior q;
      q.means = Eigen::VectorXd::Constant(1, mean);
      q.log_stddevs = Eigen::VectorXd::Constant(1, std::log(sd));
      const ElboEstimate e = elbo_estimate(q, t, 10000, rng);
      EXPECT_LE(e.value, t.log_evidence() + 3.0 * e.std_error) << mean << " " << sd;
    }
  }
}

TEST(Elbo, DeterministicForFixedSeed) {
  const ConjugateToy t = toy();
  VariationalPosterior q;
  q.means = Eigen::VectorXd::Constant(1, 0.2);
  q.log_stddevs = Eigen::VectorXd::Constant(1, -1.0);
  std::mt19937_64 a(5);
  std::mt19937_64 b(5);
  EXPECT_EQ(elbo_estimate(q, t, 100, a).samples, elbo_estimate(q, t, 100, b).samples);
}

TEST(Elbo, DimensionMismatchIsAContractViolation) {
  const ConjugateToy t = toy();
  VariationalPosterior q;
  q.means = Eigen::VectorXd::Zero(2);
  q.log_stddevs = Eigen::VectorXd::Zero(2);
  std::mt19937_64 rng(6);
  EXPECT_THROW(elbo_estimate(q, t, 10, rng), ContractViolation);
}

TEST(ElboGradient, MatchesFiniteDifferencesOfFixedDraws) {
  std::mt19937_64 rng(7);
  for (const auto &spec : kAllKernels) {
    const Eigen::MatrixXd r = random_matrix(6, 10, rng);
    const GplvmPosterior target(r, spec, 2);
    const auto dim = static_cast<Eigen::Index>(target.dimension());
    VariationalPosterior q;
    q.means = 0.3 * random_matrix(dim, 1, rng);
    q.log_stddevs = Eigen::VectorXd::Constant(dim, std::log(0.05));
    const Eigen::MatrixXd eps = random_matrix(dim, 64, rng);
    Eigen::VectorXd d_means;
    Eigen::VectorXd d_log_stddevs;
    elbo_gradient(q, target, eps, d_means, d_log_stddevs);
    Eigen::VectorXd packed(2 * dim);
    packed << q.means, q.log_stddevs;
    const Eigen::VectorXd fd = central_gradient(
        [&](const Eigen::VectorXd &x) {
          VariationalPosterior v{x.head(dim), x.tail(dim)};
          return elbo_from_draws(v, target, eps).value;
        },
        packed, 1e-5);
    for (Eigen::Index i = 0; i < dim; ++i) {
      EXPECT_TRUE(close(d_means(i), fd(i), 1e-3, 1e-6)) << to_string(spec.kind) << " mean " << i;
      EXPECT_TRUE(close(d_log_stddevs(i), fd(dim + i), 1e-3, 1e-6))
          << to_string(spec.kind) << " log sd " << i;
    }
  }
}

TEST(MaximizeElbo, RecoversConjugatePosterior) {
  const ConjugateToy t = toy();
  VariationalPosterior init;
  init.means = Eigen::VectorXd::Constant(1, -3.0);
  init.log_stddevs = Eigen::VectorXd::Constant(1, 0.0);
  FitConfig cfg;
  cfg.iterations = 4000;
  cfg.step_size = 0.02;
  cfg.mc_samples = 4;
  std::mt19937_64 rng(8);
  const OptimizationTrace trace = maximize_elbo(t, init, cfg, rng);
  EXPECT_NEAR(trace.posterior.means(0), t.posterior_mean(), 0.05);
  EXPECT_NEAR(std::exp(trace.posterior.log_stddevs(0)), t.posterior_std(), 0.05);
  EXPECT_EQ(trace.elbo_trace.size(), 4000u);
}

TEST(FitConfigValidation, RejectsZeroCounts) {
  FitConfig cfg;
  cfg.restarts = 0;
  EXPECT_THROW(validate(cfg), InputError);
  cfg = FitConfig{};
  cfg.step_size = 0.0;
  EXPECT_THROW(validate(cfg), InputError);
}

TEST(Fit, ImprovesOnInitialization) {
  const SyntheticData d = linear_factor_data(30, 60, 2, 10);
  const KernelSpec spec{KernelKind::linear, KernelForm::printed};
  FitConfig cfg = small_config();
  cfg.restarts = 5;
  cfg.iterations = 1000;
  const FitResult f = fit(d.returns, spec, 2, cfg);
  const GplvmPosterior target(d.returns.values, spec, 2);
  std::mt19937_64 rng = restart_rng(cfg.seed, f.restart_index);
  const VariationalPosterior init = initial_posterior(d.returns.values, spec, 2, cfg, rng);
  const ElboEstimate before = elbo_estimate(init, target, cfg.final_elbo_samples, rng);
  EXPECT_GT(f.final_elbo, before.value);
  EXPECT_EQ(f.restarts.size(), 5u);
  EXPECT_EQ(f.elbo_trace.size(), cfg.iterations);
}

TEST(Fit, CovarianceErrorAgainstSampleCovariance) {
  const KernelSpec spec{KernelKind::linear, KernelForm::printed};
  FitConfig cfg;
  cfg.restarts = 5;
  cfg.threads = 1;
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SyntheticData d = linear_factor_data(30, 60, 2, 100 + seed);
    const FitResult f = fit(d.returns, spec, 2, cfg);
    const double gp = (f.covariance().matrix - d.true_covariance).norm();
    const double sample = (sample_covariance(d.returns).matrix - d.true_covariance).norm();
    if (gp <= sample) ++wins;
  }
  EXPECT_GE(wins, 8);
}

TEST(Fit, KeepsTheBestRestart) {
  const SyntheticData d = linear_factor_data(10, 40, 2, 11);
  for (const auto &spec : kAllKernels) {
    const FitResult f = fit(d.returns, spec, 2, small_config());
    for (const auto &r : f.restarts) {
      ASSERT_TRUE(r.ok) << r.error;
      EXPECT_GE(f.final_elbo, r.final_elbo);
    }
    EXPECT_EQ(f.final_elbo, f.restarts[f.restart_index].final_elbo);
    const ParameterLayout layout(spec.kind, 10, 2);
    EXPECT_EQ(flatten(f.point_params, spec.kind),
              flatten(layout.from_unconstrained(f.posterior.means), spec.kind));
  }
}

TEST(Fit, BitIdenticalAcrossRunsAndThreadCounts) {
  const SyntheticData d = linear_factor_data(8, 30, 2, 12);
  const KernelSpec spec{KernelKind::se, KernelForm::printed};
  FitConfig cfg = small_config();
  cfg.restarts = 4;
  const FitResult a = fit(d.returns, spec, 2, cfg);
  const FitResult b = fit(d.returns, spec, 2, cfg);
  cfg.threads = 4;
  const FitResult c = fit(d.returns, spec, 2, cfg);
  for (const FitResult *other : {&b, &c}) {
    EXPECT_EQ(a.posterior.means, other->posterior.means);
    EXPECT_EQ(a.posterior.log_stddevs, other->posterior.log_stddevs);
    EXPECT_EQ(a.elbo_trace, other->elbo_trace);
    EXPECT_EQ(a.final_elbo, other->final_elbo);
    EXPECT_EQ(a.restart_index, other->restart_index);
  }
}

TEST(Fit, AllRestartsFailingReportsEachOne) {
  const SyntheticData d = linear_factor_data(6, 20, 1, 13);
  FitConfig cfg = small_config();
  cfg.step_size = 1e6;
  cfg.iterations = 50;
  try {
    fit(d.returns, {KernelKind::se, KernelForm::printed}, 1, cfg);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError &e) {
    const std::string msg = e.what();
    for (int r = 0; r < 3; ++r) {
      EXPECT_NE(msg.find("restart " + std::to_string(r)), std::string::npos) << msg;
    }
  }
}

TEST(Fit, RejectsBadInput) {
  const SyntheticData d = linear_factor_data(6, 20, 1, 14);
  EXPECT_THROW(fit(d.returns, {}, 0, small_config()), InputError);
  ReturnMatrix one = d.returns.slice_days(0, 1);
  EXPECT_THROW(fit(one, {}, 1, small_config()), InputError);
}

TEST(SelectLatentDim, SingleValueRange) {
  const SyntheticData d = linear_factor_data(8, 30, 2, 15);
  const LatentDimSelection s =
      select_latent_dim(d.returns, {KernelKind::linear, KernelForm::printed}, {2}, small_config());
  EXPECT_EQ(s.best_latent_dim, 2u);
  ASSERT_EQ(s.rows.size(), 1u);
  EXPECT_EQ(s.best().latent_dim, 2u);
}

TEST(SelectLatentDim, OneRowPerLatentDim) {
  const SyntheticData d = linear_factor_data(8, 30, 2, 16);
  const LatentDimSelection s = select_latent_dim(
      d.returns, {KernelKind::linear, KernelForm::printed}, {1, 2, 3}, small_config());
  ASSERT_EQ(s.rows.size(), 3u);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(s.rows[i].latent_dim, i + 1);
    EXPECT_TRUE(s.rows[i].ok);
    EXPECT_GT(s.rows[i].std_error, 0.0);
    best = std::max(best, s.rows[i].elbo);
  }
  EXPECT_EQ(s.best().final_elbo, best);
  EXPECT_THROW(select_latent_dim(d.returns, {}, {}, small_config()), InputError);
}
