#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gplvm/data.hpp"
#include "gplvm/kernels.hpp"
#include "gplvm/model.hpp"

namespace gplvm {

/// Maps model parameters to R^dim: latents unchanged, every positive
/// parameter through its natural log. Layout: latents (row-major), kernel
/// parameter, signal scales (stationary only), noise levels.
class ParameterLayout {
public:
  ParameterLayout(KernelKind kind, std::size_t n_assets, std::size_t latent_dim);

  std::size_t size() const { return size_; }
  std::size_t n_assets() const { return n_; }
  std::size_t latent_dim() const { return q_; }
  KernelKind kind() const { return kind_; }
  /// Coordinates from this index on are log-transformed positives.
  std::size_t first_positive() const { return n_ * q_; }

  Eigen::VectorXd to_unconstrained(const ModelParams &params) const;
  ModelParams from_unconstrained(const Eigen::VectorXd &z) const;
  /// log |d params / d z|, i.e. the sum of the log-transformed coordinates.
  double log_jacobian(const Eigen::VectorXd &z) const;
  /// Gradient wrt z of [f(params(z)) + log_jacobian(z)] given df/dparams.
  Eigen::VectorXd pull_back(const ModelParams &gradient, const ModelParams &params) const;

private:
  KernelKind kind_;
  std::size_t n_;
  std::size_t q_;
  std::size_t size_;
};

Eigen::VectorXd to_unconstrained(const ModelParams &params, KernelKind kind);
ModelParams from_unconstrained(const Eigen::VectorXd &z, KernelKind kind, std::size_t n_assets,
                               std::size_t latent_dim);

/// Unnormalized log density on an unconstrained space.
class LogDensity {
public:
  virtual ~LogDensity() = default;
  virtual std::size_t dimension() const = 0;
  virtual double log_density(const Eigen::VectorXd &z) const = 0;
  virtual double log_density_gradient(const Eigen::VectorXd &z, Eigen::VectorXd &grad) const = 0;
};

/// GP-LVM log joint in unconstrained coordinates, Jacobian included.
class GplvmPosterior final : public LogDensity {
public:
  GplvmPosterior(const Eigen::MatrixXd &returns, KernelSpec spec, std::size_t latent_dim,
                 PriorConfig prior = {});

  std::size_t dimension() const override { return layout_.size(); }
  double log_density(const Eigen::VectorXd &z) const override;
  double log_density_gradient(const Eigen::VectorXd &z, Eigen::VectorXd &grad) const override;

  const ParameterLayout &layout() const { return layout_; }
  const KernelSpec &kernel() const { return spec_; }

private:
  LikelihoodData data_;
  KernelSpec spec_;
  PriorConfig prior_;
  ParameterLayout layout_;
};

/// Mean-field Gaussian q(z) = prod_k N(means_k, exp(log_stddevs_k)^2).
struct VariationalPosterior {
  Eigen::VectorXd means;
  Eigen::VectorXd log_stddevs;

  std::size_t dimension() const { return static_cast<std::size_t>(means.size()); }
};

double gaussian_entropy(const VariationalPosterior &q);

struct ElboEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::vector<double> samples; ///< per-draw log density + entropy
};

/// Monte-Carlo ELBO with `n_samples` reparameterized draws from `rng`.
ElboEstimate elbo_estimate(const VariationalPosterior &q, const LogDensity &target,
                           std::size_t n_samples, std::mt19937_64 &rng);

/// ELBO for fixed standard-normal draws `eps` (dimension x samples).
ElboEstimate elbo_from_draws(const VariationalPosterior &q, const LogDensity &target,
                             const Eigen::MatrixXd &eps);

/// Reparameterization gradient for fixed draws; returns the ELBO estimate.
double elbo_gradient(const VariationalPosterior &q, const LogDensity &target,
                     const Eigen::MatrixXd &eps, Eigen::VectorXd &d_means,
                     Eigen::VectorXd &d_log_stddevs);

struct FitConfig {
  std::size_t iterations = 3000;
  double step_size = 0.05;
  std::size_t mc_samples = 3;
  std::size_t restarts = 50;
  std::size_t final_elbo_samples = 100;
  std::uint64_t seed = 0;
  std::size_t threads = 0; ///< 0 means hardware concurrency
  double init_stddev = 0.1;
};

void validate(const FitConfig &cfg);

struct OptimizationTrace {
  VariationalPosterior posterior;
  std::vector<double> elbo_trace;
};

/// Adam ascent (beta1 0.9, beta2 0.999, eps 1e-8, constant step) on the
/// reparameterized ELBO.
OptimizationTrace maximize_elbo(const LogDensity &target, VariationalPosterior init,
                                const FitConfig &cfg, std::mt19937_64 &rng);

/// Per-restart RNG stream, independent of scheduling.
std::mt19937_64 restart_rng(std::uint64_t seed, std::size_t restart);

/// Starting point for one restart: latent means from N(0,1), l = 1 or
/// kernel_scale = 1, scales = per-asset std, noise = half of that.
VariationalPosterior initial_posterior(const Eigen::MatrixXd &returns, const KernelSpec &spec,
                                       std::size_t latent_dim, const FitConfig &cfg,
                                       std::mt19937_64 &rng);

struct RestartOutcome {
  std::size_t index = 0;
  bool ok = false;
  double final_elbo = 0.0;
  double std_error = 0.0;
  std::string error;
};

struct FitResult {
  KernelSpec kernel;
  std::size_t latent_dim = 0;
  std::vector<std::string> tickers;
  Eigen::VectorXd asset_means; ///< per-asset mean of the training returns
  std::size_t n_days = 0;
  VariationalPosterior posterior;
  std::vector<double> elbo_trace;
  double final_elbo = 0.0;
  double final_elbo_se = 0.0;
  ModelParams point_params; ///< decoded from the posterior means
  std::size_t restart_index = 0;
  std::vector<RestartOutcome> restarts;
  FitConfig config;
  PriorConfig prior;

  CovarianceEstimate covariance() const;
};

/// Runs cfg.restarts independent optimizations (concurrently when
/// cfg.threads allows) and keeps the one with the highest final ELBO.
/// Throws NumericalError listing every restart's failure if none succeeds.
FitResult fit(const ReturnMatrix &returns, const KernelSpec &spec, std::size_t latent_dim,
              const FitConfig &cfg, const PriorConfig &prior = {});

struct LatentDimSelection {
  struct Row {
    std::size_t latent_dim = 0;
    bool ok = false;
    double elbo = 0.0;
    double std_error = 0.0;
    std::string error;
    std::optional<FitResult> fit;
  };
  std::vector<Row> rows;
  std::size_t best_latent_dim = 0;

  const FitResult &best() const;
};

/// Fits every Q in `latent_dims`; ties go to the smallest Q. Failed Q values
/// are kept as rows with ok == false.
LatentDimSelection select_latent_dim(const ReturnMatrix &returns, const KernelSpec &spec,
                                     const std::vector<std::size_t> &latent_dims,
                                     const FitConfig &cfg, const PriorConfig &prior = {});

} // namespace gplvm
