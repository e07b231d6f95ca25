#pragma once

#include <cstddef>

#include <Eigen/Core>

#include "gplvm/data.hpp"
#include "gplvm/kernels.hpp"

namespace gplvm {

struct ModelParams {
  Eigen::MatrixXd latents; ///< N x Q
  HyperParams hyper;
};

/// Priors: B ~ N(0, latent_std^2); lengthscale (stationary) or kernel_scale
/// (linear) ~ InvGamma(shape, scale); scales and noise ~ half-normal with
/// the given variance.
struct PriorConfig {
  double latent_std = 1.0;
  double invgamma_shape = 3.0;
  double invgamma_scale = 1.0;
  double halfnormal_variance = 0.5;
};

/// Number of free parameters: N*Q latents, one kernel parameter, N noise
/// levels and, for stationary kernels, N signal scales.
std::size_t parameter_count(KernelKind kind, std::size_t n_assets, std::size_t latent_dim);

/// Throws ContractViolation on shape mismatch or non-positive scale parameters.
void validate_params(const ModelParams &params, const KernelSpec &spec);

double log_normal_density(double x, double stddev);
/// Shape-scale parameterization, density ∝ x^(-shape-1) exp(-scale/x).
double log_inverse_gamma_density(double x, double shape, double scale);
double log_half_normal_density(double x, double variance);

/// The data enter the likelihood only through r r^T. When D > N the
/// N x D matrix is replaced by an N x N factor F with F F^T = r r^T
/// (R^T of a QR decomposition of r^T), so every later solve costs O(N^3).
class LikelihoodData {
public:
  explicit LikelihoodData(const Eigen::MatrixXd &returns, bool compress = true);

  const Eigen::MatrixXd &factor() const { return factor_; }
  Eigen::Index n_assets() const { return factor_.rows(); }
  Eigen::Index n_days() const { return n_days_; }

private:
  Eigen::MatrixXd factor_;
  Eigen::Index n_days_;
};

/// log p(r | K) for D independent N(0, K) columns.
double log_marginal_likelihood(const Eigen::MatrixXd &returns, const CovarianceEstimate &k);
double log_marginal_likelihood(const LikelihoodData &data, const Eigen::MatrixXd &k);

double log_prior(const ModelParams &params, KernelKind kind, const PriorConfig &cfg);

double log_joint(const ReturnMatrix &returns, const ModelParams &params,
                 const KernelSpec &spec, const PriorConfig &cfg);
double log_joint(const LikelihoodData &data, const ModelParams &params,
                 const KernelSpec &spec, const PriorConfig &cfg);

struct LogJointGradient {
  double value = 0.0;
  ModelParams gradient; ///< same shapes as the input parameters
  double jitter = 0.0;  ///< jitter the likelihood factorization needed
};

LogJointGradient log_joint_gradient(const ReturnMatrix &returns, const ModelParams &params,
                                    const KernelSpec &spec, const PriorConfig &cfg);
LogJointGradient log_joint_gradient(const LikelihoodData &data, const ModelParams &params,
                                    const KernelSpec &spec, const PriorConfig &cfg);

} // namespace gplvm
