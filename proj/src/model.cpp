#include "gplvm/model.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/QR>

#include "gplvm/errors.hpp"

namespace gplvm {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

} // namespace

std::size_t parameter_count(KernelKind kind, std::size_t n_assets, std::size_t latent_dim) {
  const std::size_t scales = kind == KernelKind::linear ? 0 : n_assets;
  return n_assets * latent_dim + 1 + scales + n_assets;
}

void validate_params(const ModelParams &params, const KernelSpec &spec) {
  const Eigen::Index n = params.latents.rows();
  if (params.latents.cols() < 1) throw ContractViolation("latent dimension must be >= 1");
  if (!params.latents.allFinite()) throw ContractViolation("latent positions must be finite");
  const HyperParams &h = params.hyper;
  if (h.noise.size() != n) throw ContractViolation("noise vector length differs from N");
  if (!(h.noise.array() > 0.0).all() || !h.noise.allFinite()) {
    throw ContractViolation("noise levels must be positive and finite");
  }
  if (spec.stationary()) {
    if (h.scales.size() != n) throw ContractViolation("scale vector length differs from N");
    if (!(h.scales.array() > 0.0).all() || !h.scales.allFinite()) {
      throw ContractViolation("signal scales must be positive and finite");
    }
    if (!positive(h.lengthscale)) throw ContractViolation("lengthscale must be positive");
  } else if (!positive(h.kernel_scale)) {
    throw ContractViolation("kernel scale must be positive");
  }
}

double log_normal_density(double x, double stddev) {
  const double z = x / stddev;
  return -0.5 * kLog2Pi - std::log(stddev) - 0.5 * z * z;
}

double log_inverse_gamma_density(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) -
         scale / x;
}

double log_half_normal_density(double x, double variance) {
  return std::log(2.0) - 0.5 * kLog2Pi - 0.5 * std::log(variance) - 0.5 * x * x / variance;
}

LikelihoodData::LikelihoodData(const Eigen::MatrixXd &returns, bool compress)
    : n_days_(returns.cols()) {
  const Eigen::Index n = returns.rows();
  if (!compress || returns.cols() <= n) {
    factor_ = returns;
    return;
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(returns.transpose());
  factor_ = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>().transpose();
}

namespace {

struct LikelihoodTerms {
  double value;
  Eigen::MatrixXd dk; // dL/dK, symmetric
  double jitter;
};

LikelihoodTerms likelihood_terms(const LikelihoodData &data, const Eigen::MatrixXd &k,
                                 bool with_gradient) {
  const Eigen::Index n = data.n_assets();
  if (k.rows() != n || k.cols() != n) {
    throw ContractViolation("covariance is " + std::to_string(k.rows()) + "x" +
                            std::to_string(k.cols()) + ", data has " + std::to_string(n) +
                            " assets");
  }
  const CholeskyFactor chol = safe_cholesky(k, JitterPolicy::exact_first());
  const double days = static_cast<double>(data.n_days());
  const Eigen::MatrixXd whitened = chol.llt.matrixL().solve(data.factor());
  LikelihoodTerms out;
  out.jitter = chol.jitter;
  out.value = -0.5 * static_cast<double>(n) * days * kLog2Pi -
              0.5 * days * chol.log_determinant() - 0.5 * whitened.squaredNorm();
  if (with_gradient) {
    const Eigen::MatrixXd alpha = chol.llt.matrixU().solve(whitened);
    const Eigen::MatrixXd k_inv = chol.llt.solve(Eigen::MatrixXd::Identity(n, n));
    out.dk = 0.5 * (alpha * alpha.transpose() - days * k_inv);
    out.dk = 0.5 * (out.dk + out.dk.transpose()).eval();
  }
  return out;
}

ModelParams zeros_like(const ModelParams &params) {
  ModelParams g;
  g.latents = Eigen::MatrixXd::Zero(params.latents.rows(), params.latents.cols());
  g.hyper.lengthscale = 0.0;
  g.hyper.kernel_scale = 0.0;
  g.hyper.scales = Eigen::VectorXd::Zero(params.hyper.scales.size());
  g.hyper.noise = Eigen::VectorXd::Zero(params.hyper.noise.size());
  return g;
}

// Pulls dL/dK back onto the kernel parameters; accumulates into `grad`.
void backprop_covariance(const KernelSpec &spec, const ModelParams &params,
                         const Eigen::MatrixXd &dk, ModelParams &grad) {
  const Eigen::MatrixXd &b = params.latents;
  const HyperParams &h = params.hyper;
  grad.hyper.noise.array() += 2.0 * h.noise.array() * dk.diagonal().array();

  if (spec.kind == KernelKind::linear) {
    const double s = h.kernel_scale;
    const Eigen::MatrixXd dk_b = dk * b;
    grad.latents += 2.0 * s * s * dk_b;
    grad.hyper.kernel_scale += 2.0 * s * (b.transpose() * dk_b).trace();
    return;
  }

  const CorrelationDerivatives c = correlation_gram_derivatives(spec, b, h.lengthscale);
  // Sensitivity to each correlation entry: H = dL/dK o (s s^T).
  const Eigen::MatrixXd weighted =
      dk.cwiseProduct(h.scales * h.scales.transpose());
  grad.hyper.scales += 2.0 * dk.cwiseProduct(c.value) * h.scales;
  grad.hyper.lengthscale += weighted.cwiseProduct(c.by_lengthscale).sum();
  const Eigen::MatrixXd m = weighted.cwiseProduct(c.by_squared_distance);
  grad.latents += 4.0 * (m.rowwise().sum().asDiagonal() * b - m * b);
}

void add_prior_gradient(const ModelParams &params, KernelKind kind, const PriorConfig &cfg,
                        ModelParams &grad) {
  const double var_b = cfg.latent_std * cfg.latent_std;
  grad.latents -= params.latents / var_b;
  auto inv_gamma = [&](double x) {
    return -(cfg.invgamma_shape + 1.0) / x + cfg.invgamma_scale / (x * x);
  };
  if (kind == KernelKind::linear) {
    grad.hyper.kernel_scale += inv_gamma(params.hyper.kernel_scale);
  } else {
    grad.hyper.lengthscale += inv_gamma(params.hyper.lengthscale);
    grad.hyper.scales -= params.hyper.scales / cfg.halfnormal_variance;
  }
  grad.hyper.noise -= params.hyper.noise / cfg.halfnormal_variance;
}

} // namespace

double log_marginal_likelihood(const LikelihoodData &data, const Eigen::MatrixXd &k) {
  return likelihood_terms(data, k, false).value;
}

double log_marginal_likelihood(const Eigen::MatrixXd &returns, const CovarianceEstimate &k) {
  return log_marginal_likelihood(LikelihoodData(returns, false), k.matrix);
}

double log_prior(const ModelParams &params, KernelKind kind, const PriorConfig &cfg) {
  double total = 0.0;
  const Eigen::MatrixXd &b = params.latents;
  for (Eigen::Index j = 0; j < b.cols(); ++j)
    for (Eigen::Index i = 0; i < b.rows(); ++i) total += log_normal_density(b(i, j), cfg.latent_std);
  const HyperParams &h = params.hyper;
  if (kind == KernelKind::linear) {
    total += log_inverse_gamma_density(h.kernel_scale, cfg.invgamma_shape, cfg.invgamma_scale);
  } else {
    total += log_inverse_gamma_density(h.lengthscale, cfg.invgamma_shape, cfg.invgamma_scale);
    for (Eigen::Index i = 0; i < h.scales.size(); ++i)
      total += log_half_normal_density(h.scales(i), cfg.halfnormal_variance);
  }
  for (Eigen::Index i = 0; i < h.noise.size(); ++i)
    total += log_half_normal_density(h.noise(i), cfg.halfnormal_variance);
  return total;
}

double log_joint(const LikelihoodData &data, const ModelParams &params, const KernelSpec &spec,
                 const PriorConfig &cfg) {
  validate_params(params, spec);
  const CovarianceEstimate k = assemble_covariance(spec, params.latents, params.hyper);
  return log_marginal_likelihood(data, k.matrix) + log_prior(params, spec.kind, cfg);
}

double log_joint(const ReturnMatrix &returns, const ModelParams &params, const KernelSpec &spec,
                 const PriorConfig &cfg) {
  return log_joint(LikelihoodData(returns.values), params, spec, cfg);
}

LogJointGradient log_joint_gradient(const LikelihoodData &data, const ModelParams &params,
                                    const KernelSpec &spec, const PriorConfig &cfg) {
  validate_params(params, spec);
  const CovarianceEstimate k = assemble_covariance(spec, params.latents, params.hyper);
  LikelihoodTerms lik = likelihood_terms(data, k.matrix, true);
  LogJointGradient out;
  out.value = lik.value + log_prior(params, spec.kind, cfg);
  out.jitter = lik.jitter;
  out.gradient = zeros_like(params);
  backprop_covariance(spec, params, lik.dk, out.gradient);
  add_prior_gradient(params, spec.kind, cfg, out.gradient);
  return out;
}

LogJointGradient log_joint_gradient(const ReturnMatrix &returns, const ModelParams &params,
                                    const KernelSpec &spec, const PriorConfig &cfg) {
  return log_joint_gradient(LikelihoodData(returns.values), params, spec, cfg);
}

} // namespace gplvm
