#include "gplvm/kernels.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "gplvm/errors.hpp"

namespace gplvm {

namespace {

const double kSqrt3 = std::sqrt(3.0);

struct KernelValue {
  double value;
  double by_squared_distance;
  double by_lengthscale;
};

// Coefficients of m32 written as (1 + a d) exp(-b d).
void m32_coefficients(KernelForm form, double l, double &a, double &b) {
  a = kSqrt3 / l;
  b = form == KernelForm::printed ? kSqrt3 / (2.0 * l) : kSqrt3 / l;
}

KernelValue evaluate(const KernelSpec &spec, double d, double l) {
  switch (spec.kind) {
  case KernelKind::se: {
    const double k = std::exp(-d * d / (2.0 * l * l));
    return {k, -k / (2.0 * l * l), k * d * d / (l * l * l)};
  }
  case KernelKind::exp: {
    const double c = spec.form == KernelForm::printed ? 2.0 * l : l;
    const double k = std::exp(-d / c);
    // dc/dl is 2 (printed) or 1, so dk/dl = k d / (c l).
    const double by_l = k * d / (c * l);
    const double by_d2 = d > 0.0 ? -k / (2.0 * c * d) : 0.0;
    return {k, by_d2, by_l};
  }
  case KernelKind::m32: {
    double a = 0.0;
    double b = 0.0;
    m32_coefficients(spec.form, l, a, b);
    const double e = std::exp(-b * d);
    const double k = (1.0 + a * d) * e;
    const double dk_dd = e * (a - b - a * b * d);
    const double by_d2 = d > 0.0 ? dk_dd / (2.0 * d) : 0.0;
    // a and b are both proportional to 1/l.
    const double by_l = d * e * (-a + b + a * b * d) / l;
    return {k, by_d2, by_l};
  }
  case KernelKind::linear:
    break;
  }
  throw ContractViolation("stationary kernel required, got linear");
}

void require_stationary(const KernelSpec &spec) {
  if (!spec.stationary()) {
    throw ContractViolation("correlation_gram requires a stationary kernel");
  }
}

} // namespace

std::string to_string(KernelKind kind) {
  switch (kind) {
  case KernelKind::linear:
    return "linear";
  case KernelKind::se:
    return "se";
  case KernelKind::exp:
    return "exp";
  case KernelKind::m32:
    return "m32";
  }
  return "unknown";
}

std::string to_string(KernelForm form) {
  return form == KernelForm::printed ? "printed" : "standard";
}

KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "linear") return KernelKind::linear;
  if (name == "se") return KernelKind::se;
  if (name == "exp") return KernelKind::exp;
  if (name == "m32") return KernelKind::m32;
  throw InputError("unknown kernel '" + std::string(name) +
                   "' (expected linear, se, exp or m32)");
}

KernelForm parse_kernel_form(std::string_view name) {
  if (name == "printed") return KernelForm::printed;
  if (name == "standard") return KernelForm::standard;
  throw InputError("unknown kernel form '" + std::string(name) +
                   "' (expected printed or standard)");
}

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd &latents) {
  const Eigen::Index n = latents.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = (latents.row(i) - latents.row(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

double correlation(const KernelSpec &spec, double distance, double lengthscale) {
  require_stationary(spec);
  return evaluate(spec, distance, lengthscale).value;
}

Eigen::MatrixXd correlation_gram(const KernelSpec &spec,
                                 const Eigen::MatrixXd &latents,
                                 const HyperParams &hyper) {
  require_stationary(spec);
  const Eigen::Index n = latents.rows();
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    c(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double d = (latents.row(i) - latents.row(j)).norm();
      const double v = evaluate(spec, d, hyper.lengthscale).value;
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

CorrelationDerivatives correlation_gram_derivatives(
    const KernelSpec &spec, const Eigen::MatrixXd &latents, double lengthscale) {
  require_stationary(spec);
  const Eigen::Index n = latents.rows();
  CorrelationDerivatives out{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n),
                             Eigen::MatrixXd(n, n)};
  const KernelValue at_zero = evaluate(spec, 0.0, lengthscale);
  for (Eigen::Index j = 0; j < n; ++j) {
    out.value(j, j) = 1.0;
    out.by_squared_distance(j, j) = at_zero.by_squared_distance;
    out.by_lengthscale(j, j) = 0.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double d = (latents.row(i) - latents.row(j)).norm();
      const KernelValue kv = evaluate(spec, d, lengthscale);
      out.value(i, j) = out.value(j, i) = kv.value;
      out.by_squared_distance(i, j) = out.by_squared_distance(j, i) =
          kv.by_squared_distance;
      out.by_lengthscale(i, j) = out.by_lengthscale(j, i) = kv.by_lengthscale;
    }
  }
  return out;
}

Eigen::MatrixXd signal_covariance(const KernelSpec &spec,
                                  const Eigen::MatrixXd &latents,
                                  const HyperParams &hyper) {
  const Eigen::Index n = latents.rows();
  if (spec.kind == KernelKind::linear) {
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
    k.selfadjointView<Eigen::Lower>().rankUpdate(latents,
                                                 hyper.kernel_scale * hyper.kernel_scale);
    return k.selfadjointView<Eigen::Lower>();
  }
  if (hyper.scales.size() != n) {
    throw ContractViolation("scales has " + std::to_string(hyper.scales.size()) +
                            " entries, expected " + std::to_string(n));
  }
  const Eigen::MatrixXd c = correlation_gram(spec, latents, hyper);
  return (hyper.scales * hyper.scales.transpose()).cwiseProduct(c);
}

CovarianceEstimate assemble_covariance(const KernelSpec &spec,
                                       const Eigen::MatrixXd &latents,
                                       const HyperParams &hyper) {
  if (hyper.noise.size() != latents.rows()) {
    throw ContractViolation("noise has " + std::to_string(hyper.noise.size()) +
                            " entries, expected " + std::to_string(latents.rows()));
  }
  CovarianceEstimate out;
  out.matrix = signal_covariance(spec, latents, hyper);
  out.matrix.diagonal() += hyper.noise.array().square().matrix();
  out.tag = "gplvm-" + to_string(spec.kind) + "-Q" + std::to_string(latents.cols());
  return out;
}

double CholeskyFactor::log_determinant() const {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

namespace {

bool try_factor(const Eigen::MatrixXd &matrix, double jitter,
                Eigen::LLT<Eigen::MatrixXd> &llt) {
  Eigen::MatrixXd shifted = matrix;
  shifted.diagonal().array() += jitter;
  llt.compute(shifted);
  if (llt.info() != Eigen::Success) return false;
  const auto diag = llt.matrixLLT().diagonal();
  return (diag.array() > 0.0).all() && diag.allFinite();
}

} // namespace

CholeskyFactor safe_cholesky(const Eigen::MatrixXd &matrix,
                             const JitterPolicy &policy) {
  if (matrix.rows() != matrix.cols()) {
    throw ContractViolation("safe_cholesky needs a square matrix");
  }
  if (!matrix.allFinite()) {
    throw NumericalError("safe_cholesky: matrix has non-finite entries");
  }
  CholeskyFactor out;
  if (matrix.rows() == 0) {
    out.llt.compute(matrix);
    return out;
  }
  if (policy.try_exact_first && try_factor(matrix, 0.0, out.llt)) {
    out.jitter = 0.0;
    return out;
  }
  const double scale = matrix.diagonal().mean();
  const double base = scale > 0.0 ? scale : 1.0;
  // The loop compares relative factors so 1e-8 * 10^4 reaches 1e-4 exactly.
  for (double rel = policy.initial; rel <= policy.maximum * (1.0 + 1e-9);
       rel *= policy.growth) {
    if (try_factor(matrix, rel * base, out.llt)) {
      out.jitter = rel * base;
      return out;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(matrix, Eigen::EigenvaluesOnly);
  std::ostringstream msg;
  msg << "Cholesky factorization failed at maximum jitter " << policy.maximum * base
      << "; eigenvalues span [" << eig.eigenvalues().minCoeff() << ", "
      << eig.eigenvalues().maxCoeff() << "]";
  throw NumericalError(msg.str());
}

} // namespace gplvm
