#pragma once

#include <string>
#include <string_view>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace gplvm {

enum class KernelKind { linear, se, exp, m32 };

/// Which lengthscale convention the exp and m32 kernels follow.
///
/// `printed` uses exp(-d/(2l)) and (1 + sqrt(3) d/l) exp(-sqrt(3) d/(2l)).
/// `standard` uses the textbook exp(-d/l) and (1 + sqrt(3) d/l)
/// exp(-sqrt(3) d/l). The printed m32 is not positive definite in general;
/// prefer `standard` when fitting with it.
enum class KernelForm { printed, standard };

struct KernelSpec {
  KernelKind kind = KernelKind::se;
  KernelForm form = KernelForm::printed;

  bool stationary() const noexcept { return kind != KernelKind::linear; }
};

std::string to_string(KernelKind kind);
std::string to_string(KernelForm form);
/// Throws InputError for names outside {linear, se, exp, m32}.
KernelKind parse_kernel_kind(std::string_view name);
KernelForm parse_kernel_form(std::string_view name);

/// Kernel hyperparameters. `lengthscale` is used by stationary kernels,
/// `kernel_scale` (K = kernel_scale^2 B B^T) by the linear kernel, `scales`
/// only by stationary kernels. `noise` holds per-asset residual std devs.
struct HyperParams {
  double lengthscale = 1.0;
  double kernel_scale = 1.0;
  Eigen::VectorXd scales;
  Eigen::VectorXd noise;
};

struct CovarianceEstimate {
  Eigen::MatrixXd matrix;
  std::string tag;
};

/// Euclidean distances between the rows of `latents`.
Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd &latents);

/// Stationary correlation as a function of distance.
double correlation(const KernelSpec &spec, double distance, double lengthscale);

/// Unit-diagonal Gram matrix of a stationary kernel.
Eigen::MatrixXd correlation_gram(const KernelSpec &spec,
                                 const Eigen::MatrixXd &latents,
                                 const HyperParams &hyper);

/// Gram matrix plus the two partial derivatives the model needs.
/// `by_squared_distance(i,j)` is dk/d(d_ij^2) (zero where d_ij == 0 and the
/// kernel has a kink there); `by_lengthscale(i,j)` is dk/dl.
struct CorrelationDerivatives {
  Eigen::MatrixXd value;
  Eigen::MatrixXd by_squared_distance;
  Eigen::MatrixXd by_lengthscale;
};

CorrelationDerivatives correlation_gram_derivatives(
    const KernelSpec &spec, const Eigen::MatrixXd &latents, double lengthscale);

/// Full covariance: linear -> s^2 B B^T + diag(noise^2);
/// stationary -> diag(scales) C diag(scales) + diag(noise^2).
CovarianceEstimate assemble_covariance(const KernelSpec &spec,
                                       const Eigen::MatrixXd &latents,
                                       const HyperParams &hyper);

/// Signal part only (assemble_covariance without the noise diagonal).
Eigen::MatrixXd signal_covariance(const KernelSpec &spec,
                                  const Eigen::MatrixXd &latents,
                                  const HyperParams &hyper);

/// Jitter schedule, relative to mean(diag K). Starts at `initial`, grows by
/// `growth` per failed attempt and gives up beyond `maximum`. With
/// `try_exact_first` an unjittered attempt precedes the schedule.
struct JitterPolicy {
  double initial = 1e-8;
  double maximum = 1e-4;
  double growth = 10.0;
  bool try_exact_first = false;

  static JitterPolicy exact_first() {
    JitterPolicy p;
    p.try_exact_first = true;
    return p;
  }
};

struct CholeskyFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0; ///< absolute value added to the diagonal

  Eigen::MatrixXd lower() const { return llt.matrixL(); }
  double log_determinant() const;
};

/// Factor K + jitter*I. Throws NumericalError (with an eigenvalue-based
/// condition report) when even the largest jitter fails.
CholeskyFactor safe_cholesky(const Eigen::MatrixXd &matrix,
                             const JitterPolicy &policy = {});

} // namespace gplvm
