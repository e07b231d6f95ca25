#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gplvm/data.hpp"
#include "gplvm/kernels.hpp"
#include "gplvm/model.hpp"
#include "gplvm/vi.hpp"

namespace gplvm {

struct PortfolioWeights {
  std::vector<std::string> tickers;
  Eigen::VectorXd weights;
};

/// Euclidean projection onto {w : sum w = 1, 0 <= w_i <= cap}.
/// Throws InputError when cap * N < 1.
Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd &v, double cap);

struct MinVarianceOptions {
  std::size_t max_iterations = 200000;
  double tolerance = 1e-10; ///< max-norm movement between iterates
};

/// Minimizes w^T K w over the capped simplex with projected gradient steps
/// of length 1/L (L: Gershgorin bound on the largest eigenvalue).
PortfolioWeights min_variance_weights(const CovarianceEstimate &k, double cap,
                                      const std::vector<std::string> &tickers = {},
                                      const MinVarianceOptions &options = {});

PortfolioWeights equal_weights(std::size_t n_assets,
                               const std::vector<std::string> &tickers = {});

/// (1/D) (r - mu)(r - mu)^T with per-asset means mu.
CovarianceEstimate sample_covariance(const Eigen::MatrixXd &returns);
CovarianceEstimate sample_covariance(const ReturnMatrix &returns);

/// Optimal shrinkage intensity toward tr(S)/N * I, clipped to [0, 1].
double ledoit_wolf_intensity(const Eigen::MatrixXd &returns);
CovarianceEstimate ledoit_wolf(const Eigen::MatrixXd &returns);
CovarianceEstimate ledoit_wolf(const ReturnMatrix &returns);

struct AnnualizedStats {
  double mean = 0.0;
  double std = 0.0;
  std::optional<double> sharpe; ///< empty when std == 0
};

/// Population mean/std of daily returns, scaled by A and sqrt(A).
AnnualizedStats sharpe_ratio(std::span<const double> daily_returns,
                             double annualization_days = 252.0);

struct BacktestConfig {
  std::size_t train_days = 252;
  std::size_t hold_days = 126;
  double weight_cap = 0.1;
  /// Any of linear, se, exp, m32 (GP-LVM fits), sample, ledoit, equal.
  std::vector<std::string> estimators{"linear", "se", "exp", "m32", "sample", "ledoit", "equal"};
  std::size_t latent_dim = 3;
  double annualization_days = 252.0;
  KernelForm kernel_form = KernelForm::printed;
};

struct BacktestPeriod {
  std::size_t train_begin = 0; ///< first training day
  std::size_t hold_begin = 0;  ///< first holding day (= train_begin + train_days)
  std::size_t hold_end = 0;    ///< one past the last holding day
  Eigen::VectorXd weights;
  std::vector<double> returns; ///< daily portfolio returns over the hold window
};

struct EstimatorReport {
  std::string estimator;
  AnnualizedStats stats;
  std::vector<BacktestPeriod> periods;
};

struct BacktestReport {
  std::vector<std::string> tickers;
  BacktestConfig config;
  std::size_t n_periods = 0;
  std::vector<EstimatorReport> estimators;
};

/// Number of complete rebalancing periods for D days.
std::size_t backtest_periods(std::size_t n_days, const BacktestConfig &cfg);

/// Covariance for one estimator tag from a training window.
CovarianceEstimate estimate_covariance(const std::string &estimator, const ReturnMatrix &train,
                                       const BacktestConfig &cfg, const FitConfig &fit_cfg,
                                       const PriorConfig &prior = {});

/// Rolling min-variance backtest: estimate on the trailing train_days, hold
/// the weights for hold_days, move forward by hold_days.
BacktestReport backtest(const ReturnMatrix &returns, const BacktestConfig &cfg,
                        const FitConfig &fit_cfg, const PriorConfig &prior = {});

} // namespace gplvm
