#pragma once

#include <map>
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

struct PredictiveDistribution {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Zero-mean Gaussian conditional of the `target` entries given the
/// `observed` entries, with every block read from `k`.
PredictiveDistribution gp_conditional(const Eigen::MatrixXd &k,
                                      const std::vector<std::size_t> &observed,
                                      const Eigen::VectorXd &observed_values,
                                      const std::vector<std::size_t> &target);

struct ImputationCell {
  std::size_t asset = 0;
  std::size_t day = 0;
  double actual = 0.0;
  double predicted = 0.0;
  double baseline = 0.0;
};

struct ImputationReport {
  std::vector<std::string> tickers;
  std::vector<Date> dates;
  Eigen::MatrixXd actual;    ///< N x D
  Eigen::MatrixXd predicted; ///< leave-one-out GP means
  Eigen::MatrixXd baseline;  ///< historical (training) mean per asset
  double r2 = 0.0;           ///< pooled over all cells
  double mean_abs_dev = 0.0;
  double baseline_r2 = 0.0;
  double baseline_mean_abs_dev = 0.0;
  std::vector<std::optional<double>> asset_r2; ///< empty when an asset is constant

  std::vector<ImputationCell> cells() const;
};

/// Predicts every (asset, day) from the other assets on the same day.
/// `historical_means` (length N) is the baseline prediction.
ImputationReport loocv_impute(const ReturnMatrix &test, const CovarianceEstimate &k,
                              const Eigen::VectorXd &historical_means);

/// 1 - sum (y - f)^2 / sum (y - mean y)^2. Throws InputError for constant y.
double r2_score(std::span<const double> actual, std::span<const double> predicted);
/// Pooled R^2 over all entries of two equally shaped matrices.
double r2_score(const Eigen::MatrixXd &actual, const Eigen::MatrixXd &predicted);

double mean_abs_dev(const Eigen::MatrixXd &actual, const Eigen::MatrixXd &predicted);

/// Noise-free conditional mean K_signal K^-1 r for every day.
Eigen::MatrixXd reconstruct(const Eigen::MatrixXd &returns, const KernelSpec &spec,
                            const ModelParams &params);
/// Pooled in-sample R^2 of reconstruct() against the returns.
double reconstruction_r2(const Eigen::MatrixXd &returns, const KernelSpec &spec,
                         const ModelParams &params);
double reconstruction_r2(const ReturnMatrix &returns, const FitResult &fit);

struct Embedding {
  std::vector<std::string> tickers;
  Eigen::MatrixXd coordinates; ///< N x Q posterior-mean latent positions
  std::vector<std::string> sectors; ///< empty, or one entry per ticker
};

/// Tickers absent from a non-empty `sectors` map get an empty sector.
Embedding export_embedding(const FitResult &fit,
                           const std::map<std::string, std::string> &sectors = {});

} // namespace gplvm
