#include "gplvm/predict.hpp"

#include <cmath>
#include <set>

#include "gplvm/errors.hpp"

namespace gplvm {

namespace {

Eigen::MatrixXd gather(const Eigen::MatrixXd &k, const std::vector<std::size_t> &rows,
                       const std::vector<std::size_t> &cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          k(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(cols[j]));
  return out;
}

void check_indices(const Eigen::MatrixXd &k, const std::vector<std::size_t> &observed,
                   const std::vector<std::size_t> &target) {
  if (k.rows() != k.cols()) throw ContractViolation("covariance must be square");
  std::set<std::size_t> seen;
  for (std::size_t i : observed) {
    if (i >= static_cast<std::size_t>(k.rows())) throw ContractViolation("observed index out of range");
    if (!seen.insert(i).second) throw ContractViolation("duplicate observed index");
  }
  for (std::size_t i : target) {
    if (i >= static_cast<std::size_t>(k.rows())) throw ContractViolation("target index out of range");
    if (!seen.insert(i).second) throw ContractViolation("observed and target indices overlap");
  }
}

} // namespace

PredictiveDistribution gp_conditional(const Eigen::MatrixXd &k,
                                      const std::vector<std::size_t> &observed,
                                      const Eigen::VectorXd &observed_values,
                                      const std::vector<std::size_t> &target) {
  check_indices(k, observed, target);
  if (static_cast<std::size_t>(observed_values.size()) != observed.size()) {
    throw ContractViolation("observed values do not match observed indices");
  }
  PredictiveDistribution out;
  const Eigen::MatrixXd k_tt = gather(k, target, target);
  if (observed.empty()) {
    out.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(target.size()));
    out.covariance = k_tt;
    return out;
  }
  const CholeskyFactor chol = safe_cholesky(gather(k, observed, observed), JitterPolicy::exact_first());
  const Eigen::MatrixXd k_ot = gather(k, observed, target);
  out.mean = k_ot.transpose() * chol.llt.solve(observed_values);
  const Eigen::MatrixXd v = chol.llt.matrixL().solve(k_ot);
  out.covariance = k_tt - v.transpose() * v;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

std::vector<ImputationCell> ImputationReport::cells() const {
  std::vector<ImputationCell> out;
  for (Eigen::Index d = 0; d < actual.cols(); ++d)
    for (Eigen::Index i = 0; i < actual.rows(); ++i)
      out.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(d), actual(i, d),
                     predicted(i, d), baseline(i, d)});
  return out;
}

ImputationReport loocv_impute(const ReturnMatrix &test, const CovarianceEstimate &k,
                              const Eigen::VectorXd &historical_means) {
  const auto n = static_cast<std::size_t>(test.values.rows());
  if (static_cast<std::size_t>(k.matrix.rows()) != n || k.matrix.cols() != k.matrix.rows()) {
    throw ContractViolation("covariance does not match the number of test assets");
  }
  if (static_cast<std::size_t>(historical_means.size()) != n) {
    throw ContractViolation("historical means do not match the number of test assets");
  }
  if (n < 2) throw InputError("leave-one-out imputation needs at least 2 assets");

  ImputationReport out;
  out.tickers = test.tickers;
  out.dates = test.dates;
  out.actual = test.values;
  out.predicted.resize(test.values.rows(), test.values.cols());
  out.baseline = historical_means.replicate(1, test.values.cols());

  for (std::size_t left_out = 0; left_out < n; ++left_out) {
    std::vector<std::size_t> observed;
    for (std::size_t i = 0; i < n; ++i)
      if (i != left_out) observed.push_back(i);
    // One factorization per left-out asset, shared by all days.
    const CholeskyFactor chol =
        safe_cholesky(gather(k.matrix, observed, observed), JitterPolicy::exact_first());
    const Eigen::VectorXd k_ot = gather(k.matrix, observed, {left_out}).col(0);
    const Eigen::VectorXd weights = chol.llt.solve(k_ot);
    Eigen::MatrixXd obs_values(static_cast<Eigen::Index>(observed.size()), test.values.cols());
    for (std::size_t a = 0; a < observed.size(); ++a)
      obs_values.row(static_cast<Eigen::Index>(a)) = test.values.row(static_cast<Eigen::Index>(observed[a]));
    out.predicted.row(static_cast<Eigen::Index>(left_out)) = weights.transpose() * obs_values;
  }

  out.r2 = r2_score(out.actual, out.predicted);
  out.mean_abs_dev = mean_abs_dev(out.actual, out.predicted);
  out.baseline_r2 = r2_score(out.actual, out.baseline);
  out.baseline_mean_abs_dev = mean_abs_dev(out.actual, out.baseline);
  for (Eigen::Index i = 0; i < out.actual.rows(); ++i) {
    const Eigen::VectorXd a = out.actual.row(i).transpose();
    const Eigen::VectorXd p = out.predicted.row(i).transpose();
    if (a.size() < 2 || a.maxCoeff() == a.minCoeff()) {
      out.asset_r2.push_back(std::nullopt);
    } else {
      out.asset_r2.push_back(r2_score(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                                      std::span<const double>(p.data(), static_cast<std::size_t>(p.size()))));
    }
  }
  return out;
}

double r2_score(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) throw ContractViolation("r2_score: length mismatch");
  if (actual.size() < 2) throw InputError("r2_score needs at least 2 values");
  double mean = 0.0;
  for (double y : actual) mean += y;
  mean /= static_cast<double>(actual.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ss_res += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
    ss_tot += (actual[i] - mean) * (actual[i] - mean);
  }
  if (!(ss_tot > 0.0)) throw InputError("r2_score undefined: actual values are constant");
  return 1.0 - ss_res / ss_tot;
}

double r2_score(const Eigen::MatrixXd &actual, const Eigen::MatrixXd &predicted) {
  if (actual.rows() != predicted.rows() || actual.cols() != predicted.cols()) {
    throw ContractViolation("r2_score: shape mismatch");
  }
  return r2_score(std::span<const double>(actual.data(), static_cast<std::size_t>(actual.size())),
                  std::span<const double>(predicted.data(), static_cast<std::size_t>(predicted.size())));
}

double mean_abs_dev(const Eigen::MatrixXd &actual, const Eigen::MatrixXd &predicted) {
  if (actual.rows() != predicted.rows() || actual.cols() != predicted.cols()) {
    throw ContractViolation("mean_abs_dev: shape mismatch");
  }
  if (actual.size() == 0) throw ContractViolation("mean_abs_dev: empty input");
  return (actual - predicted).cwiseAbs().sum() / static_cast<double>(actual.size());
}

Eigen::MatrixXd reconstruct(const Eigen::MatrixXd &returns, const KernelSpec &spec,
                            const ModelParams &params) {
  validate_params(params, spec);
  if (params.latents.rows() != returns.rows()) {
    throw ContractViolation("parameters and returns disagree on the number of assets");
  }
  const Eigen::MatrixXd signal = signal_covariance(spec, params.latents, params.hyper);
  Eigen::MatrixXd k = signal;
  k.diagonal() += params.hyper.noise.array().square().matrix();
  const CholeskyFactor chol = safe_cholesky(k, JitterPolicy::exact_first());
  return signal * chol.llt.solve(returns);
}

double reconstruction_r2(const Eigen::MatrixXd &returns, const KernelSpec &spec,
                         const ModelParams &params) {
  return r2_score(returns, reconstruct(returns, spec, params));
}

double reconstruction_r2(const ReturnMatrix &returns, const FitResult &fit) {
  return reconstruction_r2(returns.values, fit.kernel, fit.point_params);
}

Embedding export_embedding(const FitResult &fit, const std::map<std::string, std::string> &sectors) {
  Embedding out;
  out.tickers = fit.tickers;
  out.coordinates = fit.point_params.latents;
  if (!sectors.empty()) {
    for (const auto &t : fit.tickers) {
      auto it = sectors.find(t);
      out.sectors.push_back(it == sectors.end() ? std::string() : it->second);
    }
  }
  return out;
}

} // namespace gplvm
