#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "gplvm/finance.hpp"
#include "gplvm/predict.hpp"
#include "gplvm/vi.hpp"

namespace gplvm {

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

nlohmann::json to_json(const FitConfig &cfg);
nlohmann::json to_json(const PriorConfig &cfg);
/// Thread count is deliberately absent: it never changes the result.
nlohmann::json to_json(const FitResult &fit);
/// Throws InputError on a malformed document. Point parameters are decoded
/// again from the posterior means.
FitResult fit_result_from_json(const nlohmann::json &doc);

nlohmann::json to_json(const LatentDimSelection &selection);
/// Columns: Q, elbo, std_error, status.
std::string format_elbo_table_csv(const LatentDimSelection &selection);
std::string format_elbo_summary(const LatentDimSelection &selection);

nlohmann::json to_json(const BacktestReport &report);
/// Columns: Model, Mean, Std, Sharpe ratio.
std::string format_backtest_table_csv(const BacktestReport &report);

nlohmann::json to_json(const ImputationReport &report);
/// Columns: ticker, date, actual, predicted, baseline.
std::string format_imputation_cells_csv(const ImputationReport &report);
std::string format_imputation_summary_csv(const ImputationReport &report);

nlohmann::json to_json(const Embedding &embedding);
/// Columns: ticker, z1..zQ [, sector].
std::string format_embedding_csv(const Embedding &embedding);

/// N x N matrix with a ticker header row and a ticker first column.
std::string format_covariance_csv(const CovarianceEstimate &k,
                                  const std::vector<std::string> &tickers);

} // namespace gplvm
