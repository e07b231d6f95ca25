#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "gplvm/kernels.hpp"

namespace gplvm {

using Date = std::chrono::year_month_day;

/// Parses YYYY-MM-DD; returns nullopt for anything else.
std::optional<Date> parse_iso_date(std::string_view text);
std::string format_iso_date(const Date &date);

/// Close prices, one row per asset and one column per date.
struct PriceTable {
  std::vector<std::string> tickers;
  std::vector<Date> dates;
  Eigen::MatrixXd prices;

  std::size_t n_assets() const { return tickers.size(); }
};

/// Simple returns r(n,d) = (p(n,d) - p(n,d-1)) / p(n,d-1). `dates` holds the
/// later date of each pair.
struct ReturnMatrix {
  std::vector<std::string> tickers;
  std::vector<Date> dates;
  Eigen::MatrixXd values;

  std::size_t n_assets() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t n_days() const { return static_cast<std::size_t>(values.cols()); }

  /// Days [first, first + count).
  ReturnMatrix slice_days(std::size_t first, std::size_t count) const;
};

struct LoadOptions {
  bool drop_incomplete = false;
  char delimiter = ',';
};

struct PriceLoad {
  PriceTable table;
  std::vector<std::string> dropped; ///< tickers removed by drop_incomplete
};

struct ReturnLoad {
  ReturnMatrix returns;
  std::vector<std::string> dropped;
};

/// Reads `date,<t1>,<t2>,...` text. Empty, NA and NaN cells count as
/// missing. Missing cells are an error unless `drop_incomplete` is set.
PriceLoad load_prices(const std::filesystem::path &path,
                      const LoadOptions &options = {});
PriceLoad parse_prices(std::string_view text, const LoadOptions &options = {});

/// Same layout as load_prices, cells are simple returns.
ReturnLoad load_returns(const std::filesystem::path &path,
                        const LoadOptions &options = {});
ReturnLoad parse_returns(std::string_view text, const LoadOptions &options = {});

void validate(const PriceTable &table);
void validate(const ReturnMatrix &returns);

ReturnMatrix compute_returns(const PriceTable &table);

/// Rebuild prices from returns by cumulative product starting at `first`.
PriceTable prices_from_returns(const ReturnMatrix &returns,
                               const Eigen::VectorXd &first,
                               const Date &first_date);

std::string format_returns_csv(const ReturnMatrix &returns, char delimiter = ',');
std::string format_prices_csv(const PriceTable &table, char delimiter = ',');

/// Weekday dates starting at `start` (inclusive if it is a weekday).
std::vector<Date> business_days(const Date &start, std::size_t count);

struct SyntheticSpec {
  std::size_t n_assets = 0;
  std::size_t n_days = 0;
  std::size_t latent_dim = 1;
  Eigen::VectorXd noise_scales;  ///< per-asset residual std devs
  std::uint64_t seed = 0;
  KernelSpec kernel;
  double lengthscale = 1.0;      ///< stationary kernels
  double kernel_scale = 1.0;     ///< linear kernel
  Eigen::VectorXd signal_scales; ///< stationary kernels; empty means ones
  /// Replaces the standard-normal draw of the latent positions.
  std::optional<Eigen::MatrixXd> latents;
};

struct SyntheticData {
  ReturnMatrix returns;
  Eigen::MatrixXd true_covariance; ///< signal + diag(noise^2)
  Eigen::MatrixXd signal_covariance;
  Eigen::MatrixXd true_latents;
};

/// Draws D independent columns from N(0, K_signal) and adds per-asset noise.
/// Assets with identical latent rows receive identical signal draws.
SyntheticData generate_synthetic(const SyntheticSpec &spec);

} // namespace gplvm
