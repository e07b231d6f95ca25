#include "gplvm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "gplvm/errors.hpp"

namespace gplvm {

std::optional<Date> parse_iso_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto number = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int v = 0;
    const char *first = text.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, v);
    if (ec != std::errc() || ptr != first + len) return std::nullopt;
    return v;
  };
  const auto y = number(0, 4);
  const auto m = number(5, 2);
  const auto d = number(8, 2);
  if (!y || !m || !d) return std::nullopt;
  const Date date{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                  std::chrono::day{static_cast<unsigned>(*d)}};
  if (!date.ok()) return std::nullopt;
  return date;
}

std::string format_iso_date(const Date &date) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

ReturnMatrix ReturnMatrix::slice_days(std::size_t first, std::size_t count) const {
  if (first + count > n_days()) {
    throw ContractViolation("slice_days: [" + std::to_string(first) + ", " +
                            std::to_string(first + count) + ") exceeds " +
                            std::to_string(n_days()) + " days");
  }
  ReturnMatrix out;
  out.tickers = tickers;
  if (!dates.empty()) {
    out.dates.assign(dates.begin() + static_cast<std::ptrdiff_t>(first),
                     dates.begin() + static_cast<std::ptrdiff_t>(first + count));
  }
  out.values = values.middleCols(static_cast<Eigen::Index>(first),
                                 static_cast<Eigen::Index>(count));
  return out;
}

namespace {

const Date kSyntheticStart{std::chrono::year{2000}, std::chrono::January, std::chrono::day{3}};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

bool is_missing(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" ||
         cell == "null" || cell == "N/A";
}

// Raw table before interpreting the numbers as prices or returns.
struct Grid {
  std::vector<std::string> tickers;
  std::vector<Date> dates;
  Eigen::MatrixXd values; // NaN marks a missing cell
};

Grid parse_grid(std::string_view text, char delim) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    lines.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw FormatError("empty table", 1, 1);

  std::string_view header_line = lines.front();
  if (header_line.size() >= 3 && header_line.substr(0, 3) == "\xEF\xBB\xBF") {
    header_line.remove_prefix(3);
  }
  const auto header = split(header_line, delim);
  if (header.size() < 2) {
    throw FormatError("header needs a date column and at least one ticker", 1,
                      header.size());
  }
  Grid grid;
  std::set<std::string> seen;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c].empty()) throw FormatError("empty ticker name", 1, c + 1);
    std::string t(header[c]);
    if (!seen.insert(t).second) {
      throw ValidationError("duplicate ticker '" + t + "' in header");
    }
    grid.tickers.push_back(std::move(t));
  }
  const std::size_t n = grid.tickers.size();
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (trim(lines[r]).empty()) continue;
    const auto cells = split(lines[r], delim);
    if (cells.size() != header.size()) {
      throw FormatError("expected " + std::to_string(header.size()) + " fields, found " +
                            std::to_string(cells.size()),
                        r + 1, std::min(cells.size(), header.size()) + 1);
    }
    const auto date = parse_iso_date(cells[0]);
    if (!date) {
      throw FormatError("invalid ISO-8601 date '" + std::string(cells[0]) + "'", r + 1, 1);
    }
    if (!grid.dates.empty() && *date <= grid.dates.back()) {
      throw ValidationError("dates not strictly increasing at row " +
                            std::to_string(r + 1) + " (" + format_iso_date(*date) +
                            " after " + format_iso_date(grid.dates.back()) + ")");
    }
    grid.dates.push_back(*date);
    std::vector<double> row(n);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const auto cell = cells[c];
      if (is_missing(cell)) {
        row[c - 1] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw FormatError("cannot parse number '" + std::string(cell) + "'", r + 1, c + 1);
      }
      if (!std::isfinite(v)) {
        throw ValidationError("non-finite value for " + grid.tickers[c - 1] + " on " +
                              format_iso_date(*date));
      }
      row[c - 1] = v;
    }
    rows.push_back(std::move(row));
  }
  grid.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t d = 0; d < rows.size(); ++d) {
    for (std::size_t i = 0; i < n; ++i) {
      grid.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = rows[d][i];
    }
  }
  return grid;
}

// Applies the full-history rule; returns the dropped tickers.
std::vector<std::string> enforce_complete(Grid &grid, bool drop_incomplete) {
  std::vector<Eigen::Index> keep;
  std::vector<std::string> dropped;
  for (Eigen::Index i = 0; i < grid.values.rows(); ++i) {
    const auto row = grid.values.row(i);
    if (!row.array().isNaN().any()) {
      keep.push_back(i);
      continue;
    }
    if (!drop_incomplete) {
      Eigen::Index d = 0;
      while (!std::isnan(row(d))) ++d;
      throw ValidationError("ticker '" + grid.tickers[static_cast<std::size_t>(i)] +
                            "' has no value on " +
                            format_iso_date(grid.dates[static_cast<std::size_t>(d)]) +
                            " (use --drop-incomplete to drop such assets)");
    }
    dropped.push_back(grid.tickers[static_cast<std::size_t>(i)]);
  }
  if (!dropped.empty()) {
    Eigen::MatrixXd kept(static_cast<Eigen::Index>(keep.size()), grid.values.cols());
    std::vector<std::string> tickers;
    for (std::size_t k = 0; k < keep.size(); ++k) {
      kept.row(static_cast<Eigen::Index>(k)) = grid.values.row(keep[k]);
      tickers.push_back(grid.tickers[static_cast<std::size_t>(keep[k])]);
    }
    grid.values = std::move(kept);
    grid.tickers = std::move(tickers);
  }
  return dropped;
}

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_table(const std::vector<std::string> &tickers,
                         const std::vector<Date> &dates, const Eigen::MatrixXd &values,
                         char delim) {
  std::string out = "date";
  for (const auto &t : tickers) {
    out += delim;
    out += t;
  }
  out += '\n';
  for (Eigen::Index d = 0; d < values.cols(); ++d) {
    out += format_iso_date(dates[static_cast<std::size_t>(d)]);
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      out += delim;
      out += format_number(values(i, d));
    }
    out += '\n';
  }
  return out;
}

} // namespace

void validate(const PriceTable &table) {
  const auto n = static_cast<Eigen::Index>(table.tickers.size());
  if (table.prices.rows() != n ||
      table.prices.cols() != static_cast<Eigen::Index>(table.dates.size())) {
    throw ValidationError("price matrix shape does not match tickers x dates");
  }
  for (std::size_t d = 1; d < table.dates.size(); ++d) {
    if (table.dates[d] <= table.dates[d - 1]) {
      throw ValidationError("dates not strictly increasing at " +
                            format_iso_date(table.dates[d]));
    }
  }
  for (Eigen::Index d = 0; d < table.prices.cols(); ++d) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = table.prices(i, d);
      if (!std::isfinite(p) || p <= 0.0) {
        throw ValidationError("price for '" + table.tickers[static_cast<std::size_t>(i)] +
                              "' on " + format_iso_date(table.dates[static_cast<std::size_t>(d)]) +
                              " must be positive and finite, got " + format_number(p));
      }
    }
  }
}

void validate(const ReturnMatrix &returns) {
  if (returns.tickers.size() != returns.n_assets()) {
    throw ValidationError("return matrix has " + std::to_string(returns.n_assets()) +
                          " rows but " + std::to_string(returns.tickers.size()) +
                          " tickers");
  }
  if (!returns.dates.empty() && returns.dates.size() != returns.n_days()) {
    throw ValidationError("return matrix dates do not match its columns");
  }
  for (Eigen::Index d = 0; d < returns.values.cols(); ++d) {
    for (Eigen::Index i = 0; i < returns.values.rows(); ++i) {
      const double r = returns.values(i, d);
      if (!std::isfinite(r) || r <= -1.0) {
        throw ValidationError("return for '" + returns.tickers[static_cast<std::size_t>(i)] +
                              "' at day " + std::to_string(d) +
                              " must be finite and > -1, got " + format_number(r));
      }
    }
  }
}

PriceLoad parse_prices(std::string_view text, const LoadOptions &options) {
  Grid grid = parse_grid(text, options.delimiter);
  // Reject bad prices before dropping so a zero is reported, not dropped.
  for (Eigen::Index d = 0; d < grid.values.cols(); ++d) {
    for (Eigen::Index i = 0; i < grid.values.rows(); ++i) {
      const double p = grid.values(i, d);
      if (!std::isnan(p) && p <= 0.0) {
        throw ValidationError("non-positive price " + format_number(p) + " for '" +
                              grid.tickers[static_cast<std::size_t>(i)] + "' on " +
                              format_iso_date(grid.dates[static_cast<std::size_t>(d)]) +
                              " (row " + std::to_string(d + 2) + ", column " +
                              std::to_string(i + 2) + ")");
      }
    }
  }
  PriceLoad out;
  out.dropped = enforce_complete(grid, options.drop_incomplete);
  out.table.tickers = std::move(grid.tickers);
  out.table.dates = std::move(grid.dates);
  out.table.prices = std::move(grid.values);
  validate(out.table);
  return out;
}

PriceLoad load_prices(const std::filesystem::path &path, const LoadOptions &options) {
  return parse_prices(read_file(path), options);
}

ReturnLoad parse_returns(std::string_view text, const LoadOptions &options) {
  Grid grid = parse_grid(text, options.delimiter);
  ReturnLoad out;
  out.dropped = enforce_complete(grid, options.drop_incomplete);
  out.returns.tickers = std::move(grid.tickers);
  out.returns.dates = std::move(grid.dates);
  out.returns.values = std::move(grid.values);
  validate(out.returns);
  return out;
}

ReturnLoad load_returns(const std::filesystem::path &path, const LoadOptions &options) {
  return parse_returns(read_file(path), options);
}

ReturnMatrix compute_returns(const PriceTable &table) {
  validate(table);
  if (table.prices.cols() < 2) {
    throw ValidationError("need at least two dates to compute returns");
  }
  const Eigen::Index d = table.prices.cols() - 1;
  ReturnMatrix out;
  out.tickers = table.tickers;
  out.dates.assign(table.dates.begin() + 1, table.dates.end());
  const auto previous = table.prices.leftCols(d).array();
  out.values = ((table.prices.rightCols(d).array() - previous) / previous).matrix();
  return out;
}

PriceTable prices_from_returns(const ReturnMatrix &returns, const Eigen::VectorXd &first,
                               const Date &first_date) {
  if (first.size() != returns.values.rows()) {
    throw ContractViolation("prices_from_returns: starting prices do not match assets");
  }
  PriceTable out;
  out.tickers = returns.tickers;
  out.dates.push_back(first_date);
  out.dates.insert(out.dates.end(), returns.dates.begin(), returns.dates.end());
  out.prices.resize(returns.values.rows(), returns.values.cols() + 1);
  out.prices.col(0) = first;
  for (Eigen::Index d = 0; d < returns.values.cols(); ++d) {
    out.prices.col(d + 1) =
        out.prices.col(d).array() * (1.0 + returns.values.col(d).array());
  }
  return out;
}

std::string format_returns_csv(const ReturnMatrix &returns, char delimiter) {
  std::vector<Date> dates = returns.dates;
  if (dates.empty()) dates = business_days(kSyntheticStart, returns.n_days());
  return format_table(returns.tickers, dates, returns.values, delimiter);
}

std::string format_prices_csv(const PriceTable &table, char delimiter) {
  return format_table(table.tickers, table.dates, table.prices, delimiter);
}

std::vector<Date> business_days(const Date &start, std::size_t count) {
  std::vector<Date> out;
  out.reserve(count);
  std::chrono::sys_days day{start};
  while (out.size() < count) {
    const std::chrono::weekday wd{day};
    if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) out.emplace_back(day);
    day += std::chrono::days{1};
  }
  return out;
}

SyntheticData generate_synthetic(const SyntheticSpec &spec) {
  const auto n = static_cast<Eigen::Index>(spec.n_assets);
  const auto days = static_cast<Eigen::Index>(spec.n_days);
  const auto q = static_cast<Eigen::Index>(spec.latent_dim);
  if (spec.latent_dim < 1 || spec.n_assets < 2 || spec.n_days < 2) {
    throw ContractViolation("synthetic spec needs latent_dim >= 1, n_assets >= 2, n_days >= 2");
  }
  if (spec.noise_scales.size() != n || (spec.noise_scales.array() < 0.0).any()) {
    throw ContractViolation("noise_scales must hold n_assets nonnegative values");
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticData out;
  if (spec.latents) {
    if (spec.latents->rows() != n || spec.latents->cols() != q) {
      throw ContractViolation("forced latents must be n_assets x latent_dim");
    }
    out.true_latents = *spec.latents;
  } else {
    out.true_latents.resize(n, q);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < q; ++k) out.true_latents(i, k) = normal(rng);
  }

  HyperParams hyper;
  hyper.lengthscale = spec.lengthscale;
  hyper.kernel_scale = spec.kernel_scale;
  hyper.scales = spec.signal_scales.size() == 0 ? Eigen::VectorXd::Ones(n) : spec.signal_scales;
  hyper.noise = spec.noise_scales;
  out.signal_covariance = signal_covariance(spec.kernel, out.true_latents, hyper);
  out.true_covariance = out.signal_covariance;
  out.true_covariance.diagonal() += spec.noise_scales.array().square().matrix();

  Eigen::MatrixXd signal(n, days);
  if (spec.kernel.kind == KernelKind::linear) {
    // Factor form of the linear GP: kernel_scale * B * F^T with F ~ N(0, I).
    Eigen::MatrixXd factors(q, days);
    for (Eigen::Index d = 0; d < days; ++d)
      for (Eigen::Index k = 0; k < q; ++k) factors(k, d) = normal(rng);
    signal = spec.kernel_scale * out.true_latents * factors;
  } else {
    // Draw once per distinct latent row so duplicates stay exactly equal.
    std::map<std::vector<double>, Eigen::Index> unique_index;
    std::vector<Eigen::Index> owner(static_cast<std::size_t>(n));
    std::vector<Eigen::Index> representatives;
    for (Eigen::Index i = 0; i < n; ++i) {
      std::vector<double> key(static_cast<std::size_t>(q) + 1);
      for (Eigen::Index k = 0; k < q; ++k) key[static_cast<std::size_t>(k)] = out.true_latents(i, k);
      key.back() = hyper.scales(i);
      auto [it, inserted] = unique_index.emplace(std::move(key), static_cast<Eigen::Index>(representatives.size()));
      if (inserted) representatives.push_back(i);
      owner[static_cast<std::size_t>(i)] = it->second;
    }
    const auto m = static_cast<Eigen::Index>(representatives.size());
    Eigen::MatrixXd reduced(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b)
        reduced(a, b) = out.signal_covariance(representatives[static_cast<std::size_t>(a)],
                                              representatives[static_cast<std::size_t>(b)]);
    const CholeskyFactor factor = safe_cholesky(reduced);
    Eigen::MatrixXd z(m, days);
    for (Eigen::Index d = 0; d < days; ++d)
      for (Eigen::Index a = 0; a < m; ++a) z(a, d) = normal(rng);
    const Eigen::MatrixXd draws = factor.lower() * z;
    for (Eigen::Index i = 0; i < n; ++i) signal.row(i) = draws.row(owner[static_cast<std::size_t>(i)]);
  }

  Eigen::MatrixXd noise(n, days);
  for (Eigen::Index d = 0; d < days; ++d)
    for (Eigen::Index i = 0; i < n; ++i) noise(i, d) = spec.noise_scales(i) * normal(rng);

  out.returns.values = signal + noise;
  out.returns.tickers.reserve(spec.n_assets);
  for (std::size_t i = 0; i < spec.n_assets; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "A%03zu", i);
    out.returns.tickers.emplace_back(buf);
  }
  out.returns.dates = business_days(kSyntheticStart, spec.n_days);
  if (!out.returns.values.allFinite()) {
    throw NumericalError("synthetic draw produced non-finite values");
  }
  return out;
}

} // namespace gplvm
