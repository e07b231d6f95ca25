#include "gplvm/finance.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "gplvm/errors.hpp"

namespace gplvm {

namespace {

void require_feasible_cap(std::size_t n, double cap) {
  if (!(cap > 0.0) || cap * static_cast<double>(n) < 1.0 - 1e-12) {
    throw InputError("weight cap " + std::to_string(cap) + " is infeasible for " +
                     std::to_string(n) + " assets (cap * N must be >= 1)");
  }
}

double capped_sum(const Eigen::VectorXd &v, double shift, double cap) {
  return (v.array() - shift).max(0.0).min(cap).sum();
}

std::vector<std::string> default_tickers(std::size_t n, const std::vector<std::string> &given) {
  if (!given.empty()) {
    if (given.size() != n) throw ContractViolation("ticker list does not match asset count");
    return given;
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("asset" + std::to_string(i));
  return out;
}

// Solves the equality-constrained problem on the free set of `w` and keeps
// the result when it stays feasible and does not increase the objective.
void polish_active_set(const Eigen::MatrixXd &k, double cap, Eigen::VectorXd &w) {
  const Eigen::Index n = w.size();
  const double tol = 1e-12;
  std::vector<Eigen::Index> free;
  Eigen::VectorXd fixed = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (w(i) >= cap - tol) {
      fixed(i) = cap;
    } else if (w(i) > tol) {
      free.push_back(i);
    }
  }
  if (free.empty()) return;
  const auto m = static_cast<Eigen::Index>(free.size());
  Eigen::MatrixXd kff(m, m);
  Eigen::VectorXd coupling(m);
  const Eigen::VectorXd k_fixed = k * fixed;
  for (Eigen::Index a = 0; a < m; ++a) {
    coupling(a) = k_fixed(free[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < m; ++b)
      kff(a, b) = k(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(kff);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return;
  const Eigen::VectorXd x1 = ldlt.solve(Eigen::VectorXd::Ones(m));
  const Eigen::VectorXd x2 = ldlt.solve(coupling);
  const double budget = 1.0 - fixed.sum();
  const double denom = x1.sum();
  if (!(std::abs(denom) > 0.0)) return;
  const double lambda = (budget + x2.sum()) / denom;
  Eigen::VectorXd candidate = fixed;
  for (Eigen::Index a = 0; a < m; ++a) {
    const double value = lambda * x1(a) - x2(a);
    if (!std::isfinite(value) || value < -tol || value > cap + tol) return;
    candidate(free[static_cast<std::size_t>(a)]) = std::clamp(value, 0.0, cap);
  }
  if (std::abs(candidate.sum() - 1.0) > 1e-10) return;
  if (candidate.dot(k * candidate) <= w.dot(k * w) + 1e-15 * std::abs(w.dot(k * w))) {
    w = candidate;
  }
}

} // namespace

Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd &v, double cap) {
  const auto n = static_cast<std::size_t>(v.size());
  if (n == 0) throw ContractViolation("cannot project an empty vector");
  if (!v.allFinite()) throw ContractViolation("projection input must be finite");
  require_feasible_cap(n, cap);

  double lo = v.minCoeff() - cap; // sum = N * cap >= 1
  double hi = v.maxCoeff();       // sum = 0
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double s = capped_sum(v, mid, cap);
    if (std::abs(s - 1.0) <= 1e-15) {
      lo = hi = mid;
      break;
    }
    if (s > 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double shift = 0.5 * (lo + hi);
  // Exact shift for the free set the bisection identified.
  double free_sum = 0.0;
  double capped = 0.0;
  std::size_t n_free = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = v(static_cast<Eigen::Index>(i)) - shift;
    if (x >= cap) {
      capped += cap;
    } else if (x > 0.0) {
      free_sum += v(static_cast<Eigen::Index>(i));
      ++n_free;
    }
  }
  if (n_free > 0) {
    const double exact = (free_sum + capped - 1.0) / static_cast<double>(n_free);
    if (std::abs(capped_sum(v, exact, cap) - 1.0) <= std::abs(capped_sum(v, shift, cap) - 1.0)) {
      shift = exact;
    }
  }
  return (v.array() - shift).max(0.0).min(cap).matrix();
}

PortfolioWeights min_variance_weights(const CovarianceEstimate &k, double cap,
                                      const std::vector<std::string> &tickers,
                                      const MinVarianceOptions &options) {
  const Eigen::MatrixXd &m = k.matrix;
  const auto n = static_cast<std::size_t>(m.rows());
  if (m.rows() != m.cols() || n == 0) throw ContractViolation("covariance must be square");
  if (!m.allFinite()) throw ContractViolation("covariance must be finite");
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw ContractViolation("covariance matrix is not symmetric");
  }
  require_feasible_cap(n, cap);

  PortfolioWeights out;
  out.tickers = default_tickers(n, tickers);
  Eigen::VectorXd w = project_capped_simplex(
      Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)), cap);
  const double lipschitz = m.cwiseAbs().rowwise().sum().maxCoeff();
  if (lipschitz > 0.0) {
    // Objective 0.5 w^T K w has gradient K w, Lipschitz constant <= lipschitz.
    const double step = 1.0 / lipschitz;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
      const Eigen::VectorXd next = project_capped_simplex(w - step * (m * w), cap);
      const double moved = (next - w).cwiseAbs().maxCoeff();
      w = next;
      if (moved < options.tolerance) break;
    }
    polish_active_set(m, cap, w);
  }
  out.weights = w;
  return out;
}

PortfolioWeights equal_weights(std::size_t n_assets, const std::vector<std::string> &tickers) {
  if (n_assets < 1) throw InputError("equal_weights needs at least one asset");
  PortfolioWeights out;
  out.tickers = default_tickers(n_assets, tickers);
  out.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_assets),
                                          1.0 / static_cast<double>(n_assets));
  return out;
}

CovarianceEstimate sample_covariance(const Eigen::MatrixXd &returns) {
  if (returns.cols() < 2) throw InputError("sample covariance needs at least 2 days");
  const Eigen::VectorXd mean = returns.rowwise().mean();
  const Eigen::MatrixXd centered = returns.colwise() - mean;
  CovarianceEstimate out;
  out.matrix = centered * centered.transpose() / static_cast<double>(returns.cols());
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
  out.tag = "sample";
  return out;
}

CovarianceEstimate sample_covariance(const ReturnMatrix &returns) {
  return sample_covariance(returns.values);
}

double ledoit_wolf_intensity(const Eigen::MatrixXd &returns) {
  if (returns.cols() < 2) throw InputError("Ledoit-Wolf needs at least 2 days");
  const double n_features = static_cast<double>(returns.rows());
  const double n_samples = static_cast<double>(returns.cols());
  const Eigen::MatrixXd x = returns.colwise() - returns.rowwise().mean();
  const Eigen::MatrixXd x2 = x.cwiseAbs2();
  const Eigen::VectorXd variances = x2.rowwise().sum() / n_samples;
  const double mu = variances.sum() / n_features;
  const double beta_raw = (x2 * x2.transpose()).sum();
  const double delta_raw = (x * x.transpose()).cwiseAbs2().sum() / (n_samples * n_samples);
  double beta = (beta_raw / n_samples - delta_raw) / (n_features * n_samples);
  const double delta =
      (delta_raw - 2.0 * mu * variances.sum() + n_features * mu * mu) / n_features;
  beta = std::min(beta, delta);
  if (!(beta > 0.0) || !(delta > 0.0)) return 0.0;
  return std::clamp(beta / delta, 0.0, 1.0);
}

CovarianceEstimate ledoit_wolf(const Eigen::MatrixXd &returns) {
  const double intensity = ledoit_wolf_intensity(returns);
  CovarianceEstimate out = sample_covariance(returns);
  const double mu = out.matrix.trace() / static_cast<double>(returns.rows());
  out.matrix *= (1.0 - intensity);
  out.matrix.diagonal().array() += intensity * mu;
  out.tag = "ledoit";
  return out;
}

CovarianceEstimate ledoit_wolf(const ReturnMatrix &returns) { return ledoit_wolf(returns.values); }

AnnualizedStats sharpe_ratio(std::span<const double> daily_returns, double annualization_days) {
  if (daily_returns.size() < 2) throw InputError("Sharpe ratio needs at least 2 returns");
  if (!(annualization_days > 0.0)) throw InputError("annualization days must be positive");
  const double n = static_cast<double>(daily_returns.size());
  double sum = 0.0;
  for (double r : daily_returns) sum += r;
  const double mean = sum / n;
  const auto [lo, hi] = std::minmax_element(daily_returns.begin(), daily_returns.end());
  double var = 0.0;
  if (*lo != *hi) {
    for (double r : daily_returns) var += (r - mean) * (r - mean);
    var /= n;
  }
  AnnualizedStats out;
  out.mean = mean * annualization_days;
  out.std = std::sqrt(var) * std::sqrt(annualization_days);
  if (out.std > 0.0) out.sharpe = out.mean / out.std;
  return out;
}

std::size_t backtest_periods(std::size_t n_days, const BacktestConfig &cfg) {
  if (n_days < cfg.train_days + cfg.hold_days) return 0;
  return (n_days - cfg.train_days) / cfg.hold_days;
}

namespace {

bool is_gplvm_estimator(const std::string &tag) {
  return tag == "linear" || tag == "se" || tag == "exp" || tag == "m32";
}

void validate_estimator(const std::string &tag) {
  if (is_gplvm_estimator(tag) || tag == "sample" || tag == "ledoit" || tag == "equal") return;
  throw InputError("unknown estimator '" + tag +
                   "' (expected linear, se, exp, m32, sample, ledoit or equal)");
}

} // namespace

CovarianceEstimate estimate_covariance(const std::string &estimator, const ReturnMatrix &train,
                                       const BacktestConfig &cfg, const FitConfig &fit_cfg,
                                       const PriorConfig &prior) {
  validate_estimator(estimator);
  if (estimator == "sample") return sample_covariance(train);
  if (estimator == "ledoit") return ledoit_wolf(train);
  if (estimator == "equal") throw ContractViolation("equal weights have no covariance");
  const KernelSpec spec{parse_kernel_kind(estimator), cfg.kernel_form};
  return fit(train, spec, cfg.latent_dim, fit_cfg, prior).covariance();
}

BacktestReport backtest(const ReturnMatrix &returns, const BacktestConfig &cfg,
                        const FitConfig &fit_cfg, const PriorConfig &prior) {
  validate(returns);
  if (cfg.train_days < 2) throw InputError("train_days must be >= 2");
  if (cfg.hold_days < 1) throw InputError("hold_days must be >= 1");
  if (cfg.estimators.empty()) throw InputError("no estimators requested");
  for (const auto &e : cfg.estimators) validate_estimator(e);
  const std::size_t n = returns.n_assets();
  require_feasible_cap(n, cfg.weight_cap);
  const std::size_t days = returns.n_days();
  if (days < cfg.train_days + cfg.hold_days) {
    throw InputError("backtest needs at least train_days + hold_days = " +
                     std::to_string(cfg.train_days + cfg.hold_days) + " days of returns, got " +
                     std::to_string(days));
  }

  BacktestReport report;
  report.tickers = returns.tickers;
  report.config = cfg;
  report.n_periods = backtest_periods(days, cfg);
  for (const auto &tag : cfg.estimators) report.estimators.push_back({tag, {}, {}});

  for (std::size_t p = 0; p < report.n_periods; ++p) {
    const std::size_t train_begin = p * cfg.hold_days;
    const std::size_t hold_begin = train_begin + cfg.train_days;
    const ReturnMatrix train = returns.slice_days(train_begin, cfg.train_days);
    for (EstimatorReport &est : report.estimators) {
      BacktestPeriod period;
      period.train_begin = train_begin;
      period.hold_begin = hold_begin;
      period.hold_end = hold_begin + cfg.hold_days;
      if (est.estimator == "equal") {
        period.weights = equal_weights(n).weights;
      } else {
        const CovarianceEstimate k = estimate_covariance(est.estimator, train, cfg, fit_cfg, prior);
        period.weights = min_variance_weights(k, cfg.weight_cap, returns.tickers).weights;
      }
      for (std::size_t d = hold_begin; d < period.hold_end; ++d) {
        period.returns.push_back(period.weights.dot(returns.values.col(static_cast<Eigen::Index>(d))));
      }
      est.periods.push_back(std::move(period));
    }
  }
  for (EstimatorReport &est : report.estimators) {
    std::vector<double> all;
    for (const auto &period : est.periods) all.insert(all.end(), period.returns.begin(), period.returns.end());
    est.stats = sharpe_ratio(all, cfg.annualization_days);
  }
  return report;
}

} // namespace gplvm
