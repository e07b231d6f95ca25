#include "gplvm/serialize.hpp"

#include <charconv>
#include <sstream>

#include "gplvm/errors.hpp"

namespace gplvm {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

namespace {

json vector_json(const Eigen::VectorXd &v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json matrix_json(const Eigen::MatrixXd &m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Eigen::VectorXd row = m.row(i).transpose();
    rows.push_back(vector_json(row));
  }
  return rows;
}

Eigen::VectorXd vector_from(const json &j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json optional_json(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

std::string optional_csv(const std::optional<double> &v) { return v ? format_double(*v) : "NA"; }

} // namespace

json to_json(const FitConfig &cfg) {
  return {{"iterations", cfg.iterations},
          {"step_size", cfg.step_size},
          {"mc_samples", cfg.mc_samples},
          {"restarts", cfg.restarts},
          {"final_elbo_samples", cfg.final_elbo_samples},
          {"seed", cfg.seed},
          {"init_stddev", cfg.init_stddev}};
}

json to_json(const PriorConfig &cfg) {
  return {{"latent_std", cfg.latent_std},
          {"invgamma_shape", cfg.invgamma_shape},
          {"invgamma_scale", cfg.invgamma_scale},
          {"halfnormal_variance", cfg.halfnormal_variance}};
}

json to_json(const FitResult &fit) {
  json restarts = json::array();
  for (const auto &r : fit.restarts) {
    json item = {{"index", r.index}, {"ok", r.ok}};
    if (r.ok) {
      item["final_elbo"] = r.final_elbo;
      item["std_error"] = r.std_error;
    } else {
      item["error"] = r.error;
    }
    restarts.push_back(std::move(item));
  }
  const HyperParams &h = fit.point_params.hyper;
  json point = {{"latents", matrix_json(fit.point_params.latents)}, {"noise", vector_json(h.noise)}};
  if (fit.kernel.stationary()) {
    point["lengthscale"] = h.lengthscale;
    point["scales"] = vector_json(h.scales);
  } else {
    point["kernel_scale"] = h.kernel_scale;
  }
  return {{"format", "gplvm-fit/1"},
          {"kernel", {{"kind", to_string(fit.kernel.kind)}, {"form", to_string(fit.kernel.form)}}},
          {"latent_dim", fit.latent_dim},
          {"tickers", fit.tickers},
          {"n_days", fit.n_days},
          {"asset_means", vector_json(fit.asset_means)},
          {"final_elbo", fit.final_elbo},
          {"final_elbo_se", fit.final_elbo_se},
          {"restart_index", fit.restart_index},
          {"posterior",
           {{"means", vector_json(fit.posterior.means)},
            {"log_stddevs", vector_json(fit.posterior.log_stddevs)}}},
          {"point_params", std::move(point)},
          {"restarts", std::move(restarts)},
          {"elbo_trace", fit.elbo_trace},
          {"config", to_json(fit.config)},
          {"prior", to_json(fit.prior)}};
}

FitResult fit_result_from_json(const json &doc) {
  try {
    if (doc.at("format").get<std::string>() != "gplvm-fit/1") {
      throw InputError("unsupported model format '" + doc.at("format").get<std::string>() + "'");
    }
    FitResult fit;
    fit.kernel.kind = parse_kernel_kind(doc.at("kernel").at("kind").get<std::string>());
    fit.kernel.form = parse_kernel_form(doc.at("kernel").at("form").get<std::string>());
    fit.latent_dim = doc.at("latent_dim").get<std::size_t>();
    fit.tickers = doc.at("tickers").get<std::vector<std::string>>();
    fit.n_days = doc.at("n_days").get<std::size_t>();
    fit.asset_means = vector_from(doc.at("asset_means"));
    fit.final_elbo = doc.at("final_elbo").get<double>();
    fit.final_elbo_se = doc.at("final_elbo_se").get<double>();
    fit.restart_index = doc.at("restart_index").get<std::size_t>();
    fit.posterior.means = vector_from(doc.at("posterior").at("means"));
    fit.posterior.log_stddevs = vector_from(doc.at("posterior").at("log_stddevs"));
    fit.elbo_trace = doc.at("elbo_trace").get<std::vector<double>>();
    for (const auto &r : doc.at("restarts")) {
      RestartOutcome o;
      o.index = r.at("index").get<std::size_t>();
      o.ok = r.at("ok").get<bool>();
      if (o.ok) {
        o.final_elbo = r.at("final_elbo").get<double>();
        o.std_error = r.at("std_error").get<double>();
      } else {
        o.error = r.at("error").get<std::string>();
      }
      fit.restarts.push_back(std::move(o));
    }
    const json &c = doc.at("config");
    fit.config.iterations = c.at("iterations").get<std::size_t>();
    fit.config.step_size = c.at("step_size").get<double>();
    fit.config.mc_samples = c.at("mc_samples").get<std::size_t>();
    fit.config.restarts = c.at("restarts").get<std::size_t>();
    fit.config.final_elbo_samples = c.at("final_elbo_samples").get<std::size_t>();
    fit.config.seed = c.at("seed").get<std::uint64_t>();
    fit.config.init_stddev = c.at("init_stddev").get<double>();
    const json &p = doc.at("prior");
    fit.prior.latent_std = p.at("latent_std").get<double>();
    fit.prior.invgamma_shape = p.at("invgamma_shape").get<double>();
    fit.prior.invgamma_scale = p.at("invgamma_scale").get<double>();
    fit.prior.halfnormal_variance = p.at("halfnormal_variance").get<double>();

    const ParameterLayout layout(fit.kernel.kind, fit.tickers.size(), fit.latent_dim);
    if (static_cast<std::size_t>(fit.posterior.means.size()) != layout.size() ||
        fit.posterior.log_stddevs.size() != fit.posterior.means.size()) {
      throw InputError("posterior length does not match kernel, tickers and latent_dim");
    }
    if (static_cast<std::size_t>(fit.asset_means.size()) != fit.tickers.size()) {
      throw InputError("asset_means length does not match tickers");
    }
    fit.point_params = layout.from_unconstrained(fit.posterior.means);
    return fit;
  } catch (const json::exception &e) {
    throw InputError(std::string("malformed model file: ") + e.what());
  } catch (const ContractViolation &e) {
    throw InputError(std::string("inconsistent model file: ") + e.what());
  }
}

json to_json(const LatentDimSelection &selection) {
  json rows = json::array();
  for (const auto &row : selection.rows) {
    json item = {{"latent_dim", row.latent_dim}, {"ok", row.ok}};
    if (row.ok) {
      item["elbo"] = row.elbo;
      item["std_error"] = row.std_error;
    } else {
      item["error"] = row.error;
    }
    rows.push_back(std::move(item));
  }
  return {{"rows", std::move(rows)}, {"best_latent_dim", selection.best_latent_dim}};
}

std::string format_elbo_table_csv(const LatentDimSelection &selection) {
  std::string out = "Q,elbo,std_error,status\n";
  for (const auto &row : selection.rows) {
    out += std::to_string(row.latent_dim) + ",";
    if (row.ok) {
      out += format_double(row.elbo) + "," + format_double(row.std_error) + ",";
      out += row.latent_dim == selection.best_latent_dim ? "best" : "ok";
    } else {
      out += "NA,NA,failed";
    }
    out += "\n";
  }
  return out;
}

std::string format_elbo_summary(const LatentDimSelection &selection) {
  std::ostringstream os;
  os << "   Q          ELBO    std.err\n";
  for (const auto &row : selection.rows) {
    char line[128];
    if (row.ok) {
      std::snprintf(line, sizeof(line), "%s%3zu  %12.4f  %9.4f\n",
                    row.latent_dim == selection.best_latent_dim ? "*" : " ", row.latent_dim,
                    row.elbo, row.std_error);
    } else {
      std::snprintf(line, sizeof(line), " %3zu  %12s  %9s  (%s)\n", row.latent_dim, "failed", "-",
                    row.error.substr(0, 60).c_str());
    }
    os << line;
  }
  os << "* highest ELBO: Q = " << selection.best_latent_dim << "\n";
  return os.str();
}

json to_json(const BacktestReport &report) {
  json estimators = json::array();
  for (const auto &est : report.estimators) {
    json periods = json::array();
    for (const auto &p : est.periods) {
      periods.push_back({{"train_begin", p.train_begin},
                         {"hold_begin", p.hold_begin},
                         {"hold_end", p.hold_end},
                         {"weights", vector_json(p.weights)},
                         {"returns", p.returns}});
    }
    estimators.push_back({{"model", est.estimator},
                          {"mean", est.stats.mean},
                          {"std", est.stats.std},
                          {"sharpe", optional_json(est.stats.sharpe)},
                          {"periods", std::move(periods)}});
  }
  const BacktestConfig &c = report.config;
  return {{"tickers", report.tickers},
          {"config",
           {{"train_days", c.train_days},
            {"hold_days", c.hold_days},
            {"weight_cap", c.weight_cap},
            {"estimators", c.estimators},
            {"latent_dim", c.latent_dim},
            {"annualization_days", c.annualization_days},
            {"kernel_form", to_string(c.kernel_form)}}},
          {"n_periods", report.n_periods},
          {"estimators", std::move(estimators)}};
}

std::string format_backtest_table_csv(const BacktestReport &report) {
  std::string out = "Model,Mean,Std,Sharpe ratio\n";
  for (const auto &est : report.estimators) {
    out += est.estimator + "," + format_double(est.stats.mean) + "," +
           format_double(est.stats.std) + "," + optional_csv(est.stats.sharpe) + "\n";
  }
  return out;
}

json to_json(const ImputationReport &report) {
  json cells = json::array();
  for (const auto &c : report.cells()) {
    json cell = {{"ticker", report.tickers[c.asset]},
                 {"day", c.day},
                 {"actual", c.actual},
                 {"predicted", c.predicted},
                 {"baseline", c.baseline}};
    if (!report.dates.empty()) cell["date"] = format_iso_date(report.dates[c.day]);
    cells.push_back(std::move(cell));
  }
  json per_asset = json::object();
  for (std::size_t i = 0; i < report.tickers.size(); ++i)
    per_asset[report.tickers[i]] = optional_json(report.asset_r2[i]);
  return {{"r2", report.r2},
          {"mean_abs_dev", report.mean_abs_dev},
          {"baseline_r2", report.baseline_r2},
          {"baseline_mean_abs_dev", report.baseline_mean_abs_dev},
          {"asset_r2", std::move(per_asset)},
          {"cells", std::move(cells)}};
}

std::string format_imputation_cells_csv(const ImputationReport &report) {
  std::string out = "ticker,date,actual,predicted,baseline\n";
  for (const auto &c : report.cells()) {
    out += report.tickers[c.asset] + ",";
    out += report.dates.empty() ? std::to_string(c.day) : format_iso_date(report.dates[c.day]);
    out += "," + format_double(c.actual) + "," + format_double(c.predicted) + "," +
           format_double(c.baseline) + "\n";
  }
  return out;
}

std::string format_imputation_summary_csv(const ImputationReport &report) {
  std::string out = "model,r2,mean_abs_dev\n";
  out += "gplvm," + format_double(report.r2) + "," + format_double(report.mean_abs_dev) + "\n";
  out += "mean," + format_double(report.baseline_r2) + "," +
         format_double(report.baseline_mean_abs_dev) + "\n";
  return out;
}

json to_json(const Embedding &embedding) {
  json rows = json::array();
  for (std::size_t i = 0; i < embedding.tickers.size(); ++i) {
    const Eigen::VectorXd row = embedding.coordinates.row(static_cast<Eigen::Index>(i)).transpose();
    json item = {{"ticker", embedding.tickers[i]}, {"coordinates", vector_json(row)}};
    if (!embedding.sectors.empty()) item["sector"] = embedding.sectors[i];
    rows.push_back(std::move(item));
  }
  return {{"latent_dim", embedding.coordinates.cols()}, {"points", std::move(rows)}};
}

std::string format_embedding_csv(const Embedding &embedding) {
  std::string out = "ticker";
  for (Eigen::Index k = 0; k < embedding.coordinates.cols(); ++k) out += ",z" + std::to_string(k + 1);
  if (!embedding.sectors.empty()) out += ",sector";
  out += "\n";
  for (std::size_t i = 0; i < embedding.tickers.size(); ++i) {
    out += embedding.tickers[i];
    for (Eigen::Index k = 0; k < embedding.coordinates.cols(); ++k)
      out += "," + format_double(embedding.coordinates(static_cast<Eigen::Index>(i), k));
    if (!embedding.sectors.empty()) out += "," + embedding.sectors[i];
    out += "\n";
  }
  return out;
}

std::string format_covariance_csv(const CovarianceEstimate &k, const std::vector<std::string> &tickers) {
  if (tickers.size() != static_cast<std::size_t>(k.matrix.rows())) {
    throw ContractViolation("ticker list does not match covariance size");
  }
  std::string out = "ticker";
  for (const auto &t : tickers) out += "," + t;
  out += "\n";
  for (Eigen::Index i = 0; i < k.matrix.rows(); ++i) {
    out += tickers[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < k.matrix.cols(); ++j) out += "," + format_double(k.matrix(i, j));
    out += "\n";
  }
  return out;
}

} // namespace gplvm
