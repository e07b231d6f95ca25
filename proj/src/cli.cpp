#include "gplvm/cli.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "gplvm/data.hpp"
#include "gplvm/errors.hpp"
#include "gplvm/finance.hpp"
#include "gplvm/predict.hpp"
#include "gplvm/serialize.hpp"
#include "gplvm/vi.hpp"

#ifndef GPLVM_VERSION
#define GPLVM_VERSION "0.0.0"
#endif

namespace gplvm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::size_t> parse_latent_range(std::string_view text) {
  auto number = [&](std::string_view s) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
      throw InputError("invalid latent dimension range '" + std::string(text) + "'");
    }
    return v;
  };
  std::size_t lo = 0;
  std::size_t hi = 0;
  if (const auto pos = text.find(".."); pos != std::string_view::npos) {
    lo = number(text.substr(0, pos));
    hi = number(text.substr(pos + 2));
  } else {
    lo = hi = number(text);
  }
  if (lo < 1 || hi < lo) {
    throw InputError("latent dimension range '" + std::string(text) + "' must satisfy 1 <= A <= B");
  }
  std::vector<std::size_t> out;
  for (std::size_t q = lo; q <= hi; ++q) out.push_back(q);
  return out;
}

std::vector<std::string> parse_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view item = text.substr(start, end - start);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.remove_prefix(1);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.remove_suffix(1);
    if (item.empty()) throw InputError("empty entry in list '" + std::string(text) + "'");
    out.emplace_back(item);
    start = end + 1;
  }
  return out;
}

std::string sha256_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  EVP_MD_CTX *ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("SHA-256 initialization failed");
  }
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char *hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::map<std::string, std::string> load_sectors(const fs::path &path) {
  if (!fs::exists(path)) throw InputError("sector file not found: '" + path.string() + "'");
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (row == 1 || line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("expected 'ticker,sector'", row, 1);
    const std::string ticker = line.substr(0, comma);
    if (!out.emplace(ticker, line.substr(comma + 1)).second) {
      throw ValidationError("duplicate ticker '" + ticker + "' in sector file");
    }
  }
  return out;
}

namespace {

struct Options {
  std::string prices;
  std::string returns;
  bool drop_incomplete = false;
  std::string kernel = "se";
  std::string kernel_form = "printed";
  std::size_t latent_dim = 3;
  std::string latent_range;
  FitConfig fit;
  BacktestConfig backtest;
  std::string estimators;
  std::string model;
  std::string sectors;
  std::string out = "gplvm-out";
  std::string format = "json";
  // simulate
  std::size_t assets = 30;
  std::size_t days = 1500;
  double noise = 0.01;
  double lengthscale = 1.0;
  double kernel_scale = 0.01;
  double signal_scale = 0.01;
  double latent_shift = 0.0;
  double start_price = 100.0;
};

struct Manifest {
  json doc = json::object();

  void input(const std::string &role, const std::string &path) {
    doc["inputs"].push_back({{"role", role}, {"path", path}, {"sha256", sha256_file(path)}});
  }
};

void require_file(const std::string &path) {
  if (!fs::exists(path)) throw InputError("input file not found: '" + path + "'");
  if (fs::is_directory(path)) throw InputError("input path is a directory: '" + path + "'");
}

fs::path output_dir(const Options &o) {
  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw InputError("cannot create output directory '" + o.out + "': " + ec.message());
  }
  return dir;
}

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw InputError("failed writing '" + path.string() + "'");
}

void write_json(const fs::path &path, const json &doc) { write_text(path, doc.dump(2) + "\n"); }

ReturnMatrix load_input(const Options &o, Manifest &manifest, std::ostream &err) {
  if (o.prices.empty() == o.returns.empty()) {
    throw InputError("exactly one of --prices or --returns is required");
  }
  LoadOptions load;
  load.drop_incomplete = o.drop_incomplete;
  ReturnMatrix r;
  std::vector<std::string> dropped;
  if (!o.prices.empty()) {
    require_file(o.prices);
    PriceLoad p = load_prices(o.prices, load);
    r = compute_returns(p.table);
    dropped = std::move(p.dropped);
    manifest.input("prices", o.prices);
  } else {
    require_file(o.returns);
    ReturnLoad rl = load_returns(o.returns, load);
    r = std::move(rl.returns);
    dropped = std::move(rl.dropped);
    manifest.input("returns", o.returns);
  }
  if (!dropped.empty()) {
    err << "dropped " << dropped.size() << " incomplete ticker(s):";
    for (const auto &t : dropped) err << " " << t;
    err << "\n";
  }
  manifest.doc["dropped_tickers"] = dropped;
  return r;
}

KernelSpec kernel_spec(const Options &o) {
  KernelSpec spec;
  spec.kind = parse_kernel_kind(o.kernel);
  spec.form = parse_kernel_form(o.kernel_form);
  return spec;
}

FitConfig fit_config(const Options &o) {
  FitConfig cfg = o.fit;
  validate(cfg);
  return cfg;
}

void begin_manifest(Manifest &m, const std::string &command, const Options &o) {
  m.doc["tool"] = "gplvm";
  m.doc["version"] = GPLVM_VERSION;
  m.doc["command"] = command;
  m.doc["seed"] = o.fit.seed;
  m.doc["inputs"] = json::array();
}

void finish_manifest(Manifest &m, const fs::path &dir, json config,
                     const std::vector<std::string> &outputs) {
  m.doc["config"] = std::move(config);
  m.doc["outputs"] = outputs;
  write_json(dir / "manifest.json", m.doc);
}

std::string fit_summary(const FitResult &f, const ReturnMatrix &r) {
  std::ostringstream os;
  std::size_t ok = 0;
  for (const auto &rs : f.restarts) ok += rs.ok ? 1 : 0;
  os << "kernel: " << to_string(f.kernel.kind) << " (" << to_string(f.kernel.form) << " form)\n";
  os << "assets: " << r.n_assets() << ", days: " << r.n_days() << "\n";
  os << "latent dimension: " << f.latent_dim << "\n";
  os << "restarts: " << ok << "/" << f.restarts.size() << " succeeded, best #" << f.restart_index
     << "\n";
  os << "final ELBO: " << format_double(f.final_elbo) << " (std. error "
     << format_double(f.final_elbo_se) << ")\n";
  const HyperParams &h = f.point_params.hyper;
  if (f.kernel.stationary()) {
    os << "lengthscale: " << format_double(h.lengthscale) << "\n";
  } else {
    os << "kernel scale: " << format_double(h.kernel_scale) << "\n";
  }
  return os.str();
}

int cmd_fit(const Options &o, std::ostream &out, std::ostream &err) {
  Manifest m;
  begin_manifest(m, "fit", o);
  const KernelSpec spec = kernel_spec(o);
  const FitConfig cfg = fit_config(o);
  const ReturnMatrix r = load_input(o, m, err);
  const fs::path dir = output_dir(o);
  std::vector<std::string> outputs{"model.json", "summary.txt"};

  json config = {{"kernel", to_string(spec.kind)},
                 {"kernel_form", to_string(spec.form)},
                 {"fit", to_json(cfg)},
                 {"drop_incomplete", o.drop_incomplete}};
  std::string summary;
  json model;
  if (!o.latent_range.empty()) {
    const auto dims = parse_latent_range(o.latent_range);
    config["latent_dim_range"] = o.latent_range;
    const LatentDimSelection sel = select_latent_dim(r, spec, dims, cfg);
    summary = format_elbo_summary(sel) + "\n" + fit_summary(sel.best(), r);
    model = to_json(sel.best());
    if (o.format == "csv") {
      write_text(dir / "elbo.csv", format_elbo_table_csv(sel));
      outputs.push_back("elbo.csv");
    } else {
      write_json(dir / "elbo.json", to_json(sel));
      outputs.push_back("elbo.json");
    }
  } else {
    config["latent_dim"] = o.latent_dim;
    const FitResult f = fit(r, spec, o.latent_dim, cfg);
    summary = fit_summary(f, r);
    model = to_json(f);
  }
  write_json(dir / "model.json", model);
  write_text(dir / "summary.txt", summary);
  finish_manifest(m, dir, std::move(config), outputs);
  out << summary;
  return kExitOk;
}

int cmd_backtest(const Options &o, std::ostream &out, std::ostream &err) {
  Manifest m;
  begin_manifest(m, "backtest", o);
  BacktestConfig bc = o.backtest;
  if (!o.estimators.empty()) bc.estimators = parse_list(o.estimators);
  bc.latent_dim = o.latent_dim;
  bc.kernel_form = parse_kernel_form(o.kernel_form);
  const FitConfig cfg = fit_config(o);
  const ReturnMatrix r = load_input(o, m, err);
  if (r.n_days() < bc.train_days + bc.hold_days) {
    throw InputError("the data has " + std::to_string(r.n_days()) +
                     " return days but --train-days + --hold-days = " +
                     std::to_string(bc.train_days + bc.hold_days) +
                     "; lower them or supply a longer history");
  }
  const fs::path dir = output_dir(o);
  const BacktestReport report = backtest(r, bc, cfg);
  for (const auto &est : report.estimators) {
    for (const auto &p : est.periods) {
      const double total = p.weights.sum();
      if (std::abs(total - 1.0) > 1e-8 || p.weights.minCoeff() < -1e-12 ||
          p.weights.maxCoeff() > bc.weight_cap + 1e-9) {
        throw NumericalError("weights for " + est.estimator + " violate the capped simplex");
      }
    }
  }
  write_json(dir / "backtest.json", to_json(report));
  const std::string table = format_backtest_table_csv(report);
  write_text(dir / "backtest.csv", table);
  json config = to_json(report)["config"];
  config["fit"] = to_json(cfg);
  config["drop_incomplete"] = o.drop_incomplete;
  finish_manifest(m, dir, std::move(config), {"backtest.json", "backtest.csv"});
  out << table;
  return kExitOk;
}

FitResult load_model(const std::string &path, Manifest &m) {
  if (path.empty()) throw InputError("--model is required");
  require_file(path);
  std::ifstream in(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception &e) {
    throw InputError("cannot parse model file '" + path + "': " + e.what());
  }
  m.input("model", path);
  return fit_result_from_json(doc);
}

ReturnMatrix align_tickers(const ReturnMatrix &r, const std::vector<std::string> &order) {
  std::map<std::string, Eigen::Index> index;
  for (std::size_t i = 0; i < r.tickers.size(); ++i)
    index[r.tickers[i]] = static_cast<Eigen::Index>(i);
  std::vector<std::string> missing;
  for (const auto &t : order)
    if (!index.contains(t)) missing.push_back(t);
  const std::set<std::string> wanted(order.begin(), order.end());
  std::vector<std::string> extra;
  for (const auto &t : r.tickers)
    if (!wanted.contains(t)) extra.push_back(t);
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "tickers differ between model and data;";
    if (!missing.empty()) {
      msg += " missing from data:";
      for (const auto &t : missing) msg += " " + t;
      msg += ";";
    }
    if (!extra.empty()) {
      msg += " not in model:";
      for (const auto &t : extra) msg += " " + t;
    }
    throw ValidationError(msg);
  }
  ReturnMatrix out;
  out.tickers = order;
  out.dates = r.dates;
  out.values.resize(static_cast<Eigen::Index>(order.size()), r.values.cols());
  for (std::size_t i = 0; i < order.size(); ++i)
    out.values.row(static_cast<Eigen::Index>(i)) = r.values.row(index.at(order[i]));
  return out;
}

int cmd_impute(const Options &o, std::ostream &out, std::ostream &err) {
  Manifest m;
  begin_manifest(m, "impute", o);
  const FitResult f = load_model(o.model, m);
  const ReturnMatrix test = align_tickers(load_input(o, m, err), f.tickers);
  const fs::path dir = output_dir(o);
  const ImputationReport report = loocv_impute(test, f.covariance(), f.asset_means);
  std::vector<std::string> outputs;
  if (o.format == "csv") {
    write_text(dir / "imputation_cells.csv", format_imputation_cells_csv(report));
    write_text(dir / "imputation_summary.csv", format_imputation_summary_csv(report));
    outputs = {"imputation_cells.csv", "imputation_summary.csv"};
  } else {
    write_json(dir / "imputation.json", to_json(report));
    outputs = {"imputation.json"};
  }
  finish_manifest(m, dir, {{"format", o.format}, {"drop_incomplete", o.drop_incomplete}}, outputs);
  out << format_imputation_summary_csv(report);
  return kExitOk;
}

int cmd_embed(const Options &o, std::ostream &out, std::ostream &) {
  Manifest m;
  begin_manifest(m, "embed", o);
  const FitResult f = load_model(o.model, m);
  std::map<std::string, std::string> sectors;
  if (!o.sectors.empty()) {
    sectors = load_sectors(o.sectors);
    m.input("sectors", o.sectors);
  }
  const fs::path dir = output_dir(o);
  const Embedding e = export_embedding(f, sectors);
  const std::string name = o.format == "csv" ? "embedding.csv" : "embedding.json";
  if (o.format == "csv") {
    write_text(dir / name, format_embedding_csv(e));
  } else {
    write_json(dir / name, to_json(e));
  }
  finish_manifest(m, dir, {{"format", o.format}}, {name});
  out << "wrote " << e.tickers.size() << " points in " << e.coordinates.cols()
      << " dimensions to " << (dir / name).string() << "\n";
  return kExitOk;
}

Date previous_weekday(const Date &d) {
  std::chrono::sys_days day{d};
  do {
    day -= std::chrono::days{1};
  } while (std::chrono::weekday{day}.c_encoding() % 6 == 0);
  return Date{day};
}

int cmd_simulate(const Options &o, std::ostream &out, std::ostream &) {
  Manifest m;
  begin_manifest(m, "simulate", o);
  SyntheticSpec s;
  s.n_assets = o.assets;
  s.n_days = o.days;
  s.latent_dim = o.latent_dim;
  s.seed = o.fit.seed;
  s.kernel = kernel_spec(o);
  s.lengthscale = o.lengthscale;
  s.kernel_scale = o.kernel_scale;
  if (o.assets < 2 || o.days < 2 || o.latent_dim < 1) {
    throw InputError("simulate needs --assets >= 2, --days >= 2, --latent-dim >= 1");
  }
  if (!(o.noise >= 0.0) || !(o.start_price > 0.0) || !(o.lengthscale > 0.0) ||
      !(o.kernel_scale > 0.0) || !(o.signal_scale > 0.0)) {
    throw InputError("noise must be >= 0; start price, lengthscale and scales must be > 0");
  }
  s.noise_scales = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(o.assets), o.noise);
  s.signal_scales = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(o.assets), o.signal_scale);
  if (o.latent_shift != 0.0) {
    std::mt19937_64 rng(o.fit.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd b(static_cast<Eigen::Index>(o.assets), static_cast<Eigen::Index>(o.latent_dim));
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      for (Eigen::Index i = 0; i < b.rows(); ++i) b(i, j) = normal(rng);
    b.col(0) = (o.latent_shift + 0.3 * b.col(0).array()).matrix();
    s.latents = b;
  }
  const SyntheticData d = generate_synthetic(s);
  const fs::path dir = output_dir(o);
  const PriceTable prices = prices_from_returns(
      d.returns, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(o.assets), o.start_price),
      previous_weekday(d.returns.dates.front()));
  write_text(dir / "prices.csv", format_prices_csv(prices));
  write_text(dir / "returns.csv", format_returns_csv(d.returns));
  json truth = {{"tickers", d.returns.tickers}};
  auto rows = [](const Eigen::MatrixXd &x) {
    json j = json::array();
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      j.push_back(std::vector<double>(x.row(i).begin(), x.row(i).end()));
    return j;
  };
  truth["covariance"] = rows(d.true_covariance);
  truth["latents"] = rows(d.true_latents);
  write_json(dir / "truth.json", truth);
  finish_manifest(m, dir,
                  {{"assets", o.assets},
                   {"days", o.days},
                   {"kernel", o.kernel},
                   {"kernel_form", o.kernel_form},
                   {"latent_dim", o.latent_dim},
                   {"noise", o.noise},
                   {"lengthscale", o.lengthscale},
                   {"kernel_scale", o.kernel_scale},
                   {"signal_scale", o.signal_scale},
                   {"latent_shift", o.latent_shift},
                   {"start_price", o.start_price}},
                  {"prices.csv", "returns.csv", "truth.json"});
  out << "wrote " << o.assets << " assets x " << o.days << " days to " << dir.string() << "\n";
  return kExitOk;
}

void add_input(CLI::App *cmd, Options &o) {
  auto *p = cmd->add_option("--prices", o.prices, "Price table (date column, one column per ticker)");
  auto *r = cmd->add_option("--returns", o.returns, "Return table in the same layout");
  p->excludes(r);
  cmd->add_flag("--drop-incomplete", o.drop_incomplete,
                "Drop tickers with missing cells instead of failing");
}

void add_fit_options(CLI::App *cmd, Options &o) {
  cmd->add_option("--kernel-form", o.kernel_form, "Kernel expression: printed or standard")
      ->check(CLI::IsMember({"printed", "standard"}));
  cmd->add_option("--iterations", o.fit.iterations, "Adam iterations per restart")
      ->capture_default_str();
  cmd->add_option("--restarts", o.fit.restarts, "Independent restarts")->capture_default_str();
  cmd->add_option("--mc-samples", o.fit.mc_samples, "Monte-Carlo draws per gradient")
      ->capture_default_str();
  cmd->add_option("--step-size", o.fit.step_size, "Adam step size")->capture_default_str();
  cmd->add_option("--final-elbo-samples", o.fit.final_elbo_samples,
                  "Draws for the final ELBO estimate")
      ->capture_default_str();
  cmd->add_option("--seed", o.fit.seed, "Random seed")->capture_default_str();
  cmd->add_option("--threads", o.fit.threads, "Worker threads (0: all cores)")
      ->capture_default_str();
}

void add_output(CLI::App *cmd, Options &o, bool with_format) {
  cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
  if (with_format) {
    cmd->add_option("--format", o.format, "Report format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
  }
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  Options o;
  CLI::App app{"Covariance estimation for asset returns with a GP latent variable model", "gplvm"};
  app.set_version_flag("--version", GPLVM_VERSION);
  app.require_subcommand(1);

  auto *fit_cmd = app.add_subcommand("fit", "Fit a model and write model.json and summary.txt");
  add_input(fit_cmd, o);
  fit_cmd->add_option("--kernel", o.kernel, "linear, se, exp or m32")->capture_default_str();
  auto *q = fit_cmd->add_option("--latent-dim", o.latent_dim, "Latent dimension Q")
                ->capture_default_str();
  auto *qr = fit_cmd->add_option("--latent-dim-range", o.latent_range,
                                 "Fit every Q in A..B and keep the highest ELBO");
  q->excludes(qr);
  add_fit_options(fit_cmd, o);
  add_output(fit_cmd, o, true);

  auto *bt = app.add_subcommand("backtest", "Rolling minimum-variance backtest");
  add_input(bt, o);
  bt->add_option("--train-days", o.backtest.train_days, "Training window")->capture_default_str();
  bt->add_option("--hold-days", o.backtest.hold_days, "Holding window")->capture_default_str();
  bt->add_option("--weight-cap", o.backtest.weight_cap, "Maximum weight per asset")
      ->capture_default_str();
  bt->add_option("--estimators", o.estimators,
                 "Comma list of linear, se, exp, m32, sample, ledoit, equal");
  bt->add_option("--latent-dim", o.latent_dim, "Latent dimension for GP-LVM estimators")
      ->capture_default_str();
  add_fit_options(bt, o);
  add_output(bt, o, false);

  auto *imp = app.add_subcommand("impute", "Leave-one-asset-out prediction of returns");
  imp->add_option("--model", o.model, "model.json from the fit command")->required();
  add_input(imp, o);
  add_output(imp, o, true);

  auto *emb = app.add_subcommand("embed", "Export posterior-mean latent positions");
  emb->add_option("--model", o.model, "model.json from the fit command")->required();
  emb->add_option("--sectors", o.sectors, "Optional ticker,sector table");
  add_output(emb, o, true);

  auto *sim = app.add_subcommand("simulate", "Generate a synthetic price and return dataset");
  sim->add_option("--kernel", o.kernel, "Generating kernel")->capture_default_str();
  sim->add_option("--kernel-form", o.kernel_form, "printed or standard")
      ->check(CLI::IsMember({"printed", "standard"}));
  sim->add_option("--latent-dim", o.latent_dim, "True latent dimension")->capture_default_str();
  sim->add_option("--assets", o.assets, "Number of assets")->capture_default_str();
  sim->add_option("--days", o.days, "Number of return days")->capture_default_str();
  sim->add_option("--noise", o.noise, "Residual std dev per asset")->capture_default_str();
  sim->add_option("--lengthscale", o.lengthscale, "Stationary kernel lengthscale")
      ->capture_default_str();
  sim->add_option("--kernel-scale", o.kernel_scale, "Linear kernel scale")->capture_default_str();
  sim->add_option("--signal-scale", o.signal_scale, "Stationary signal std dev per asset")
      ->capture_default_str();
  sim->add_option("--latent-shift", o.latent_shift,
                  "Draw latent column 1 as shift + 0.3 z (a common market factor)")
      ->capture_default_str();
  sim->add_option("--start-price", o.start_price, "Price on the day before the first return")
      ->capture_default_str();
  sim->add_option("--seed", o.fit.seed, "Random seed")->capture_default_str();
  add_output(sim, o, false);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*fit_cmd) return cmd_fit(o, out, err);
    if (*bt) return cmd_backtest(o, out, err);
    if (*imp) return cmd_impute(o, out, err);
    if (*emb) return cmd_embed(o, out, err);
    return cmd_simulate(o, out, err);
  } catch (const NumericalError &e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InputError &e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ContractViolation &e) {
    err << "invalid arguments: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

} // namespace gplvm::cli
