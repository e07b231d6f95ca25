#include "gplvm/vi.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include "gplvm/errors.hpp"

namespace gplvm {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Eigen::MatrixXd standard_normal(std::size_t rows, std::size_t cols, std::mt19937_64 &rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = normal(rng);
  return out;
}

void check_dimension(const VariationalPosterior &q, const LogDensity &target) {
  if (q.means.size() != q.log_stddevs.size() || q.dimension() != target.dimension()) {
    throw ContractViolation("variational dimension " + std::to_string(q.dimension()) +
                            " does not match target dimension " +
                            std::to_string(target.dimension()));
  }
}

} // namespace

ParameterLayout::ParameterLayout(KernelKind kind, std::size_t n_assets, std::size_t latent_dim)
    : kind_(kind), n_(n_assets), q_(latent_dim),
      size_(parameter_count(kind, n_assets, latent_dim)) {
  if (latent_dim < 1) throw ContractViolation("latent dimension must be >= 1");
}

Eigen::VectorXd ParameterLayout::to_unconstrained(const ModelParams &params) const {
  const auto n = static_cast<Eigen::Index>(n_);
  const auto q = static_cast<Eigen::Index>(q_);
  if (params.latents.rows() != n || params.latents.cols() != q) {
    throw ContractViolation("latent matrix shape does not match the layout");
  }
  Eigen::VectorXd z(static_cast<Eigen::Index>(size_));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < q; ++j) z(k++) = params.latents(i, j);
  const HyperParams &h = params.hyper;
  z(k++) = std::log(kind_ == KernelKind::linear ? h.kernel_scale : h.lengthscale);
  if (kind_ != KernelKind::linear) {
    if (h.scales.size() != n) throw ContractViolation("scale vector length differs from N");
    for (Eigen::Index i = 0; i < n; ++i) z(k++) = std::log(h.scales(i));
  }
  if (h.noise.size() != n) throw ContractViolation("noise vector length differs from N");
  for (Eigen::Index i = 0; i < n; ++i) z(k++) = std::log(h.noise(i));
  if (!z.allFinite()) throw ContractViolation("parameters must be finite and positive");
  return z;
}

ModelParams ParameterLayout::from_unconstrained(const Eigen::VectorXd &z) const {
  if (static_cast<std::size_t>(z.size()) != size_) {
    throw ContractViolation("unconstrained vector has " + std::to_string(z.size()) +
                            " entries, expected " + std::to_string(size_));
  }
  if (!z.allFinite()) throw ContractViolation("unconstrained vector must be finite");
  const auto n = static_cast<Eigen::Index>(n_);
  const auto q = static_cast<Eigen::Index>(q_);
  ModelParams p;
  p.latents.resize(n, q);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < q; ++j) p.latents(i, j) = z(k++);
  if (kind_ == KernelKind::linear) {
    p.hyper.kernel_scale = std::exp(z(k++));
  } else {
    p.hyper.lengthscale = std::exp(z(k++));
    p.hyper.scales = z.segment(k, n).array().exp();
    k += n;
  }
  p.hyper.noise = z.segment(k, n).array().exp();
  return p;
}

double ParameterLayout::log_jacobian(const Eigen::VectorXd &z) const {
  const auto first = static_cast<Eigen::Index>(first_positive());
  return z.tail(z.size() - first).sum();
}

Eigen::VectorXd ParameterLayout::pull_back(const ModelParams &gradient,
                                           const ModelParams &params) const {
  const auto n = static_cast<Eigen::Index>(n_);
  const auto q = static_cast<Eigen::Index>(q_);
  Eigen::VectorXd g(static_cast<Eigen::Index>(size_));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < q; ++j) g(k++) = gradient.latents(i, j);
  // d/dz f(e^z) = f'(x) x, plus 1 from the Jacobian term.
  if (kind_ == KernelKind::linear) {
    g(k++) = gradient.hyper.kernel_scale * params.hyper.kernel_scale + 1.0;
  } else {
    g(k++) = gradient.hyper.lengthscale * params.hyper.lengthscale + 1.0;
    g.segment(k, n) =
        (gradient.hyper.scales.array() * params.hyper.scales.array() + 1.0).matrix();
    k += n;
  }
  g.segment(k, n) = (gradient.hyper.noise.array() * params.hyper.noise.array() + 1.0).matrix();
  return g;
}

Eigen::VectorXd to_unconstrained(const ModelParams &params, KernelKind kind) {
  return ParameterLayout(kind, static_cast<std::size_t>(params.latents.rows()),
                         static_cast<std::size_t>(params.latents.cols()))
      .to_unconstrained(params);
}

ModelParams from_unconstrained(const Eigen::VectorXd &z, KernelKind kind, std::size_t n_assets,
                               std::size_t latent_dim) {
  return ParameterLayout(kind, n_assets, latent_dim).from_unconstrained(z);
}

GplvmPosterior::GplvmPosterior(const Eigen::MatrixXd &returns, KernelSpec spec,
                               std::size_t latent_dim, PriorConfig prior)
    : data_(returns), spec_(spec), prior_(prior),
      layout_(spec.kind, static_cast<std::size_t>(returns.rows()), latent_dim) {}

double GplvmPosterior::log_density(const Eigen::VectorXd &z) const {
  const ModelParams p = layout_.from_unconstrained(z);
  return log_joint(data_, p, spec_, prior_) + layout_.log_jacobian(z);
}

double GplvmPosterior::log_density_gradient(const Eigen::VectorXd &z,
                                            Eigen::VectorXd &grad) const {
  const ModelParams p = layout_.from_unconstrained(z);
  const LogJointGradient lj = log_joint_gradient(data_, p, spec_, prior_);
  grad = layout_.pull_back(lj.gradient, p);
  return lj.value + layout_.log_jacobian(z);
}

double gaussian_entropy(const VariationalPosterior &q) {
  return q.log_stddevs.sum() + 0.5 * static_cast<double>(q.dimension()) * (1.0 + kLog2Pi);
}

ElboEstimate elbo_from_draws(const VariationalPosterior &q, const LogDensity &target,
                             const Eigen::MatrixXd &eps) {
  check_dimension(q, target);
  const Eigen::VectorXd stddevs = q.log_stddevs.array().exp();
  const double entropy = gaussian_entropy(q);
  ElboEstimate out;
  out.samples.reserve(static_cast<std::size_t>(eps.cols()));
  for (Eigen::Index s = 0; s < eps.cols(); ++s) {
    const Eigen::VectorXd z = q.means + stddevs.cwiseProduct(eps.col(s));
    const double value = target.log_density(z) + entropy;
    if (!std::isfinite(value)) throw NumericalError("non-finite log density in ELBO sample");
    out.samples.push_back(value);
  }
  const double n = static_cast<double>(out.samples.size());
  double sum = 0.0;
  for (double v : out.samples) sum += v;
  out.value = sum / n;
  double ss = 0.0;
  for (double v : out.samples) ss += (v - out.value) * (v - out.value);
  out.std_error = n > 1.0 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return out;
}

ElboEstimate elbo_estimate(const VariationalPosterior &q, const LogDensity &target,
                           std::size_t n_samples, std::mt19937_64 &rng) {
  if (n_samples < 1) throw ContractViolation("elbo_estimate needs at least one sample");
  return elbo_from_draws(q, target, standard_normal(q.dimension(), n_samples, rng));
}

double elbo_gradient(const VariationalPosterior &q, const LogDensity &target,
                     const Eigen::MatrixXd &eps, Eigen::VectorXd &d_means,
                     Eigen::VectorXd &d_log_stddevs) {
  check_dimension(q, target);
  const Eigen::Index dim = q.means.size();
  const Eigen::VectorXd stddevs = q.log_stddevs.array().exp();
  d_means = Eigen::VectorXd::Zero(dim);
  d_log_stddevs = Eigen::VectorXd::Zero(dim);
  double total = 0.0;
  Eigen::VectorXd grad(dim);
  for (Eigen::Index s = 0; s < eps.cols(); ++s) {
    const Eigen::VectorXd z = q.means + stddevs.cwiseProduct(eps.col(s));
    const double value = target.log_density_gradient(z, grad);
    if (!std::isfinite(value) || !grad.allFinite()) {
      throw NumericalError("non-finite log density or gradient during optimization");
    }
    total += value;
    d_means += grad;
    d_log_stddevs += grad.cwiseProduct(eps.col(s)).cwiseProduct(stddevs);
  }
  const double inv = 1.0 / static_cast<double>(eps.cols());
  d_means *= inv;
  d_log_stddevs *= inv;
  d_log_stddevs.array() += 1.0; // entropy
  return total * inv + gaussian_entropy(q);
}

void validate(const FitConfig &cfg) {
  if (cfg.iterations < 1 || cfg.mc_samples < 1 || cfg.restarts < 1 ||
      cfg.final_elbo_samples < 1) {
    throw InputError("iterations, mc_samples, restarts and final_elbo_samples must be >= 1");
  }
  if (!(cfg.step_size > 0.0) || !std::isfinite(cfg.step_size)) {
    throw InputError("step size must be positive");
  }
  if (!(cfg.init_stddev > 0.0)) throw InputError("initial stddev must be positive");
}

OptimizationTrace maximize_elbo(const LogDensity &target, VariationalPosterior init,
                                const FitConfig &cfg, std::mt19937_64 &rng) {
  check_dimension(init, target);
  const double beta1 = 0.9;
  const double beta2 = 0.999;
  const double eps_adam = 1e-8;
  const Eigen::Index dim = init.means.size();

  OptimizationTrace out;
  out.posterior = std::move(init);
  out.elbo_trace.reserve(cfg.iterations);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(2 * dim);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(2 * dim);
  Eigen::VectorXd g(2 * dim);
  Eigen::VectorXd d_means;
  Eigen::VectorXd d_log_stddevs;
  double beta1_t = 1.0;
  double beta2_t = 1.0;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const Eigen::MatrixXd eps =
        standard_normal(static_cast<std::size_t>(dim), cfg.mc_samples, rng);
    out.elbo_trace.push_back(elbo_gradient(out.posterior, target, eps, d_means, d_log_stddevs));
    g << d_means, d_log_stddevs;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseAbs2();
    beta1_t *= beta1;
    beta2_t *= beta2;
    const Eigen::ArrayXd step = cfg.step_size * (m.array() / (1.0 - beta1_t)) /
                                ((v.array() / (1.0 - beta2_t)).sqrt() + eps_adam);
    out.posterior.means += step.head(dim).matrix();
    out.posterior.log_stddevs += step.tail(dim).matrix();
  }
  return out;
}

std::mt19937_64 restart_rng(std::uint64_t seed, std::size_t restart) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(restart),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(restart) >> 32)};
  return std::mt19937_64(seq);
}

VariationalPosterior initial_posterior(const Eigen::MatrixXd &returns, const KernelSpec &spec,
                                       std::size_t latent_dim, const FitConfig &cfg,
                                       std::mt19937_64 &rng) {
  const auto n = static_cast<std::size_t>(returns.rows());
  const ParameterLayout layout(spec.kind, n, latent_dim);
  ModelParams p;
  p.latents = standard_normal(n, latent_dim, rng);
  const Eigen::VectorXd mean = returns.rowwise().mean();
  const Eigen::VectorXd sd =
      ((returns.colwise() - mean).rowwise().squaredNorm() / static_cast<double>(returns.cols()))
          .cwiseSqrt()
          .cwiseMax(1e-8);
  p.hyper.lengthscale = 1.0;
  p.hyper.kernel_scale = 1.0;
  if (spec.stationary()) p.hyper.scales = sd;
  p.hyper.noise = 0.5 * sd;
  VariationalPosterior q;
  q.means = layout.to_unconstrained(p);
  q.log_stddevs = Eigen::VectorXd::Constant(q.means.size(), std::log(cfg.init_stddev));
  return q;
}

CovarianceEstimate FitResult::covariance() const {
  CovarianceEstimate k = assemble_covariance(kernel, point_params.latents, point_params.hyper);
  return k;
}

namespace {

struct RestartRun {
  RestartOutcome outcome;
  std::optional<OptimizationTrace> trace;
};

RestartRun run_restart(const GplvmPosterior &target, const Eigen::MatrixXd &returns,
                       const KernelSpec &spec, std::size_t latent_dim, const FitConfig &cfg,
                       std::size_t index) {
  RestartRun run;
  run.outcome.index = index;
  try {
    std::mt19937_64 rng = restart_rng(cfg.seed, index);
    VariationalPosterior init = initial_posterior(returns, spec, latent_dim, cfg, rng);
    OptimizationTrace trace = maximize_elbo(target, std::move(init), cfg, rng);
    const ElboEstimate final = elbo_estimate(trace.posterior, target, cfg.final_elbo_samples, rng);
    run.outcome.ok = true;
    run.outcome.final_elbo = final.value;
    run.outcome.std_error = final.std_error;
    run.trace = std::move(trace);
  } catch (const NumericalError &e) {
    run.outcome.error = e.what();
  } catch (const ContractViolation &e) {
    // Overflowing parameters surface as non-finite contract failures.
    run.outcome.error = e.what();
  }
  return run;
}

std::size_t worker_count(std::size_t requested, std::size_t jobs) {
  std::size_t n = requested;
  if (n == 0) n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  return std::min(n, jobs);
}

} // namespace

FitResult fit(const ReturnMatrix &returns, const KernelSpec &spec, std::size_t latent_dim,
              const FitConfig &cfg, const PriorConfig &prior) {
  validate(cfg);
  validate(returns);
  if (latent_dim < 1) throw InputError("latent dimension must be >= 1");
  if (returns.n_assets() < 2 || returns.n_days() < 2) {
    throw InputError("fit needs at least 2 assets and 2 days");
  }
  const GplvmPosterior target(returns.values, spec, latent_dim, prior);

  std::vector<RestartRun> runs(cfg.restarts);
  const std::size_t workers = worker_count(cfg.threads, cfg.restarts);
  if (workers <= 1) {
    for (std::size_t r = 0; r < cfg.restarts; ++r)
      runs[r] = run_restart(target, returns.values, spec, latent_dim, cfg, r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < cfg.restarts; r = next++)
          runs[r] = run_restart(target, returns.values, spec, latent_dim, cfg, r);
      });
    }
  }

  FitResult out;
  bool found = false;
  for (const RestartRun &run : runs) {
    out.restarts.push_back(run.outcome);
    if (run.outcome.ok && (!found || run.outcome.final_elbo > out.final_elbo)) {
      found = true;
      out.final_elbo = run.outcome.final_elbo;
      out.final_elbo_se = run.outcome.std_error;
      out.restart_index = run.outcome.index;
    }
  }
  if (!found) {
    std::string msg = "all " + std::to_string(cfg.restarts) + " restarts failed:";
    for (const RestartRun &run : runs) {
      msg += "\n  restart " + std::to_string(run.outcome.index) + ": " + run.outcome.error;
    }
    throw NumericalError(msg);
  }
  RestartRun &best = runs[out.restart_index];
  out.kernel = spec;
  out.latent_dim = latent_dim;
  out.tickers = returns.tickers;
  out.asset_means = returns.values.rowwise().mean();
  out.n_days = returns.n_days();
  out.posterior = std::move(best.trace->posterior);
  out.elbo_trace = std::move(best.trace->elbo_trace);
  out.point_params = target.layout().from_unconstrained(out.posterior.means);
  out.config = cfg;
  out.prior = prior;
  return out;
}

const FitResult &LatentDimSelection::best() const {
  for (const Row &row : rows) {
    if (row.ok && row.latent_dim == best_latent_dim) return *row.fit;
  }
  throw ContractViolation("no successful fit in latent dimension selection");
}

LatentDimSelection select_latent_dim(const ReturnMatrix &returns, const KernelSpec &spec,
                                     const std::vector<std::size_t> &latent_dims,
                                     const FitConfig &cfg, const PriorConfig &prior) {
  if (latent_dims.empty()) throw InputError("latent dimension range is empty");
  LatentDimSelection out;
  bool found = false;
  double best = 0.0;
  for (std::size_t q : latent_dims) {
    LatentDimSelection::Row row;
    row.latent_dim = q;
    try {
      FitResult f = fit(returns, spec, q, cfg, prior);
      row.ok = true;
      row.elbo = f.final_elbo;
      row.std_error = f.final_elbo_se;
      row.fit = std::move(f);
      if (!found || row.elbo > best || (row.elbo == best && q < out.best_latent_dim)) {
        found = true;
        best = row.elbo;
        out.best_latent_dim = q;
      }
    } catch (const NumericalError &e) {
      row.error = e.what();
    }
    out.rows.push_back(std::move(row));
  }
  if (!found) {
    std::string msg = "every latent dimension failed:";
    for (const auto &row : out.rows)
      msg += "\n  Q=" + std::to_string(row.latent_dim) + ": " + row.error;
    throw NumericalError(msg);
  }
  return out;
}

} // namespace gplvm
