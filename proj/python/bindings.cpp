#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gplvm/data.hpp"
#include "gplvm/errors.hpp"
#include "gplvm/finance.hpp"
#include "gplvm/kernels.hpp"
#include "gplvm/model.hpp"
#include "gplvm/predict.hpp"
#include "gplvm/serialize.hpp"
#include "gplvm/vi.hpp"

namespace py = pybind11;
using namespace gplvm;

namespace {

KernelSpec spec_of(const std::string &kernel, const std::string &form) {
  return {parse_kernel_kind(kernel), parse_kernel_form(form)};
}

HyperParams hyper_of(double lengthscale, double kernel_scale, const Eigen::VectorXd &scales,
                     const Eigen::VectorXd &noise) {
  HyperParams h;
  h.lengthscale = lengthscale;
  h.kernel_scale = kernel_scale;
  h.scales = scales;
  h.noise = noise;
  return h;
}

ReturnMatrix return_matrix(const Eigen::MatrixXd &values) {
  ReturnMatrix r;
  r.values = values;
  r.dates = business_days(Date{std::chrono::year{2000} / 1 / 3}, static_cast<std::size_t>(values.cols()));
  for (Eigen::Index i = 0; i < values.rows(); ++i) r.tickers.push_back("A" + std::to_string(i));
  return r;
}

CovarianceEstimate estimate(const Eigen::MatrixXd &k) { return {k, "user"}; }

py::dict fit_dict(const FitResult &f) {
  py::dict d;
  d["covariance"] = f.covariance().matrix;
  d["latents"] = f.point_params.latents;
  d["lengthscale"] = f.point_params.hyper.lengthscale;
  d["kernel_scale"] = f.point_params.hyper.kernel_scale;
  d["scales"] = f.point_params.hyper.scales;
  d["noise"] = f.point_params.hyper.noise;
  d["elbo"] = f.final_elbo;
  d["elbo_std_error"] = f.final_elbo_se;
  d["elbo_trace"] = f.elbo_trace;
  d["restart_index"] = f.restart_index;
  d["model_json"] = to_json(f).dump();
  return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "GP-LVM covariance estimation for asset returns";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);

  m.def(
      "compute_returns",
      [](const Eigen::MatrixXd &prices) {
        PriceTable t;
        t.prices = prices;
        t.dates = business_days(Date{std::chrono::year{2000} / 1 / 3},
                                static_cast<std::size_t>(prices.cols()));
        for (Eigen::Index i = 0; i < prices.rows(); ++i) t.tickers.push_back("A" + std::to_string(i));
        return compute_returns(t).values;
      },
      py::arg("prices"), "Simple returns from an N x (D+1) price matrix.");

  m.def(
      "correlation_gram",
      [](const Eigen::MatrixXd &latents, const std::string &kernel, double lengthscale,
         const std::string &form) {
        HyperParams h;
        h.lengthscale = lengthscale;
        return correlation_gram(spec_of(kernel, form), latents, h);
      },
      py::arg("latents"), py::arg("kernel") = "se", py::arg("lengthscale") = 1.0,
      py::arg("form") = "printed");

  m.def(
      "assemble_covariance",
      [](const Eigen::MatrixXd &latents, const std::string &kernel, double lengthscale,
         double kernel_scale, const Eigen::VectorXd &scales, const Eigen::VectorXd &noise,
         const std::string &form) {
        return assemble_covariance(spec_of(kernel, form), latents,
                                   hyper_of(lengthscale, kernel_scale, scales, noise))
            .matrix;
      },
      py::arg("latents"), py::arg("kernel"), py::arg("lengthscale") = 1.0,
      py::arg("kernel_scale") = 1.0, py::arg("scales") = Eigen::VectorXd(),
      py::arg("noise") = Eigen::VectorXd(), py::arg("form") = "printed");

  m.def(
      "log_marginal_likelihood",
      [](const Eigen::MatrixXd &returns, const Eigen::MatrixXd &k) {
        return log_marginal_likelihood(returns, estimate(k));
      },
      py::arg("returns"), py::arg("covariance"));

  m.def("sample_covariance",
        [](const Eigen::MatrixXd &returns) { return sample_covariance(returns).matrix; },
        py::arg("returns"), "Rows are assets, columns are days.");
  m.def("ledoit_wolf", [](const Eigen::MatrixXd &returns) { return ledoit_wolf(returns).matrix; },
        py::arg("returns"));
  m.def("ledoit_wolf_intensity", &ledoit_wolf_intensity, py::arg("returns"));

  m.def("project_capped_simplex", &project_capped_simplex, py::arg("v"), py::arg("cap"));
  m.def(
      "min_variance_weights",
      [](const Eigen::MatrixXd &k, double cap) { return min_variance_weights(estimate(k), cap).weights; },
      py::arg("covariance"), py::arg("cap"));

  m.def(
      "sharpe_ratio",
      [](const std::vector<double> &daily, double annualization_days) {
        const AnnualizedStats s = sharpe_ratio(daily, annualization_days);
        return py::make_tuple(s.mean, s.std, s.sharpe ? py::cast(*s.sharpe) : py::none());
      },
      py::arg("daily_returns"), py::arg("annualization_days") = 252.0,
      "(annualized mean, annualized std, Sharpe ratio or None)");

  m.def(
      "generate_synthetic",
      [](std::size_t n_assets, std::size_t n_days, std::size_t latent_dim, double noise,
         std::uint64_t seed, const std::string &kernel, double lengthscale, double kernel_scale,
         const std::string &form) {
        SyntheticSpec s;
        s.n_assets = n_assets;
        s.n_days = n_days;
        s.latent_dim = latent_dim;
        s.noise_scales = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_assets), noise);
        s.seed = seed;
        s.kernel = spec_of(kernel, form);
        s.lengthscale = lengthscale;
        s.kernel_scale = kernel_scale;
        const SyntheticData d = generate_synthetic(s);
        py::dict out;
        out["returns"] = d.returns.values;
        out["covariance"] = d.true_covariance;
        out["signal_covariance"] = d.signal_covariance;
        out["latents"] = d.true_latents;
        return out;
      },
      py::arg("n_assets"), py::arg("n_days"), py::arg("latent_dim"), py::arg("noise"),
      py::arg("seed") = 0, py::arg("kernel") = "linear", py::arg("lengthscale") = 1.0,
      py::arg("kernel_scale") = 1.0, py::arg("form") = "printed");

  m.def(
      "fit",
      [](const Eigen::MatrixXd &returns, const std::string &kernel, std::size_t latent_dim,
         std::size_t iterations, std::size_t restarts, std::size_t mc_samples, double step_size,
         std::uint64_t seed, std::size_t threads, const std::string &form) {
        FitConfig cfg;
        cfg.iterations = iterations;
        cfg.restarts = restarts;
        cfg.mc_samples = mc_samples;
        cfg.step_size = step_size;
        cfg.seed = seed;
        cfg.threads = threads;
        const ReturnMatrix r = return_matrix(returns);
        FitResult f;
        {
          py::gil_scoped_release release;
          f = fit(r, spec_of(kernel, form), latent_dim, cfg);
        }
        return fit_dict(f);
      },
      py::arg("returns"), py::arg("kernel") = "se", py::arg("latent_dim") = 3,
      py::arg("iterations") = 3000, py::arg("restarts") = 50, py::arg("mc_samples") = 3,
      py::arg("step_size") = 0.05, py::arg("seed") = 0, py::arg("threads") = 0,
      py::arg("form") = "printed", "Fit a GP-LVM by variational inference; rows are assets.");

  m.def(
      "loocv_impute",
      [](const Eigen::MatrixXd &test, const Eigen::MatrixXd &k, const Eigen::VectorXd &means) {
        const ImputationReport rep = loocv_impute(return_matrix(test), estimate(k), means);
        py::dict out;
        out["predicted"] = rep.predicted;
        out["r2"] = rep.r2;
        out["mean_abs_dev"] = rep.mean_abs_dev;
        out["baseline_r2"] = rep.baseline_r2;
        return out;
      },
      py::arg("returns"), py::arg("covariance"), py::arg("historical_means"));

  m.def(
      "r2_score",
      [](const std::vector<double> &actual, const std::vector<double> &predicted) {
        return r2_score(std::span<const double>(actual), std::span<const double>(predicted));
      },
      py::arg("actual"), py::arg("predicted"));
}
