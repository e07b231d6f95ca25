#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>

namespace gplvm::testing {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64 &rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

Eigen::MatrixXd random_spd(Eigen::Index n, std::mt19937_64 &rng, double ridge) {
  const Eigen::MatrixXd a = random_matrix(n, n, rng);
  Eigen::MatrixXd k = a * a.transpose() / static_cast<double>(n);
  k.diagonal().array() += ridge;
  return 0.5 * (k + k.transpose());
}

double uniform(std::mt19937_64 &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double dense_mvn_log_likelihood(const Eigen::MatrixXd &r, const Eigen::MatrixXd &k) {
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
  const Eigen::MatrixXd inv = lu.inverse();
  const double det = lu.determinant();
  const double n = static_cast<double>(k.rows());
  double total = 0.0;
  for (Eigen::Index d = 0; d < r.cols(); ++d) {
    const Eigen::VectorXd x = r.col(d);
    const double quad = x.dot(inv * x);
    total += -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det) - 0.5 * quad;
  }
  return total;
}

Eigen::VectorXd central_gradient(const std::function<double(const Eigen::VectorXd &)> &f,
                                 const Eigen::VectorXd &x, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd plus = x;
    Eigen::VectorXd minus = x;
    plus(i) += h;
    minus(i) -= h;
    g(i) = (f(plus) - f(minus)) / (2.0 * h);
  }
  return g;
}

namespace {

// Calls visit(pattern) for every pattern in {0: lower, 1: upper, 2: free}^n.
template <typename Visit> void for_each_pattern(Eigen::Index n, Visit visit) {
  std::vector<int> p(static_cast<std::size_t>(n), 0);
  while (true) {
    visit(p);
    std::size_t i = 0;
    while (i < p.size() && p[i] == 2) p[i++] = 0;
    if (i == p.size()) return;
    ++p[i];
  }
}

bool feasible(const Eigen::VectorXd &w, double cap) {
  const double tol = 1e-10;
  return std::abs(w.sum() - 1.0) < tol && w.minCoeff() > -tol && w.maxCoeff() < cap + tol;
}

} // namespace

Eigen::VectorXd enumerate_min_variance(const Eigen::MatrixXd &k, double cap) {
  const Eigen::Index n = k.rows();
  Eigen::VectorXd best;
  double best_value = std::numeric_limits<double>::infinity();
  for_each_pattern(n, [&](const std::vector<int> &p) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (p[static_cast<std::size_t>(i)] == 1) w(i) = cap;
      if (p[static_cast<std::size_t>(i)] == 2) free.push_back(i);
    }
    const auto m = static_cast<Eigen::Index>(free.size());
    if (m > 0) {
      // [2 K_FF  -1; 1^T 0] [w_F; lambda] = [-2 K_FU w_U; 1 - sum w_U]
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m + 1, m + 1);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(m + 1);
      for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) a(i, j) = 2.0 * k(free[i], free[j]);
        a(i, m) = -1.0;
        a(m, i) = 1.0;
        b(i) = -2.0 * k.row(free[i]).dot(w);
      }
      b(m) = 1.0 - w.sum();
      const Eigen::VectorXd sol = a.fullPivLu().solve(b);
      for (Eigen::Index i = 0; i < m; ++i) w(free[i]) = sol(i);
    }
    if (!feasible(w, cap)) return;
    const double value = w.dot(k * w);
    if (value < best_value) {
      best_value = value;
      best = w;
    }
  });
  return best;
}

Eigen::VectorXd enumerate_projection(const Eigen::VectorXd &v, double cap) {
  const Eigen::Index n = v.size();
  Eigen::VectorXd best;
  double best_value = std::numeric_limits<double>::infinity();
  for_each_pattern(n, [&](const std::vector<int> &p) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    double fixed = 0.0;
    double free_sum = 0.0;
    int free_count = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int s = p[static_cast<std::size_t>(i)];
      if (s == 1) fixed += cap;
      if (s == 2) {
        free_sum += v(i);
        ++free_count;
      }
    }
    const double tau = free_count > 0 ? (free_sum - (1.0 - fixed)) / free_count : 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int s = p[static_cast<std::size_t>(i)];
      w(i) = s == 0 ? 0.0 : (s == 1 ? cap : v(i) - tau);
    }
    if (!feasible(w, cap)) return;
    const double value = (w - v).squaredNorm();
    if (value < best_value) {
      best_value = value;
      best = w;
    }
  });
  return best;
}

double ledoit_wolf_intensity_direct(const Eigen::MatrixXd &returns) {
  const Eigen::Index n = returns.rows();
  const Eigen::Index d = returns.cols();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k = 0; k < d; ++k) mean += returns.col(k);
  mean /= static_cast<double>(d);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < d; ++k) {
    const Eigen::VectorXd x = returns.col(k) - mean;
    s += x * x.transpose();
  }
  s /= static_cast<double>(d);
  const double mu = s.trace() / static_cast<double>(n);
  const double d2 = (s - mu * Eigen::MatrixXd::Identity(n, n)).squaredNorm() / static_cast<double>(n);
  double b2 = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) {
    const Eigen::VectorXd x = returns.col(k) - mean;
    b2 += (x * x.transpose() - s).squaredNorm() / static_cast<double>(n);
  }
  b2 /= static_cast<double>(d) * static_cast<double>(d);
  b2 = std::min(b2, d2);
  return d2 > 0.0 ? b2 / d2 : 0.0;
}

double simpson(const std::function<double(double)> &f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

double ConjugateToy::log_density(const Eigen::VectorXd &z) const {
  const double theta = z(0);
  const double two_pi = 2.0 * std::numbers::pi;
  double lp = -0.5 * std::log(two_pi * prior_std * prior_std) -
              0.5 * std::pow((theta - prior_mean) / prior_std, 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    lp += -0.5 * std::log(two_pi * noise * noise) - 0.5 * std::pow((y(i) - theta) / noise, 2);
  }
  return lp;
}

double ConjugateToy::log_density_gradient(const Eigen::VectorXd &z, Eigen::VectorXd &grad) const {
  const double theta = z(0);
  grad.resize(1);
  grad(0) = -(theta - prior_mean) / (prior_std * prior_std) +
            (y.array() - theta).sum() / (noise * noise);
  return log_density(z);
}

double ConjugateToy::posterior_std() const {
  const double precision = 1.0 / (prior_std * prior_std) + y.size() / (noise * noise);
  return std::sqrt(1.0 / precision);
}

double ConjugateToy::posterior_mean() const {
  const double v = posterior_std() * posterior_std();
  return v * (prior_mean / (prior_std * prior_std) + y.sum() / (noise * noise));
}

double ConjugateToy::log_evidence() const {
  // y ~ N(prior_mean 1, noise^2 I + prior_std^2 1 1^T)
  const Eigen::Index n = y.size();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(n, n, prior_std * prior_std);
  cov.diagonal().array() += noise * noise;
  const Eigen::VectorXd centered = y.array() - prior_mean;
  return dense_mvn_log_likelihood(centered, cov);
}

ModelParams random_params(KernelKind kind, Eigen::Index n, Eigen::Index q, std::mt19937_64 &rng,
                          double scale) {
  ModelParams p;
  p.latents = random_matrix(n, q, rng);
  p.hyper.lengthscale = uniform(rng, 0.5, 2.0);
  p.hyper.kernel_scale = scale * uniform(rng, 0.5, 1.5);
  if (kind != KernelKind::linear) {
    p.hyper.scales = (scale * Eigen::ArrayXd::NullaryExpr(n, [&] { return uniform(rng, 0.5, 1.5); }))
                         .matrix();
  }
  p.hyper.noise =
      (scale * Eigen::ArrayXd::NullaryExpr(n, [&] { return uniform(rng, 0.2, 0.8); })).matrix();
  return p;
}

ModelParams well_posed_params(const KernelSpec &spec, Eigen::Index n, Eigen::Index q,
                              std::mt19937_64 &rng) {
  while (true) {
    ModelParams p = random_params(spec.kind, n, q, rng);
    const Eigen::MatrixXd k = assemble_covariance(spec, p.latents, p.hyper).matrix;
    if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k).eigenvalues()(0) > 1e-2) return p;
  }
}

Eigen::VectorXd flatten(const ModelParams &params, KernelKind kind) {
  const Eigen::Index n = params.latents.rows();
  const Eigen::Index q = params.latents.cols();
  const bool linear = kind == KernelKind::linear;
  Eigen::VectorXd x(n * q + 1 + (linear ? n : 2 * n));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < q; ++j) x(k++) = params.latents(i, j);
  x(k++) = linear ? params.hyper.kernel_scale : params.hyper.lengthscale;
  if (!linear) {
    x.segment(k, n) = params.hyper.scales;
    k += n;
  }
  x.segment(k, n) = params.hyper.noise;
  return x;
}

ModelParams unflatten(const Eigen::VectorXd &x, KernelKind kind, Eigen::Index n, Eigen::Index q) {
  const bool linear = kind == KernelKind::linear;
  ModelParams p;
  p.latents.resize(n, q);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < q; ++j) p.latents(i, j) = x(k++);
  if (linear) {
    p.hyper.kernel_scale = x(k++);
  } else {
    p.hyper.lengthscale = x(k++);
    p.hyper.scales = x.segment(k, n);
    k += n;
  }
  p.hyper.noise = x.segment(k, n);
  return p;
}

bool close(double a, double b, double rel, double floor) {
  return std::abs(a - b) <= std::max(rel * std::abs(b), floor);
}

} // namespace gplvm::testing
