#include "fastnn/factor.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace fastnn {

double additive_candidate(int id, double x) {
  switch (id) {
    case 0:
      return std::cos(M_PI * x);
    case 1:
      return std::sin(x);
    case 2:
      return (1.0 - std::abs(x)) * (1.0 - std::abs(x));
    case 3:
      return 1.0 / (1.0 + std::exp(-x));
    case 4:
      return 2.0 * std::sqrt(std::abs(x)) - 1.0;
    default:
      throw std::invalid_argument("unknown candidate function id");
  }
}

double RegressionFn::eval(const Eigen::VectorXd& f,
                          const Eigen::VectorXd& u) const {
  switch (kind) {
    case RegressionKind::additive: {
      if (static_cast<std::size_t>(f.size()) != additive_ids.size())
        throw std::invalid_argument("factor arity mismatch");
      double s = 0.0;
      for (Eigen::Index j = 0; j < f.size(); ++j)
        s += additive_candidate(additive_ids[static_cast<std::size_t>(j)],
                                f(j));
      return s;
    }
    case RegressionKind::fast1: {
      if (f.size() < 4 || u.size() < 5)
        throw std::invalid_argument("needs 4 factors and 5 idio coordinates");
      double s = 0.0;
      for (int i = 0; i < 4; ++i) s += (i % 2 == 0 ? 1.0 : -1.0) * f(i);
      for (int j = 0; j < 5; ++j) s += (j % 2 == 0 ? -1.0 : 1.0) * u(j);
      return s;
    }
    case RegressionKind::fast2: {
      if (f.size() < 4 || u.size() < 5)
        throw std::invalid_argument("needs 4 factors and 5 idio coordinates");
      return f(0) * f(1) * f(1) - f(2) +
             std::log(8.0 + f(3) + 4.0 * u(0) +
                      std::exp(u(1) * u(2) - 5.0 * u(0))) +
             std::tan(u(3) + 0.1) + std::sin(u(4));
    }
    case RegressionKind::null_case:
      return 0.0;
  }
  throw std::logic_error("unreachable");
}

RegressionFn random_additive(int r, Rng& rng) {
  RegressionFn fn;
  fn.kind = RegressionKind::additive;
  for (int j = 0; j < r; ++j)
    fn.additive_ids.push_back(
        static_cast<int>(rng.uniform_index(kAdditiveCandidateCount)));
  return fn;
}

Eigen::MatrixXd random_loading(int p, int r, Rng& rng) {
  const double b = std::sqrt(3.0);
  return uniform_matrix(rng, p, r, -b, b);
}

Dataset generate(const FactorDgp& dgp, Eigen::Index n, Rng& rng) {
  if (dgp.loading.rows() != dgp.p || dgp.loading.cols() != dgp.r)
    throw std::invalid_argument("loading shape disagrees with p, r");
  Dataset d;
  d.f = uniform_matrix(rng, n, dgp.r, -dgp.factor_bound, dgp.factor_bound);
  d.u = dgp.idio == IdioKind::uniform
            ? uniform_matrix(rng, n, dgp.p, -dgp.idio_bound, dgp.idio_bound)
            : gaussian_matrix(rng, n, dgp.p, 0.0, 1.0);
  d.x = d.f * dgp.loading.transpose() + d.u;
  d.m.resize(n);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.m(i) = dgp.fn.eval(d.f.row(i), d.u.row(i));
    d.y(i) = d.m(i) + rng.gaussian(0.0, dgp.noise_sd);
  }
  return d;
}

DiversifiedProjection estimate_dpm_pca(const Eigen::MatrixXd& x_unlabeled,
                                       int rbar) {
  const Eigen::Index n1 = x_unlabeled.rows(), p = x_unlabeled.cols();
  if (rbar < 1 || rbar > n1 || rbar > p)
    throw std::invalid_argument("component count exceeds the data rank");
  const Eigen::MatrixXd gram =
      x_unlabeled * x_unlabeled.transpose() / static_cast<double>(n1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("eigendecomposition failed");

  DiversifiedProjection dp;
  dp.w.resize(p, rbar);
  dp.eigenvalues.resize(rbar);
  const double scale = std::sqrt(static_cast<double>(p));
  for (int k = 0; k < rbar; ++k) {
    const Eigen::Index idx = n1 - 1 - k;  // ascending order inside the solver
    const double lambda = eig.eigenvalues()(idx);
    if (lambda <= 1e-12 * std::max(eig.eigenvalues()(n1 - 1), 1e-300))
      throw std::invalid_argument("sample second-moment matrix is rank "
                                  "deficient for the requested components");
    Eigen::VectorXd v = x_unlabeled.transpose() * eig.eigenvectors().col(idx);
    v /= v.norm();
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    dp.w.col(k) = scale * v;
    dp.eigenvalues(k) = lambda;
  }
  return dp;
}

Eigen::MatrixXd surrogate_factors(const Eigen::MatrixXd& w,
                                  const Eigen::MatrixXd& x) {
  return x * w / static_cast<double>(w.rows());
}

Eigen::VectorXd surrogate_factor(const Eigen::MatrixXd& w,
                                 const Eigen::VectorXd& x) {
  return w.transpose() * x / static_cast<double>(w.rows());
}

ProjectionDiagnostics projection_diagnostics(const Eigen::MatrixXd& w,
                                             const Eigen::MatrixXd& loading) {
  if (w.rows() != loading.rows())
    throw std::invalid_argument("projection and loading row counts differ");
  const Eigen::MatrixXd h =
      w.transpose() * loading / static_cast<double>(w.rows());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(h);
  ProjectionDiagnostics d;
  d.nu_min = svd.singularValues().minCoeff();
  d.nu_max = svd.singularValues().maxCoeff();
  return d;
}

}  // namespace fastnn
