#include "fastnn/linear.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace fastnn {

Eigen::VectorXd predict(const FittedLinear& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.beta.size())
    throw std::invalid_argument("column count disagrees with coefficients");
  return (x * model.beta).array() + model.intercept;
}

FittedLinear fit_min_l2(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.rows();
  if (n == 0 || y.size() != n)
    throw std::invalid_argument("empty design or response length mismatch");
  const Eigen::MatrixXd gram = x * x.transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double lmax = eig.eigenvalues()(n - 1);
  const double lmin = eig.eigenvalues()(0);
  if (lmax <= 0.0) throw std::runtime_error("gram matrix is singular");
  Eigen::MatrixXd solvable = gram;
  if (lmin <= 0.0 || lmax / lmin > 1e12)
    solvable.diagonal().array() += 1e-10;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(solvable);
  const Eigen::VectorXd alpha = ldlt.solve(y);
  // Checked against the unjittered system: an inconsistent response (one the
  // jitter cannot repair) must not silently return a non-interpolating fit.
  const double resid = (gram * alpha - y).cwiseAbs().maxCoeff();
  if (!(resid <= 1e-6 * std::max(1.0, y.cwiseAbs().maxCoeff())))
    throw std::runtime_error("gram system could not be solved accurately");

  FittedLinear m;
  m.beta = x.transpose() * alpha;
  m.intercept = 0.0;
  m.method = "min-l2";
  return m;
}

FittedLinear fit_lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       double lambda) {
  const Eigen::Index n = x.rows(), p = x.cols();
  if (n == 0 || y.size() != n)
    throw std::invalid_argument("empty design or response length mismatch");
  if (lambda < 0.0) throw std::invalid_argument("negative penalty");

  const Eigen::RowVectorXd mu = x.colwise().mean();
  const double ybar = y.mean();
  Eigen::MatrixXd z = x.rowwise() - mu;
  Eigen::VectorXd yc = y.array() - ybar;

  // Unit-variance columns make the coordinate update a plain soft-threshold;
  // the per-column threshold lambda/s_j keeps the original-scale objective.
  Eigen::VectorXd s(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    s(j) = std::sqrt(z.col(j).squaredNorm() / static_cast<double>(n));
    if (s(j) > 0.0) z.col(j) /= s(j);
  }

  Eigen::VectorXd beta_std = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd resid = yc;
  const int max_sweeps = 10000;
  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (s(j) == 0.0) continue;
      const double old = beta_std(j);
      const double rho =
          z.col(j).dot(resid) / static_cast<double>(n) + old;
      const double thr = lambda / s(j);
      double next = 0.0;
      if (rho > thr)
        next = rho - thr;
      else if (rho < -thr)
        next = rho + thr;
      if (next != old) {
        resid -= (next - old) * z.col(j);
        max_delta = std::max(max_delta, std::abs(next - old));
        beta_std(j) = next;
      }
    }
    if (max_delta < 1e-8) converged = true;
  }

  FittedLinear m;
  m.beta = Eigen::VectorXd::Zero(p);
  for (Eigen::Index j = 0; j < p; ++j)
    if (s(j) > 0.0) m.beta(j) = beta_std(j) / s(j);
  m.intercept = ybar - mu.dot(m.beta);
  m.method = "lasso";
  m.converged = converged;
  return m;
}

FittedLinear fit_pcr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     int k) {
  const Eigen::Index n = x.rows(), p = x.cols();
  if (n == 0 || y.size() != n)
    throw std::invalid_argument("empty design or response length mismatch");
  if (k < 0 || k > std::min(n, p))
    throw std::invalid_argument("component count outside [0, min(n, p)]");

  const Eigen::RowVectorXd mu = x.colwise().mean();
  const double ybar = y.mean();

  FittedLinear m;
  m.method = "pcr";
  if (k == 0) {
    m.beta = Eigen::VectorXd::Zero(p);
    m.intercept = ybar;
    return m;
  }

  const Eigen::MatrixXd xc = x.rowwise() - mu;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(
      xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double tol = 1e-12 * std::max(sv(0), 1e-300);

  // Regression on scores T = U Sigma is diagonal: gamma_l = u_l^T yc / sv_l.
  const Eigen::VectorXd yc = y.array() - ybar;
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(k);
  for (int l = 0; l < k; ++l)
    if (sv(l) > tol) gamma(l) = svd.matrixU().col(l).dot(yc) / sv(l);

  m.beta = svd.matrixV().leftCols(k) * gamma;
  m.intercept = ybar - mu.dot(m.beta);
  return m;
}

FittedLinear fit_farm_lite(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           int k, double lambda) {
  const Eigen::Index n = x.rows(), p = x.cols();
  if (n == 0 || y.size() != n)
    throw std::invalid_argument("empty design or response length mismatch");
  if (k < 0 || k > std::min(n, p))
    throw std::invalid_argument("component count outside [0, min(n, p)]");

  const FittedLinear factor_part = fit_pcr(x, y, k);

  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - mu;
  Eigen::MatrixXd v(p, k);
  if (k > 0) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinV);
    v = svd.matrixV().leftCols(k);
  }
  const Eigen::MatrixXd u_resid = xc - (xc * v) * v.transpose();
  const Eigen::VectorXd y_resid = y - predict(factor_part, x);

  const FittedLinear sparse_part = fit_lasso(u_resid, y_resid, lambda);

  // Compose into one affine map of the raw covariates: the sparse term reads
  // (I - V V^T)(x - mu), whose mean over training rows is zero.
  FittedLinear m;
  m.beta = factor_part.beta + sparse_part.beta -
           v * (v.transpose() * sparse_part.beta);
  m.intercept = factor_part.intercept + sparse_part.intercept -
                (mu * (sparse_part.beta -
                       v * (v.transpose() * sparse_part.beta)))(0);
  m.method = "farm-lite";
  m.converged = sparse_part.converged;
  return m;
}

}  // namespace fastnn
