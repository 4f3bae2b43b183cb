#ifndef FASTNN_LINEAR_HPP
#define FASTNN_LINEAR_HPP

#include <string>

#include <Eigen/Core>

namespace fastnn {

// Affine model: prediction = x^T beta + intercept.
struct FittedLinear {
  Eigen::VectorXd beta;
  double intercept = 0.0;
  std::string method;
  bool converged = true;
};

Eigen::VectorXd predict(const FittedLinear& model, const Eigen::MatrixXd& x);

// Minimum-norm interpolator beta = X^T (X X^T)^-1 y for p >= n. The Gram
// matrix is jittered by 1e-10 I when its condition number exceeds 1e12;
// a Gram that stays numerically singular raises a runtime error.
FittedLinear fit_min_l2(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

// Cyclic coordinate descent for (2n)^-1 |y - b0 - X beta|^2 + lambda |beta|_1
// with intercept. Columns are centered and scaled to unit variance
// internally and coefficients mapped back, so the stationarity conditions
// hold in the original coordinates: active |n^-1 X_j^T r| = lambda,
// inactive <= lambda, with r the prediction residual. Sets converged=false
// if the sweep limit is hit.
FittedLinear fit_lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       double lambda);

// Principal component regression on the top-k score directions of the
// centered design. Directions with negligible spectrum contribute nothing.
FittedLinear fit_pcr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     int k);

// Factor augmented linear fit: PCR on k components plus a lasso on the
// covariates with those components projected out; the two affine parts are
// summed into a single model.
FittedLinear fit_farm_lite(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           int k, double lambda);

}  // namespace fastnn

#endif
