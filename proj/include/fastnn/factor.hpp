#ifndef FASTNN_FACTOR_HPP
#define FASTNN_FACTOR_HPP

#include <vector>

#include <Eigen/Core>

#include "fastnn/rng.hpp"

namespace fastnn {

// Scalar link functions the additive designs draw from.
double additive_candidate(int id, double x);
constexpr int kAdditiveCandidateCount = 5;

enum class RegressionKind { additive, fast1, fast2, null_case };

// Latent regression target m*(f, u). The additive kind sums one candidate
// per factor coordinate; fast1/fast2 involve the first five idiosyncratic
// coordinates; null_case is identically zero.
struct RegressionFn {
  RegressionKind kind = RegressionKind::null_case;
  std::vector<int> additive_ids;

  double eval(const Eigen::VectorXd& f, const Eigen::VectorXd& u) const;
};

RegressionFn random_additive(int r, Rng& rng);

enum class IdioKind { uniform, gaussian };

// x = loading * f + u with independent factors Unif[-factor_bound,
// factor_bound], idiosyncratic noise either Unif[-idio_bound, idio_bound] or
// standard normal, and observation noise N(0, noise_sd^2).
struct FactorDgp {
  int p = 0;
  int r = 0;
  Eigen::MatrixXd loading;  // p x r
  double factor_bound = 1.0;
  IdioKind idio = IdioKind::uniform;
  double idio_bound = 1.0;
  double noise_sd = 1.0;
  RegressionFn fn;
};

// Loading entries Unif[-sqrt(3), sqrt(3)] (unit variance).
Eigen::MatrixXd random_loading(int p, int r, Rng& rng);

// Rows are samples.
struct Dataset {
  Eigen::MatrixXd x;  // n x p
  Eigen::MatrixXd f;  // n x r
  Eigen::MatrixXd u;  // n x p
  Eigen::VectorXd y;  // n
  Eigen::VectorXd m;  // latent regression values
};

Dataset generate(const FactorDgp& dgp, Eigen::Index n, Rng& rng);

// Diversified projection matrix estimated by principal components: columns
// are the top eigenvectors of the unlabeled sample second-moment matrix,
// scaled by sqrt(p), signs fixed so each column's largest-magnitude entry is
// positive. Computed through the n1 x n1 Gram matrix.
struct DiversifiedProjection {
  Eigen::MatrixXd w;            // p x rbar
  Eigen::VectorXd eigenvalues;  // top rbar, descending
};

DiversifiedProjection estimate_dpm_pca(const Eigen::MatrixXd& x_unlabeled,
                                       int rbar);

// Surrogate factors f~ = p^-1 W^T x for each row of x; returns n x rbar.
Eigen::MatrixXd surrogate_factors(const Eigen::MatrixXd& w,
                                  const Eigen::MatrixXd& x);
Eigen::VectorXd surrogate_factor(const Eigen::MatrixXd& w,
                                 const Eigen::VectorXd& x);

// Extreme singular values of H = p^-1 W^T B; nu_min far above p^-1/2 marks
// W as a valid diversified projection for the loading B.
struct ProjectionDiagnostics {
  double nu_min = 0.0;
  double nu_max = 0.0;
};

ProjectionDiagnostics projection_diagnostics(const Eigen::MatrixXd& w,
                                             const Eigen::MatrixXd& loading);

}  // namespace fastnn

#endif
