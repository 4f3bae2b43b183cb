#ifndef FASTNN_ESTIMATORS_HPP
#define FASTNN_ESTIMATORS_HPP

#include <string>
#include <vector>

#include <Eigen/Core>

#include "fastnn/factor.hpp"
#include "fastnn/linear.hpp"
#include "fastnn/relu_net.hpp"

namespace fastnn {

// min(|x|/tau, 1) and the subgradient used by the optimizer: sign(x)/tau on
// 0 < |x| < tau, zero at the origin and on the plateau.
double clipped_l1(double x, double tau);
double clipped_l1_subgrad(double x, double tau);
double clipped_l1_sum(const Eigen::MatrixXd& theta, double tau);

struct ClippedL1Config {
  double lambda = 1e-2;
  double tau = 1e-2;
};

// Theory-driven scalings: lambda grows like log(p n)/n and 1/tau like n p.
ClippedL1Config theory_penalty(Eigen::Index n, Eigen::Index p,
                               double c_lambda = 1.0, double c_tau = 1.0);

struct NetArch {
  int depth = 4;  // hidden layers
  int width = 64;
  double truncation = 100.0;  // output clip M, also applied to Theta^T x
  // per-coordinate subnets of the additive model
  int univariate_depth = 2;
  int univariate_width = 16;
};

struct TrainConfig {
  int epochs = 100;
  int batch_size = 64;
  double lr = 1e-3;
  double input_dropout = 0.0;
  bool early_stopping = true;
  std::uint64_t seed = 0;
  bool clamp_weights = false;
  double weight_bound = kInf;
};

std::vector<Eigen::Index> arch_widths(const NetArch& arch,
                                      Eigen::Index input_dim);

// Mini-batch Adam on mean squared error; rows of x are samples. Keeps the
// checkpoint with the lowest validation MSE, the untrained net included.
struct PlainNetModel {
  DenseReluNet net;
  std::string kind = "plain-nn";
  double dropout_used = 0.0;
  double best_valid = 0.0;
  int best_epoch = 0;
  TrainConfig cfg;
};

PlainNetModel fit_plain_net(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const Eigen::MatrixXd& x_valid,
                            const Eigen::VectorXd& y_valid,
                            const NetArch& arch, const TrainConfig& cfg);
Eigen::VectorXd predict(const PlainNetModel& m, const Eigen::MatrixXd& x);

// Trainable linear projection (initialized from a supplied p x rbar matrix,
// scaled by 1/p) feeding the trunk; projection and trunk learn jointly.
struct JointNetModel {
  Eigen::MatrixXd proj;  // rbar x p
  DenseReluNet net;
  double dropout_used = 0.0;
  double best_valid = 0.0;
  int best_epoch = 0;
  TrainConfig cfg;
};

JointNetModel fit_joint_net(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const Eigen::MatrixXd& x_valid,
                            const Eigen::VectorXd& y_valid,
                            const Eigen::MatrixXd& w_init,
                            const NetArch& arch, const TrainConfig& cfg);
Eigen::VectorXd predict(const JointNetModel& m, const Eigen::MatrixXd& x);

// Factor augmented regression: the trunk reads the surrogate factors
// p^-1 W^T x produced by a fixed diversified projection.
struct FarNnModel {
  Eigen::MatrixXd w;  // p x rbar
  DenseReluNet net;
  double best_valid = 0.0;
  int best_epoch = 0;
  TrainConfig cfg;
};

FarNnModel fit_far_nn(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                      const Eigen::MatrixXd& x_valid,
                      const Eigen::VectorXd& y_valid,
                      const Eigen::MatrixXd& w, const NetArch& arch,
                      const TrainConfig& cfg);
Eigen::VectorXd predict(const FarNnModel& m, const Eigen::MatrixXd& x);

// Factor augmented sparse throughput: trunk input is the surrogate factors
// stacked with the clipped selection channels truncate(Theta^T x, M); Theta
// carries the clipped-L1 penalty lambda sum psi_tau(Theta_ij) and starts
// uniform in [-tau/2, tau/2]. Early stopping tracks penalized validation
// loss.
struct FastNnModel {
  Eigen::MatrixXd w;      // p x rbar
  Eigen::MatrixXd theta;  // p x n_sel
  DenseReluNet trunk;
  ClippedL1Config penalty;
  double best_valid = 0.0;
  int best_epoch = 0;
  TrainConfig cfg;
};

FastNnModel fit_fast_nn(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                        const Eigen::MatrixXd& x_valid,
                        const Eigen::VectorXd& y_valid,
                        const Eigen::MatrixXd& w, const NetArch& arch,
                        const ClippedL1Config& penalty,
                        const TrainConfig& cfg, int n_sel = 10);
Eigen::VectorXd predict(const FastNnModel& m, const Eigen::MatrixXd& x);

// Additive model: g0(surrogate factors) + sum_j beta_j g_j(x_j - v_j^T f~)
// with an l1 penalty on beta; V starts at the least squares residualizer of
// each covariate on the surrogate factors.
struct FanamModel {
  Eigen::MatrixXd w;  // p x rbar
  Eigen::MatrixXd v;  // p x rbar
  DenseReluNet g0;
  std::vector<DenseReluNet> gj;  // p univariate subnets
  Eigen::VectorXd beta;
  double lambda = 0.0;
  double best_valid = 0.0;
  int best_epoch = 0;
  TrainConfig cfg;
};

FanamModel fit_fanam(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     const Eigen::MatrixXd& x_valid,
                     const Eigen::VectorXd& y_valid, const Eigen::MatrixXd& w,
                     const NetArch& arch, double lambda,
                     const TrainConfig& cfg);
Eigen::VectorXd predict(const FanamModel& m, const Eigen::MatrixXd& x);

// Benchmark roster entries that are plain or joint nets over different input
// representations of a simulated dataset.
enum class BaselineKind {
  oracle,          // latent (f, u_1..u_J)
  oracle_factor,   // latent f only
  vanilla,         // raw x
  nn_joint,        // raw x through a trainable projection
  dropout_vanilla, // raw x, input dropout rate chosen on validation
  dropout_joint,
};

const std::vector<double>& dropout_grid();

struct BaselineFit {
  BaselineKind kind = BaselineKind::vanilla;
  bool is_joint = false;
  PlainNetModel plain;
  JointNetModel joint;
};

// w may be null except for the joint kinds. n_idio is the count J of leading
// idiosyncratic coordinates an oracle sees next to the factors.
BaselineFit fit_baseline_nn(BaselineKind kind, const Dataset& train,
                            const Dataset& valid, const Eigen::MatrixXd* w,
                            const NetArch& arch, const TrainConfig& cfg,
                            int n_idio = 0);
Eigen::VectorXd predict_baseline(const BaselineFit& fit, const Dataset& data,
                                 int n_idio = 0);
std::string baseline_name(BaselineKind kind);

// Self-describing JSON round trip for every fitted model family.
std::string model_to_json(const FarNnModel& m);
std::string model_to_json(const FastNnModel& m);
std::string model_to_json(const FanamModel& m);
std::string model_to_json(const JointNetModel& m);
std::string model_to_json(const PlainNetModel& m);
std::string model_to_json(const FittedLinear& m);

struct LoadedModel {
  std::string estimator;  // far-nn | fast-nn | fanam | nn-joint | plain-nn |
                          // lasso | pcr | min-l2 | farm-lite
  FarNnModel far;
  FastNnModel fast;
  FanamModel fanam;
  JointNetModel joint;
  PlainNetModel plain;
  FittedLinear linear;
};

LoadedModel model_from_json(const std::string& text);
Eigen::VectorXd predict(const LoadedModel& m, const Eigen::MatrixXd& x);

}  // namespace fastnn

#endif
