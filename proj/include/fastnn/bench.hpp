#ifndef FASTNN_BENCH_HPP
#define FASTNN_BENCH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fastnn/estimators.hpp"

namespace fastnn {

enum class ExperimentId {
  exp1,       // estimator roster on the additive factor DGP across p
  exp2,       // input-dropout baselines against the factor regression
  exp3,       // unlabeled-sample-size sweep for the projection matrix
  fast_sim,   // sparse-throughput DGPs fast1 / fast2
  fanam_sim,  // additive-model roster against linear baselines
  null_case,  // pure-noise response, interpolation versus early stopping
  real_data,  // placeholder id; panel runs go through fit / eval
};

std::string experiment_name(ExperimentId id);
ExperimentId experiment_from_name(const std::string& name);

// Everything a simulation run needs. default_plan() fills the desk-scale
// preset for an experiment id; apply_paper_scale() switches the knobs that
// were shrunk for minutes-not-hours runs back to full size.
struct ExperimentPlan {
  ExperimentId id = ExperimentId::exp1;
  std::vector<int> p_grid;
  std::vector<Eigen::Index> n1_grid;  // unlabeled sample sizes (exp3 sweeps)
  Eigen::Index n_train = 500;
  Eigen::Index n_valid = 150;
  Eigen::Index n_test = 10000;
  int trials = 20;
  std::vector<std::string> estimators;

  int r = 5;
  int rbar = 10;
  double noise_sd = 1.0;
  int fast_fn = 1;  // fast-sim regression function, 1 (linear) or 2

  NetArch arch;
  TrainConfig train;
  ClippedL1Config penalty;
  int n_sel = 10;
  int fast_restarts = 4;  // refits per trial, lowest penalized valid loss wins

  std::vector<double> lasso_grid;  // validation-selected l1 levels
  std::vector<double> fanam_grid;
  int pcr_k = 0;  // 0 means rbar

  std::uint64_t master_seed = 2024;
};

ExperimentPlan default_plan(ExperimentId id);
void apply_paper_scale(ExperimentPlan& plan);

// Names accepted in ExperimentPlan::estimators.
const std::vector<std::string>& estimator_names();

struct TrialRecord {
  std::string experiment;
  std::string estimator;
  int p = 0;
  Eigen::Index n1 = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string metric = "mse";
  double value = 0.0;
  bool ok = true;
  std::string error;   // empty when ok
  std::string hyper;   // key=value;... echo of what the fit actually used
  double seconds = 0.0;
};

double eval_mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

// 1 - sum (pred - y)^2 / sum (ybar_train - y)^2 on held-out rows.
double eval_r2_oos(const Eigen::VectorXd& pred, const Eigen::VectorXd& y_test,
                   double ybar_train);

// Runs trials x p-grid x n1-grid, fitting every roster estimator on the
// identical split. Per-trial seeds derive from (master_seed, p, trial), so
// any subset of the grid reproduces the same records. Estimator failures
// are recorded, not fatal. jobs > 1 distributes trials over a worker pool;
// the merged output is identical to the single-job order.
std::vector<TrialRecord> run_experiment(const ExperimentPlan& plan,
                                        int jobs = 1);

// results CSV carries no wall-clock columns so reruns are byte-identical;
// timings live in their own CSV.
std::string to_results_csv(const std::vector<TrialRecord>& records);
std::string to_timings_csv(const std::vector<TrialRecord>& records);
std::string to_summary_json(const ExperimentPlan& plan,
                            const std::vector<TrialRecord>& records);

// log10 |Theta^T| for the first top_cols covariates, selection channels as
// rows sorted by each channel's largest magnitude, zeros as empty cells.
std::string theta_heatdata_csv(const FastNnModel& model, int top_cols);

// Shortest decimal text that parses back to exactly v.
std::string format_double(double v);

}  // namespace fastnn

#endif
