#include "fastnn/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace fastnn {

namespace {

// Fixed tags so an estimator's training seed does not depend on where it
// sits in the roster.
int canon_tag(const std::string& name) {
  static const std::vector<std::string> order = {
      "oracle-nn", "oracle-factor-nn", "far-nn",   "vanilla-nn", "nn-joint",
      "dropout-nn", "dropout-nn-joint", "fast-nn", "fanam",      "lasso",
      "pcr",        "min-l2",           "farm-lite"};
  for (std::size_t i = 0; i < order.size(); ++i)
    if (order[i] == name) return static_cast<int>(i) + 1;
  throw std::invalid_argument("unknown estimator: " + name);
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

struct TrialData {
  FactorDgp dgp;
  Dataset train, valid, test, unlabeled;
  std::uint64_t seed = 0;
};

// Shared splits first, the unlabeled block last, so exp3's n1 arms see the
// same training data and nested unlabeled prefixes.
TrialData make_trial(const ExperimentPlan& plan, int p, Eigen::Index n1,
                     int trial) {
  TrialData d;
  d.seed = derive_seed(plan.master_seed, {static_cast<std::uint64_t>(p),
                                          static_cast<std::uint64_t>(trial)});
  Rng rng(d.seed);
  d.dgp.p = p;
  d.dgp.r = plan.r;
  d.dgp.loading = random_loading(p, plan.r, rng);
  d.dgp.noise_sd = plan.noise_sd;
  switch (plan.id) {
    case ExperimentId::exp1:
    case ExperimentId::exp2:
    case ExperimentId::exp3:
      d.dgp.fn = random_additive(plan.r, rng);
      break;
    case ExperimentId::fast_sim:
      d.dgp.fn.kind =
          plan.fast_fn == 2 ? RegressionKind::fast2 : RegressionKind::fast1;
      break;
    case ExperimentId::fanam_sim:
      d.dgp.fn.kind = RegressionKind::fast1;
      break;
    case ExperimentId::null_case:
      d.dgp.fn.kind = RegressionKind::null_case;
      d.dgp.idio = IdioKind::gaussian;
      break;
    case ExperimentId::real_data:
      throw std::invalid_argument("real-data has no simulated trials");
  }
  d.train = generate(d.dgp, plan.n_train, rng);
  d.valid = generate(d.dgp, plan.n_valid, rng);
  d.test = generate(d.dgp, plan.n_test, rng);
  d.unlabeled = generate(d.dgp, n1, rng);
  return d;
}

bool needs_projection(const std::string& name) {
  return name == "far-nn" || name == "nn-joint" || name == "dropout-nn-joint" ||
         name == "fast-nn" || name == "fanam";
}

std::string net_hyper(const NetArch& arch, const TrainConfig& cfg) {
  std::ostringstream os;
  os << "adam=0.9|0.999|1e-8;batch=" << cfg.batch_size
     << ";depth=" << arch.depth << ";epochs=" << cfg.epochs
     << ";lr=" << format_double(cfg.lr) << ";width=" << arch.width;
  return os.str();
}

double valid_mse(const FittedLinear& m, const Dataset& valid) {
  return (predict(m, valid.x) - valid.y).squaredNorm() /
         static_cast<double>(valid.y.size());
}

TrialRecord run_one(const ExperimentPlan& plan, const TrialData& d,
                    const Eigen::MatrixXd* w, int rbar_eff,
                    const std::string& name, int p, Eigen::Index n1,
                    int trial) {
  TrialRecord rec;
  rec.experiment = experiment_name(plan.id);
  rec.estimator = name;
  rec.p = p;
  rec.n1 = n1;
  rec.trial = trial;
  rec.seed = d.seed;

  const int tag = canon_tag(name);
  TrainConfig cfg = plan.train;
  cfg.seed = derive_seed(d.seed, {static_cast<std::uint64_t>(tag)});
  const int n_idio = plan.id == ExperimentId::fast_sim ? 5 : 0;

  const auto t0 = std::chrono::steady_clock::now();
  try {
    Eigen::VectorXd pred;
    std::ostringstream hyper;
    if (name == "oracle-nn" || name == "oracle-factor-nn" ||
        name == "vanilla-nn" || name == "nn-joint" || name == "dropout-nn" ||
        name == "dropout-nn-joint") {
      BaselineKind kind = BaselineKind::vanilla;
      if (name == "oracle-nn") kind = BaselineKind::oracle;
      if (name == "oracle-factor-nn") kind = BaselineKind::oracle_factor;
      if (name == "nn-joint") kind = BaselineKind::nn_joint;
      if (name == "dropout-nn") kind = BaselineKind::dropout_vanilla;
      if (name == "dropout-nn-joint") kind = BaselineKind::dropout_joint;
      BaselineFit fit =
          fit_baseline_nn(kind, d.train, d.valid, w, plan.arch, cfg, n_idio);
      pred = predict_baseline(fit, d.test, n_idio);
      hyper << net_hyper(plan.arch, cfg);
      if (kind == BaselineKind::dropout_vanilla ||
          kind == BaselineKind::dropout_joint) {
        const double rho =
            fit.is_joint ? fit.joint.dropout_used : fit.plain.dropout_used;
        hyper << ";rho=" << format_double(rho);
      }
      if (fit.is_joint) hyper << ";rbar=" << rbar_eff;
    } else if (name == "far-nn") {
      FarNnModel m =
          fit_far_nn(d.train.x, d.train.y, d.valid.x, d.valid.y, *w, plan.arch,
                     cfg);
      pred = predict(m, d.test.x);
      hyper << net_hyper(plan.arch, cfg) << ";n1=" << n1
            << ";rbar=" << rbar_eff;
    } else if (name == "fast-nn") {
      FastNnModel best;
      for (int rep = 0; rep < std::max(1, plan.fast_restarts); ++rep) {
        cfg.seed = derive_seed(d.seed, {static_cast<std::uint64_t>(tag),
                                        static_cast<std::uint64_t>(rep)});
        FastNnModel m = fit_fast_nn(d.train.x, d.train.y, d.valid.x, d.valid.y,
                                    *w, plan.arch, plan.penalty, cfg,
                                    plan.n_sel);
        if (rep == 0 || m.best_valid < best.best_valid) best = m;
      }
      pred = predict(best, d.test.x);
      hyper << net_hyper(plan.arch, best.cfg) << ";lambda="
            << format_double(plan.penalty.lambda) << ";n1=" << n1
            << ";nsel=" << plan.n_sel << ";rbar=" << rbar_eff
            << ";restarts=" << std::max(1, plan.fast_restarts)
            << ";tau=" << format_double(plan.penalty.tau);
    } else if (name == "fanam") {
      FanamModel best;
      double best_mse = 0.0;
      bool have = false;
      for (double lam : plan.fanam_grid) {
        FanamModel m = fit_fanam(d.train.x, d.train.y, d.valid.x, d.valid.y,
                                 *w, plan.arch, lam, cfg);
        const double v = (predict(m, d.valid.x) - d.valid.y).squaredNorm() /
                         static_cast<double>(d.valid.y.size());
        if (!have || v < best_mse) {
          best = m;
          best_mse = v;
          have = true;
        }
      }
      if (!have) throw std::invalid_argument("empty fanam level grid");
      pred = predict(best, d.test.x);
      hyper << net_hyper(plan.arch, cfg)
            << ";lambda=" << format_double(best.lambda) << ";n1=" << n1
            << ";rbar=" << rbar_eff
            << ";uni=" << plan.arch.univariate_width << "x"
            << plan.arch.univariate_depth;
    } else if (name == "lasso" || name == "farm-lite") {
      const int k = plan.pcr_k > 0 ? plan.pcr_k : plan.rbar;
      FittedLinear best;
      double best_mse = 0.0;
      bool have = false;
      double chosen = 0.0;
      for (double lam : plan.lasso_grid) {
        FittedLinear m = name == "lasso"
                             ? fit_lasso(d.train.x, d.train.y, lam)
                             : fit_farm_lite(d.train.x, d.train.y, k, lam);
        const double v = valid_mse(m, d.valid);
        if (!have || v < best_mse) {
          best = m;
          best_mse = v;
          chosen = lam;
          have = true;
        }
      }
      if (!have) throw std::invalid_argument("empty l1 level grid");
      pred = predict(best, d.test.x);
      hyper << "lambda=" << format_double(chosen);
      if (name == "farm-lite") hyper << ";k=" << k;
    } else if (name == "pcr") {
      const int k = plan.pcr_k > 0 ? plan.pcr_k : plan.rbar;
      FittedLinear m = fit_pcr(d.train.x, d.train.y, k);
      pred = predict(m, d.test.x);
      hyper << "k=" << k;
    } else if (name == "min-l2") {
      FittedLinear m = fit_min_l2(d.train.x, d.train.y);
      pred = predict(m, d.test.x);
      hyper << "interpolator=minimum-norm";
    } else {
      throw std::invalid_argument("unknown estimator: " + name);
    }
    rec.value = eval_mse(pred, d.test.m);
    rec.hyper = sanitize(hyper.str());
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = sanitize(e.what());
  }
  rec.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rec;
}

struct TaskKey {
  int p = 0;
  Eigen::Index n1 = 0;
  int trial = 0;
};

void run_task(const ExperimentPlan& plan, const TaskKey& key,
              std::vector<TrialRecord>& out) {
  TrialData d = make_trial(plan, key.p, key.n1, key.trial);
  bool want_w = false;
  for (const std::string& name : plan.estimators)
    want_w = want_w || needs_projection(name);
  Eigen::MatrixXd w;
  std::string w_error;
  // a sample of n1 rows supports at most n1 principal directions; a small
  // unlabeled arm shrinks the projection instead of failing
  const int rbar_eff = static_cast<int>(
      std::min<Eigen::Index>(plan.rbar, key.n1));
  if (want_w) {
    try {
      w = estimate_dpm_pca(d.unlabeled.x, rbar_eff).w;
    } catch (const std::exception& e) {
      w_error = e.what();
    }
  }
  out.clear();
  for (const std::string& name : plan.estimators) {
    if (needs_projection(name) && !w_error.empty()) {
      TrialRecord rec;
      rec.experiment = experiment_name(plan.id);
      rec.estimator = name;
      rec.p = key.p;
      rec.n1 = key.n1;
      rec.trial = key.trial;
      rec.seed = d.seed;
      rec.ok = false;
      rec.error = sanitize("projection failed: " + w_error);
      out.push_back(rec);
      continue;
    }
    out.push_back(
        run_one(plan, d, &w, rbar_eff, name, key.p, key.n1, key.trial));
  }
}

void validate(const ExperimentPlan& plan) {
  if (plan.id == ExperimentId::real_data)
    throw std::invalid_argument(
        "real-data runs through fit/eval, not the simulator");
  if (plan.trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (plan.p_grid.empty()) throw std::invalid_argument("empty p grid");
  if (plan.n1_grid.empty()) throw std::invalid_argument("empty n1 grid");
  if (plan.estimators.empty()) throw std::invalid_argument("empty roster");
  for (const std::string& name : plan.estimators) canon_tag(name);
  for (int p : plan.p_grid)
    if (p < plan.r) throw std::invalid_argument("p grid below factor count");
  for (Eigen::Index n1 : plan.n1_grid)
    if (n1 < 1) throw std::invalid_argument("n1 must be >= 1");
  if (plan.n_train < 1 || plan.n_valid < 1 || plan.n_test < 1)
    throw std::invalid_argument("empty split");
}

}  // namespace

std::string experiment_name(ExperimentId id) {
  switch (id) {
    case ExperimentId::exp1: return "exp1";
    case ExperimentId::exp2: return "exp2";
    case ExperimentId::exp3: return "exp3";
    case ExperimentId::fast_sim: return "fast-sim";
    case ExperimentId::fanam_sim: return "fanam-sim";
    case ExperimentId::null_case: return "null-case";
    case ExperimentId::real_data: return "real-data";
  }
  throw std::invalid_argument("bad experiment id");
}

ExperimentId experiment_from_name(const std::string& name) {
  for (ExperimentId id :
       {ExperimentId::exp1, ExperimentId::exp2, ExperimentId::exp3,
        ExperimentId::fast_sim, ExperimentId::fanam_sim,
        ExperimentId::null_case, ExperimentId::real_data})
    if (experiment_name(id) == name) return id;
  throw std::invalid_argument("unknown experiment: " + name);
}

const std::vector<std::string>& estimator_names() {
  static const std::vector<std::string> names = {
      "oracle-nn", "oracle-factor-nn", "far-nn",   "vanilla-nn", "nn-joint",
      "dropout-nn", "dropout-nn-joint", "fast-nn", "fanam",      "lasso",
      "pcr",        "min-l2",           "farm-lite"};
  return names;
}

ExperimentPlan default_plan(ExperimentId id) {
  ExperimentPlan plan;
  plan.id = id;
  plan.noise_sd = std::sqrt(0.3);
  plan.lasso_grid = {0.001, 0.003, 0.01, 0.03, 0.1};
  plan.fanam_grid = {0.001, 0.01, 0.05};
  switch (id) {
    case ExperimentId::exp1:
      plan.p_grid = {100, 500, 1000};
      plan.n1_grid = {50};
      plan.estimators = {"oracle-nn", "far-nn", "vanilla-nn", "nn-joint"};
      break;
    case ExperimentId::exp2:
      plan.p_grid = {100, 500, 1000};
      plan.n1_grid = {50};
      plan.estimators = {"far-nn", "dropout-nn", "dropout-nn-joint"};
      break;
    case ExperimentId::exp3:
      plan.p_grid = {500};
      plan.n1_grid = {4, 8, 16, 64};
      plan.estimators = {"far-nn"};
      break;
    case ExperimentId::fast_sim:
      plan.p_grid = {100, 500, 1000};
      plan.n1_grid = {100};
      plan.n_train = 1000;
      plan.n_valid = 300;
      plan.r = 4;
      plan.estimators = {"oracle-nn", "oracle-factor-nn", "fast-nn"};
      // lr on the order of tau is what lets selection coordinates cross the
      // penalized band; see the trainer's comments.
      plan.train.lr = 1e-2;
      plan.train.epochs = 200;
      plan.train.batch_size = 128;
      break;
    case ExperimentId::fanam_sim:
      plan.p_grid = {50};
      plan.n1_grid = {60};
      plan.n_train = 400;
      plan.n_valid = 150;
      plan.n_test = 4000;
      plan.r = 4;
      plan.rbar = 6;
      plan.arch.width = 32;
      plan.arch.depth = 2;
      plan.estimators = {"fanam", "lasso", "pcr", "farm-lite"};
      break;
    case ExperimentId::null_case:
      plan.p_grid = {400};
      plan.n1_grid = {50};
      plan.n_train = 200;
      plan.n_valid = 60;
      plan.n_test = 4000;
      plan.trials = 50;
      plan.noise_sd = 1.0;
      plan.estimators = {"min-l2", "far-nn"};
      break;
    case ExperimentId::real_data:
      plan.p_grid = {0};
      plan.n1_grid = {1};
      plan.estimators = {"fast-nn"};
      break;
  }
  return plan;
}

void apply_paper_scale(ExperimentPlan& plan) {
  plan.trials = 200;
  plan.n_test = 100000;
  plan.arch.width = 300;
  plan.train.epochs = 200;
  if (plan.id == ExperimentId::fast_sim) {
    // keep the calibrated selection step size; 1e-4 never escapes the
    // penalized band under the inside-band start used here
    plan.train.lr = 1e-2;
  } else {
    plan.train.lr = 1e-4;
    plan.train.batch_size = 64;
  }
  if (plan.id == ExperimentId::exp1 || plan.id == ExperimentId::exp2 ||
      plan.id == ExperimentId::fast_sim) {
    plan.p_grid = {100, 200, 300, 400, 500, 600, 700, 800,
                   900, 1000, 2000, 3000, 4000};
  }
  if (plan.id == ExperimentId::exp3) plan.p_grid = {100, 500, 1000, 5000};
}

double eval_mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size() || pred.size() == 0)
    throw std::invalid_argument("prediction/truth length mismatch");
  return (pred - truth).squaredNorm() / static_cast<double>(pred.size());
}

double eval_r2_oos(const Eigen::VectorXd& pred, const Eigen::VectorXd& y_test,
                   double ybar_train) {
  if (pred.size() != y_test.size() || pred.size() == 0)
    throw std::invalid_argument("prediction/response length mismatch");
  const double denom =
      (y_test.array() - ybar_train).matrix().squaredNorm();
  if (!(denom > 0.0))
    throw std::invalid_argument("test responses have no variation");
  return 1.0 - (pred - y_test).squaredNorm() / denom;
}

std::vector<TrialRecord> run_experiment(const ExperimentPlan& plan, int jobs) {
  validate(plan);
  std::vector<TaskKey> tasks;
  for (int p : plan.p_grid)
    for (Eigen::Index n1 : plan.n1_grid)
      for (int t = 0; t < plan.trials; ++t) tasks.push_back({p, n1, t});

  std::vector<std::vector<TrialRecord>> buckets(tasks.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i)
      run_task(plan, tasks[i], buckets[i]);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) return;
        run_task(plan, tasks[i], buckets[i]);
      }
    };
    std::vector<std::thread> pool;
    const int n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(jobs), tasks.size());
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  std::vector<TrialRecord> records;
  for (const std::vector<TrialRecord>& b : buckets)
    records.insert(records.end(), b.begin(), b.end());
  return records;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string format_fixed(double v, int precision) {
  char buf[64];
  const auto res =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed,
                    precision);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string to_results_csv(const std::vector<TrialRecord>& records) {
  std::ostringstream os;
  os << "# fastnn-trials v1\n";
  os << "experiment,estimator,p,n1,trial,seed,metric,value,status,"
        "hyperparams\n";
  for (const TrialRecord& r : records) {
    os << r.experiment << ',' << r.estimator << ',' << r.p << ',' << r.n1
       << ',' << r.trial << ',' << r.seed << ',' << r.metric << ',';
    if (r.ok) os << format_double(r.value);
    os << ',' << (r.ok ? "ok" : "error:" + r.error) << ',' << r.hyper << '\n';
  }
  return os.str();
}

std::string to_timings_csv(const std::vector<TrialRecord>& records) {
  std::ostringstream os;
  os << "# fastnn-timings v1\n";
  os << "experiment,estimator,p,n1,trial,seconds\n";
  for (const TrialRecord& r : records)
    os << r.experiment << ',' << r.estimator << ',' << r.p << ',' << r.n1
       << ',' << r.trial << ',' << format_fixed(r.seconds, 6) << '\n';
  return os.str();
}

std::string to_summary_json(const ExperimentPlan& plan,
                            const std::vector<TrialRecord>& records) {
  nlohmann::json groups = nlohmann::json::array();
  for (int p : plan.p_grid) {
    for (Eigen::Index n1 : plan.n1_grid) {
      for (const std::string& name : plan.estimators) {
        std::vector<double> vals;
        int n_err = 0;
        for (const TrialRecord& r : records) {
          if (r.p != p || r.n1 != n1 || r.estimator != name) continue;
          if (r.ok)
            vals.push_back(r.value);
          else
            ++n_err;
        }
        nlohmann::json g;
        g["estimator"] = name;
        g["p"] = p;
        g["n1"] = static_cast<std::int64_t>(n1);
        g["ok"] = static_cast<int>(vals.size());
        g["errors"] = n_err;
        if (!vals.empty()) {
          double mean = 0.0;
          for (double v : vals) mean += v;
          mean /= static_cast<double>(vals.size());
          double ss = 0.0;
          for (double v : vals) ss += (v - mean) * (v - mean);
          const double sd =
              vals.size() > 1
                  ? std::sqrt(ss / static_cast<double>(vals.size() - 1))
                  : 0.0;
          g["mean"] = mean;
          g["sd"] = sd;
        } else {
          g["mean"] = nullptr;
          g["sd"] = nullptr;
        }
        groups.push_back(g);
      }
    }
  }
  nlohmann::json root;
  root["schema"] = "fastnn-summary/1";
  root["experiment"] = experiment_name(plan.id);
  root["metric"] = "mse";
  root["master_seed"] = plan.master_seed;
  root["trials"] = plan.trials;
  root["groups"] = groups;
  return root.dump(2);
}

std::string theta_heatdata_csv(const FastNnModel& model, int top_cols) {
  const Eigen::Index p = model.theta.rows();
  const Eigen::Index n_sel = model.theta.cols();
  const Eigen::Index cols = std::min<Eigen::Index>(top_cols, p);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n_sel));
  for (Eigen::Index c = 0; c < n_sel; ++c)
    order[static_cast<std::size_t>(c)] = c;
  Eigen::VectorXd channel_max = model.theta.cwiseAbs().colwise().maxCoeff();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return channel_max(a) > channel_max(b);
                   });
  std::ostringstream os;
  os << "channel";
  for (Eigen::Index j = 0; j < cols; ++j) os << ",x" << (j + 1);
  os << '\n';
  for (Eigen::Index c : order) {
    os << c;
    for (Eigen::Index j = 0; j < cols; ++j) {
      os << ',';
      const double a = std::abs(model.theta(j, c));
      if (a > 0.0) os << format_double(std::log10(a));
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace fastnn
