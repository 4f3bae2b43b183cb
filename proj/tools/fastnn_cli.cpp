#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "fastnn/bench.hpp"
#include "fastnn/csv.hpp"
#include "fastnn/estimators.hpp"
#include "fastnn/factor.hpp"
#include "fastnn/linear.hpp"
#include "fastnn/netbuild.hpp"
#include "fastnn/rng.hpp"
#include "fastnn/toml_lite.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fastnn;

namespace {

std::string out_base() {
  const char* env = std::getenv("FASTNN_OUT");
  return (env && *env) ? std::string(env) : std::string("runs");
}

// ---------------------------------------------------------------- config --

TomlValue int_array(const std::vector<int>& v) {
  std::vector<TomlValue> items;
  for (int x : v) items.push_back(toml_int(x));
  return toml_array(std::move(items));
}

TomlValue index_array(const std::vector<Eigen::Index>& v) {
  std::vector<TomlValue> items;
  for (Eigen::Index x : v) items.push_back(toml_int(x));
  return toml_array(std::move(items));
}

TomlValue float_array(const std::vector<double>& v) {
  std::vector<TomlValue> items;
  for (double x : v) items.push_back(toml_float(x));
  return toml_array(std::move(items));
}

TomlValue string_array(const std::vector<std::string>& v) {
  std::vector<TomlValue> items;
  for (const std::string& x : v) items.push_back(toml_string(x));
  return toml_array(std::move(items));
}

// Pulls required keys out of a parsed config and rejects anything the
// schema does not know, so typos fail loudly instead of being ignored.
struct ConfigReader {
  const TomlTable& table;
  std::set<std::string> seen;

  explicit ConfigReader(const TomlTable& t) : table(t) {}

  const TomlValue& need(const std::string& key) {
    const auto it = table.find(key);
    if (it == table.end())
      throw std::invalid_argument("missing required key '" + key + "'");
    seen.insert(key);
    return it->second;
  }
  long long need_int(const std::string& key) { return need(key).as_int(); }
  double need_float(const std::string& key) { return need(key).as_float(); }
  std::string need_string(const std::string& key) {
    return need(key).as_string();
  }
  void reject_unknown() const {
    for (const auto& [key, value] : table)
      if (!seen.count(key))
        throw std::invalid_argument("unknown key '" + key + "'");
  }
};

TomlTable plan_to_toml(const ExperimentPlan& plan, const std::string& outdir) {
  TomlTable t;
  t["experiment.name"] = toml_string(experiment_name(plan.id));
  t["experiment.p_grid"] = int_array(plan.p_grid);
  t["experiment.n1_grid"] = index_array(plan.n1_grid);
  t["experiment.n_train"] = toml_int(plan.n_train);
  t["experiment.n_valid"] = toml_int(plan.n_valid);
  t["experiment.n_test"] = toml_int(plan.n_test);
  t["experiment.trials"] = toml_int(plan.trials);
  t["experiment.estimators"] = string_array(plan.estimators);
  t["experiment.r"] = toml_int(plan.r);
  t["experiment.rbar"] = toml_int(plan.rbar);
  t["experiment.noise_sd"] = toml_float(plan.noise_sd);
  t["experiment.fast_fn"] = toml_int(plan.fast_fn);
  t["experiment.n_sel"] = toml_int(plan.n_sel);
  t["experiment.fast_restarts"] = toml_int(plan.fast_restarts);
  t["experiment.pcr_k"] = toml_int(plan.pcr_k);
  t["experiment.seed"] = toml_int(static_cast<long long>(plan.master_seed));
  t["experiment.lasso_grid"] = float_array(plan.lasso_grid);
  t["experiment.fanam_grid"] = float_array(plan.fanam_grid);
  t["arch.depth"] = toml_int(plan.arch.depth);
  t["arch.width"] = toml_int(plan.arch.width);
  t["arch.truncation"] = toml_float(plan.arch.truncation);
  t["arch.univariate_depth"] = toml_int(plan.arch.univariate_depth);
  t["arch.univariate_width"] = toml_int(plan.arch.univariate_width);
  t["trainer.epochs"] = toml_int(plan.train.epochs);
  t["trainer.batch_size"] = toml_int(plan.train.batch_size);
  t["trainer.lr"] = toml_float(plan.train.lr);
  t["penalty.lambda"] = toml_float(plan.penalty.lambda);
  t["penalty.tau"] = toml_float(plan.penalty.tau);
  t["output.dir"] = toml_string(outdir);
  return t;
}

std::pair<ExperimentPlan, std::string> plan_from_toml(const TomlTable& table) {
  ConfigReader c(table);
  ExperimentPlan plan;
  plan.id = experiment_from_name(c.need_string("experiment.name"));
  for (const TomlValue& v : c.need("experiment.p_grid").as_array())
    plan.p_grid.push_back(static_cast<int>(v.as_int()));
  for (const TomlValue& v : c.need("experiment.n1_grid").as_array())
    plan.n1_grid.push_back(static_cast<Eigen::Index>(v.as_int()));
  plan.n_train = c.need_int("experiment.n_train");
  plan.n_valid = c.need_int("experiment.n_valid");
  plan.n_test = c.need_int("experiment.n_test");
  plan.trials = static_cast<int>(c.need_int("experiment.trials"));
  plan.estimators.clear();
  for (const TomlValue& v : c.need("experiment.estimators").as_array())
    plan.estimators.push_back(v.as_string());
  plan.r = static_cast<int>(c.need_int("experiment.r"));
  plan.rbar = static_cast<int>(c.need_int("experiment.rbar"));
  plan.noise_sd = c.need_float("experiment.noise_sd");
  plan.fast_fn = static_cast<int>(c.need_int("experiment.fast_fn"));
  plan.n_sel = static_cast<int>(c.need_int("experiment.n_sel"));
  plan.fast_restarts = static_cast<int>(c.need_int("experiment.fast_restarts"));
  plan.pcr_k = static_cast<int>(c.need_int("experiment.pcr_k"));
  plan.master_seed =
      static_cast<std::uint64_t>(c.need_int("experiment.seed"));
  plan.lasso_grid.clear();
  for (const TomlValue& v : c.need("experiment.lasso_grid").as_array())
    plan.lasso_grid.push_back(v.as_float());
  plan.fanam_grid.clear();
  for (const TomlValue& v : c.need("experiment.fanam_grid").as_array())
    plan.fanam_grid.push_back(v.as_float());
  plan.arch.depth = static_cast<int>(c.need_int("arch.depth"));
  plan.arch.width = static_cast<int>(c.need_int("arch.width"));
  plan.arch.truncation = c.need_float("arch.truncation");
  plan.arch.univariate_depth =
      static_cast<int>(c.need_int("arch.univariate_depth"));
  plan.arch.univariate_width =
      static_cast<int>(c.need_int("arch.univariate_width"));
  plan.train.epochs = static_cast<int>(c.need_int("trainer.epochs"));
  plan.train.batch_size = static_cast<int>(c.need_int("trainer.batch_size"));
  plan.train.lr = c.need_float("trainer.lr");
  plan.penalty.lambda = c.need_float("penalty.lambda");
  plan.penalty.tau = c.need_float("penalty.tau");
  const std::string outdir = c.need_string("output.dir");
  c.reject_unknown();
  return {plan, outdir};
}

// ------------------------------------------------------------- simulate --

struct SimulateOptions {
  std::string experiment;  // cli spelling
  std::string config_path;
  std::string out;
  std::vector<int> p;
  std::vector<long long> n1;
  std::vector<std::string> estimators;
  int trials = 0;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool paper_scale = false;
  bool has_p = false, has_n1 = false, has_estimators = false;
  bool has_trials = false, has_seed = false;
};

std::string internal_experiment_name(const std::string& cli_name) {
  if (cli_name == "fast") return "fast-sim";
  if (cli_name == "fanam") return "fanam-sim";
  return cli_name;
}

int cmd_simulate(const SimulateOptions& o) {
  const ExperimentId id =
      experiment_from_name(internal_experiment_name(o.experiment));
  ExperimentPlan plan = default_plan(id);
  std::string outdir;
  if (!o.config_path.empty()) {
    const TomlTable table =
        parse_toml(read_text_file(o.config_path), o.config_path);
    auto [loaded, dir] = plan_from_toml(table);
    if (loaded.id != id)
      throw std::invalid_argument(
          "config is for experiment '" + experiment_name(loaded.id) +
          "' but the command line asks for '" + experiment_name(id) + "'");
    plan = loaded;
    outdir = dir;
  }
  if (o.paper_scale) apply_paper_scale(plan);
  if (o.has_p) plan.p_grid = o.p;
  if (o.has_n1) {
    plan.n1_grid.clear();
    for (long long v : o.n1) plan.n1_grid.push_back(v);
  }
  if (o.has_estimators) plan.estimators = o.estimators;
  if (o.has_trials) plan.trials = o.trials;
  if (o.has_seed) plan.master_seed = o.seed;
  if (!o.out.empty()) outdir = o.out;
  if (outdir.empty()) outdir = out_base() + "/" + o.experiment;

  const std::vector<TrialRecord> records = run_experiment(plan, o.jobs);
  int errors = 0;
  for (const TrialRecord& rec : records) errors += rec.ok ? 0 : 1;

  fs::create_directories(outdir);
  write_text_file(outdir + "/results.csv", to_results_csv(records));
  write_text_file(outdir + "/timings.csv", to_timings_csv(records));
  write_text_file(outdir + "/summary.json", to_summary_json(plan, records));
  write_text_file(outdir + "/config.toml",
                  write_toml(plan_to_toml(plan, outdir)));

  std::cout << experiment_name(id) << ": " << records.size() << " records, "
            << errors << " errors\n"
            << "wrote " << outdir << "/results.csv\n"
            << "wrote " << outdir << "/timings.csv\n"
            << "wrote " << outdir << "/summary.json\n"
            << "wrote " << outdir << "/config.toml\n";
  return 0;
}

// ------------------------------------------------------- fit/predict/eval --

struct LabeledData {
  std::vector<std::string> covariates;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

LabeledData split_response(const CsvTable& table, const std::string& response) {
  LabeledData d;
  const Eigen::Index resp = column_index(table, response);
  d.y = table.values.col(resp);
  d.x.resize(table.values.rows(), table.values.cols() - 1);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
    if (j == resp) continue;
    d.covariates.push_back(table.columns[j]);
    d.x.col(k++) = table.values.col(j);
  }
  if (d.x.cols() == 0)
    throw std::invalid_argument("no covariate columns besides the response");
  return d;
}

// First `split` fraction of the rows is in-sample (panel order respected),
// the rest is held out; the in-sample block is then split at random into
// train and validation rows.
struct RowSplit {
  std::vector<int> train, valid;
  Eigen::Index n_in = 0;
};

RowSplit make_split(Eigen::Index n, double split, double inner,
                    std::uint64_t seed) {
  if (!(split > 0.0) || split > 1.0)
    throw std::invalid_argument("--split must lie in (0, 1]");
  if (!(inner > 0.0) || inner >= 1.0)
    throw std::invalid_argument("--inner-split must lie in (0, 1)");
  RowSplit s;
  s.n_in = static_cast<Eigen::Index>(
      std::llround(split * static_cast<double>(n)));
  if (s.n_in < 3)
    throw std::invalid_argument("split leaves fewer than 3 in-sample rows");
  std::vector<int> order(static_cast<std::size_t>(s.n_in));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng rng(seed);
  rng.shuffle(order);
  auto n_tr = static_cast<std::size_t>(
      std::llround(inner * static_cast<double>(s.n_in)));
  n_tr = std::min(std::max<std::size_t>(n_tr, 2), order.size() - 1);
  s.train.assign(order.begin(), order.begin() + static_cast<long>(n_tr));
  s.valid.assign(order.begin() + static_cast<long>(n_tr), order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.valid.begin(), s.valid.end());
  return s;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& y, const std::vector<int>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = y(rows[i]);
  return out;
}

struct Standardizer {
  Eigen::VectorXd center, scale;
};

Standardizer fit_standardizer(const Eigen::MatrixXd& x_train) {
  Standardizer s;
  s.center = x_train.colwise().mean();
  s.scale.resize(x_train.cols());
  const double n = static_cast<double>(x_train.rows());
  for (Eigen::Index j = 0; j < x_train.cols(); ++j) {
    const double ss = (x_train.col(j).array() - s.center(j)).square().sum();
    const double sd = n > 1.0 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    s.scale(j) = sd > 0.0 ? sd : 1.0;  // constant columns pass through
  }
  return s;
}

Eigen::MatrixXd apply_standardizer(const Standardizer& s, Eigen::MatrixXd x) {
  x.rowwise() -= s.center.transpose();
  x.array().rowwise() /= s.scale.transpose().array();
  return x;
}

// The extra "data" block saved next to the model fields: response and
// covariate names plus the training-row standardization, so predict and
// eval can rebuild exactly the matrix the model saw.
struct DataCard {
  bool present = false;
  std::string response;
  std::vector<std::string> columns;
  bool standardized = false;
  Standardizer std;
};

std::string attach_data_card(const std::string& model_json,
                             const std::vector<std::string>& covariates,
                             const std::string& response,
                             const Standardizer* standardizer) {
  json j = json::parse(model_json);
  json card;
  card["response"] = response;
  card["columns"] = covariates;
  if (standardizer) {
    card["center"] = std::vector<double>(
        standardizer->center.data(),
        standardizer->center.data() + standardizer->center.size());
    card["scale"] = std::vector<double>(
        standardizer->scale.data(),
        standardizer->scale.data() + standardizer->scale.size());
  }
  j["data"] = card;
  return j.dump(2);
}

DataCard read_data_card(const std::string& model_text) {
  DataCard c;
  const json j = json::parse(model_text);
  if (!j.contains("data")) return c;
  const json& card = j.at("data");
  c.present = true;
  c.response = card.at("response").get<std::string>();
  c.columns = card.at("columns").get<std::vector<std::string>>();
  if (card.contains("center")) {
    c.standardized = true;
    const auto center = card.at("center").get<std::vector<double>>();
    const auto scale = card.at("scale").get<std::vector<double>>();
    c.std.center = Eigen::Map<const Eigen::VectorXd>(
        center.data(), static_cast<Eigen::Index>(center.size()));
    c.std.scale = Eigen::Map<const Eigen::VectorXd>(
        scale.data(), static_cast<Eigen::Index>(scale.size()));
  }
  return c;
}

Eigen::Index model_input_dim(const LoadedModel& m) {
  if (m.estimator == "far-nn") return m.far.w.rows();
  if (m.estimator == "fast-nn") return m.fast.w.rows();
  if (m.estimator == "fanam") return m.fanam.w.rows();
  if (m.estimator == "nn-joint") return m.joint.proj.cols();
  if (m.estimator == "plain-nn") return m.plain.net.input_dim();
  return m.linear.beta.size();
}

// Builds the covariate matrix a saved model expects from a CSV: training
// columns in training order when the model carries a data card, otherwise
// every column except the response.
Eigen::MatrixXd assemble_covariates(const CsvTable& table, const DataCard& card,
                                    const std::string& response) {
  Eigen::MatrixXd x;
  if (card.present) {
    x.resize(table.values.rows(),
             static_cast<Eigen::Index>(card.columns.size()));
    for (std::size_t j = 0; j < card.columns.size(); ++j) {
      Eigen::Index col = -1;
      try {
        col = column_index(table, card.columns[j]);
      } catch (const std::invalid_argument&) {
        throw std::invalid_argument("data file lacks column '" +
                                    card.columns[j] +
                                    "' the model was trained on");
      }
      x.col(static_cast<Eigen::Index>(j)) = table.values.col(col);
    }
  } else {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0;
         j < static_cast<Eigen::Index>(table.columns.size()); ++j)
      if (response.empty() || table.columns[j] != response) keep.push_back(j);
    x.resize(table.values.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j)
      x.col(static_cast<Eigen::Index>(j)) = table.values.col(keep[j]);
  }
  if (card.standardized) x = apply_standardizer(card.std, x);
  return x;
}

void check_model_shape(const LoadedModel& m, const Eigen::MatrixXd& x) {
  const Eigen::Index want = model_input_dim(m);
  if (x.cols() != want)
    throw std::invalid_argument(
        "model expects " + std::to_string(want) + " covariate columns, data provides " +
        std::to_string(x.cols()));
}

struct FitOptions {
  std::string data, response, estimator, model;
  double split = 0.6, inner_split = 0.7;
  std::uint64_t split_seed = 1, train_seed = 0;
  bool standardize = false;
  int rbar = 10;
  int width = 64, depth = 4, epochs = 0, batch = 0;
  double lr = 0.0;
  double lambda = 1e-2, tau = 1e-2, fanam_lambda = 0.0, lasso_lambda = 0.0;
  int n_sel = 10, restarts = 4, pcr_k = 0;
  bool has_epochs = false, has_batch = false, has_lr = false;
};

const std::vector<std::string>& fit_estimators() {
  static const std::vector<std::string> names = {
      "far-nn", "fast-nn", "fanam",  "nn-joint", "plain-nn",
      "lasso",  "pcr",     "min-l2", "farm-lite"};
  return names;
}

int cmd_fit(const FitOptions& o) {
  const CsvTable table = load_numeric_csv(o.data);
  const LabeledData d = split_response(table, o.response);
  const RowSplit rows =
      make_split(d.x.rows(), o.split, o.inner_split, o.split_seed);

  Eigen::MatrixXd x_tr = take_rows(d.x, rows.train);
  Eigen::MatrixXd x_va = take_rows(d.x, rows.valid);
  const Eigen::VectorXd y_tr = take_rows(d.y, rows.train);
  const Eigen::VectorXd y_va = take_rows(d.y, rows.valid);

  Standardizer standardizer;
  if (o.standardize) {
    standardizer = fit_standardizer(x_tr);
    x_tr = apply_standardizer(standardizer, x_tr);
    x_va = apply_standardizer(standardizer, x_va);
  }

  NetArch arch;
  arch.width = o.width;
  arch.depth = o.depth;
  TrainConfig cfg;
  cfg.seed = o.train_seed;
  const bool is_fast = o.estimator == "fast-nn";
  cfg.epochs = o.has_epochs ? o.epochs : (is_fast ? 200 : 100);
  cfg.batch_size = o.has_batch ? o.batch : (is_fast ? 128 : 64);
  cfg.lr = o.has_lr ? o.lr : (is_fast ? 1e-2 : 1e-3);

  const int rbar_eff = static_cast<int>(
      std::min<Eigen::Index>(o.rbar, std::min(x_tr.rows(), x_tr.cols())));
  const auto projection = [&] {
    return estimate_dpm_pca(x_tr, rbar_eff).w;
  };

  std::string body;
  double valid_mse = 0.0;
  const auto linear_valid = [&](const FittedLinear& fit) {
    return eval_mse(predict(fit, x_va), y_va);
  };

  if (o.estimator == "far-nn") {
    const FarNnModel m =
        fit_far_nn(x_tr, y_tr, x_va, y_va, projection(), arch, cfg);
    valid_mse = m.best_valid;
    body = model_to_json(m);
  } else if (o.estimator == "fast-nn") {
    const Eigen::MatrixXd w = projection();
    ClippedL1Config pen;
    pen.lambda = o.lambda;
    pen.tau = o.tau;
    FastNnModel best;
    for (int rep = 0; rep < std::max(1, o.restarts); ++rep) {
      TrainConfig rep_cfg = cfg;
      rep_cfg.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(rep)});
      FastNnModel m =
          fit_fast_nn(x_tr, y_tr, x_va, y_va, w, arch, pen, rep_cfg, o.n_sel);
      if (rep == 0 || m.best_valid < best.best_valid) best = std::move(m);
    }
    valid_mse = best.best_valid;
    body = model_to_json(best);
  } else if (o.estimator == "fanam") {
    const Eigen::MatrixXd w = projection();
    std::vector<double> grid = {0.001, 0.01, 0.05};
    if (o.fanam_lambda > 0.0) grid = {o.fanam_lambda};
    FanamModel best;
    bool first = true;
    for (double lam : grid) {
      FanamModel m = fit_fanam(x_tr, y_tr, x_va, y_va, w, arch, lam, cfg);
      const double mse = eval_mse(predict(m, x_va), y_va);
      if (first || mse < valid_mse) {
        valid_mse = mse;
        best = std::move(m);
        first = false;
      }
    }
    body = model_to_json(best);
  } else if (o.estimator == "nn-joint") {
    const JointNetModel m =
        fit_joint_net(x_tr, y_tr, x_va, y_va, projection(), arch, cfg);
    valid_mse = m.best_valid;
    body = model_to_json(m);
  } else if (o.estimator == "plain-nn") {
    const PlainNetModel m = fit_plain_net(x_tr, y_tr, x_va, y_va, arch, cfg);
    valid_mse = m.best_valid;
    body = model_to_json(m);
  } else if (o.estimator == "lasso") {
    std::vector<double> grid = {0.001, 0.003, 0.01, 0.03, 0.1};
    if (o.lasso_lambda > 0.0) grid = {o.lasso_lambda};
    FittedLinear best;
    bool first = true;
    for (double lam : grid) {
      FittedLinear fit = fit_lasso(x_tr, y_tr, lam);
      const double mse = linear_valid(fit);
      if (first || mse < valid_mse) {
        valid_mse = mse;
        best = std::move(fit);
        first = false;
      }
    }
    body = model_to_json(best);
  } else if (o.estimator == "pcr") {
    const int k = o.pcr_k > 0 ? o.pcr_k : rbar_eff;
    const FittedLinear fit = fit_pcr(x_tr, y_tr, k);
    valid_mse = linear_valid(fit);
    body = model_to_json(fit);
  } else if (o.estimator == "min-l2") {
    const FittedLinear fit = fit_min_l2(x_tr, y_tr);
    valid_mse = linear_valid(fit);
    body = model_to_json(fit);
  } else if (o.estimator == "farm-lite") {
    std::vector<double> grid = {0.001, 0.003, 0.01, 0.03, 0.1};
    if (o.lasso_lambda > 0.0) grid = {o.lasso_lambda};
    FittedLinear best;
    bool first = true;
    for (double lam : grid) {
      FittedLinear fit = fit_farm_lite(x_tr, y_tr, rbar_eff, lam);
      const double mse = linear_valid(fit);
      if (first || mse < valid_mse) {
        valid_mse = mse;
        best = std::move(fit);
        first = false;
      }
    }
    body = model_to_json(best);
  } else {
    throw std::invalid_argument("unknown estimator: " + o.estimator);
  }

  const std::string text = attach_data_card(
      body, d.covariates, o.response, o.standardize ? &standardizer : nullptr);
  const fs::path model_path(o.model);
  if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
  write_text_file(o.model, text);
  std::cout << "fit " << o.estimator << ": " << rows.train.size()
            << " train rows, " << rows.valid.size() << " validation rows\n"
            << "valid_mse = " << format_double(valid_mse) << "\n"
            << "wrote " << o.model << "\n";
  return 0;
}

struct PredictOptions {
  std::string model, data, out, response;
};

int cmd_predict(const PredictOptions& o) {
  const std::string model_text = read_text_file(o.model);
  LoadedModel m;
  try {
    m = model_from_json(model_text);
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw std::invalid_argument(e.what());
  }
  const DataCard card = read_data_card(model_text);
  const CsvTable table = load_numeric_csv(o.data);
  const Eigen::MatrixXd x = assemble_covariates(
      table, card, !o.response.empty() ? o.response : card.response);
  check_model_shape(m, x);
  const Eigen::VectorXd pred = predict(m, x);
  const std::string text = to_csv(with_column(table, "prediction", pred));
  if (o.out.empty()) {
    std::cout << text;
  } else {
    write_text_file(o.out, text);
    std::cout << "wrote " << o.out << " (" << pred.size() << " predictions)\n";
  }
  return 0;
}

struct EvalOptions {
  std::string model, data, response;
  double split = 0.6;
};

int cmd_eval(const EvalOptions& o) {
  const std::string model_text = read_text_file(o.model);
  LoadedModel m;
  try {
    m = model_from_json(model_text);
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw std::invalid_argument(e.what());
  }
  const DataCard card = read_data_card(model_text);
  const std::string response =
      !o.response.empty() ? o.response : card.response;
  if (response.empty())
    throw std::invalid_argument(
        "--response is required for a model without stored column names");

  const CsvTable table = load_numeric_csv(o.data);
  const Eigen::Index resp = column_index(table, response);
  const Eigen::MatrixXd x = assemble_covariates(table, card, response);
  check_model_shape(m, x);

  const Eigen::Index n = table.values.rows();
  if (!(o.split > 0.0) || o.split >= 1.0)
    throw std::invalid_argument("--split must lie in (0, 1) for eval");
  const auto n_in = static_cast<Eigen::Index>(
      std::llround(o.split * static_cast<double>(n)));
  if (n_in < 1 || n - n_in < 1)
    throw std::invalid_argument("split leaves no rows to evaluate");

  const double ybar = table.values.col(resp).head(n_in).mean();
  const Eigen::VectorXd y_test = table.values.col(resp).tail(n - n_in);
  const Eigen::MatrixXd x_test = x.bottomRows(n - n_in);
  const Eigen::VectorXd pred = predict(m, x_test);

  const double denom = (y_test.array() - ybar).matrix().squaredNorm();
  // a flat held-out response leaves nothing to explain
  const double r2 = denom > 0.0 ? eval_r2_oos(pred, y_test, ybar) : 0.0;
  std::cout << "test_rows = " << (n - n_in) << "\n"
            << "test_mse = " << format_double(eval_mse(pred, y_test)) << "\n"
            << "r2_oos = " << format_double(r2) << "\n";
  return 0;
}

// ------------------------------------------------------------------ dpm --

struct DpmOptions {
  std::string data, out, response;
  int rbar = 10;
};

int cmd_dpm(const DpmOptions& o) {
  const CsvTable table = load_numeric_csv(o.data);
  Eigen::MatrixXd x;
  if (!o.response.empty()) {
    x = split_response(table, o.response).x;
  } else {
    x = table.values;
  }
  const DiversifiedProjection dp = estimate_dpm_pca(x, o.rbar);
  CsvTable w;
  for (int j = 0; j < o.rbar; ++j) w.columns.push_back("w" + std::to_string(j + 1));
  w.values = dp.w;
  const std::string text = to_csv(w);
  if (o.out.empty()) {
    std::cout << text;
  } else {
    write_text_file(o.out, text);
    std::cout << "wrote " << o.out << " (" << dp.w.rows() << " x "
              << dp.w.cols() << ")\n";
  }
  return 0;
}

// -------------------------------------------------------- netbuild audit --

struct AuditOptions {
  std::string out, fault, grid = "default";
};

int cmd_netbuild_audit(const AuditOptions& o) {
  const AuditFault fault = o.fault == "multiply-depth"
                               ? AuditFault::multiply_depth
                               : AuditFault::none;
  std::vector<AuditRow> rows;
  if (o.grid != "empty") rows = netbuild_audit(fault);

  std::string csv =
      "construction,config,declared_depth,declared_width,"
      "declared_weight_bound,measured_depth,measured_width,"
      "measured_weight_bound,ok\n";
  int violations = 0;
  for (const AuditRow& row : rows) {
    csv += row.construction + "," + row.config + "," +
           std::to_string(row.declared_depth) + "," +
           std::to_string(row.declared_width) + "," +
           format_double(row.declared_weight_bound) + "," +
           std::to_string(row.actual_depth) + "," +
           std::to_string(row.actual_width) + "," +
           format_double(row.actual_weight_bound) + "," +
           (row.ok ? "true" : "false") + "\n";
    violations += row.ok ? 0 : 1;
  }
  if (o.out.empty()) {
    std::cout << csv;
  } else {
    write_text_file(o.out, csv);
    std::cout << "wrote " << o.out << " (" << rows.size() << " constructions, "
              << violations << " violations)\n";
  }
  if (violations > 0) {
    std::cerr << violations << " declared bound(s) violated\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"factor augmented sparse throughput regression toolkit"};
  app.set_version_flag("--version", "fastnn 0.1.0");
  app.require_subcommand(0, 1);

  // simulate ------------------------------------------------------------
  SimulateOptions sim;
  CLI::App* c_sim = app.add_subcommand(
      "simulate", "run a Monte Carlo benchmark and write results");
  c_sim->add_option("experiment", sim.experiment, "which benchmark to run")
      ->required()
      ->check(CLI::IsMember(
          {"exp1", "exp2", "exp3", "fast", "fanam", "null-case"}));
  c_sim->add_option("--config", sim.config_path,
                    "TOML run config (flags override it)");
  c_sim->add_option("--out", sim.out, "output directory");
  c_sim->add_option("--p", sim.p, "ambient dimension grid")->delimiter(',');
  c_sim->add_option("--n1", sim.n1, "unlabeled sample size grid")
      ->delimiter(',');
  c_sim->add_option("--estimators", sim.estimators, "estimator roster")
      ->delimiter(',');
  c_sim->add_option("--trials", sim.trials, "Monte Carlo repetitions");
  c_sim->add_option("--seed", sim.seed, "master seed");
  c_sim->add_option("--jobs", sim.jobs, "worker threads")
      ->check(CLI::Range(1, 1024));
  c_sim->add_flag("--paper-scale", sim.paper_scale,
                  "full-size grids, trials and network width");

  // fit -------------------------------------------------------------------
  FitOptions fit;
  CLI::App* c_fit =
      app.add_subcommand("fit", "train an estimator on a CSV dataset");
  c_fit->add_option("--data", fit.data, "headered numeric CSV")->required();
  c_fit->add_option("--response", fit.response, "response column name")
      ->required();
  c_fit->add_option("--estimator", fit.estimator, "estimator name")
      ->required()
      ->check(CLI::IsMember(fit_estimators()));
  c_fit->add_option("--model", fit.model, "output model JSON path")
      ->required();
  c_fit->add_option("--split", fit.split,
                    "leading fraction of rows used in-sample");
  c_fit->add_option("--inner-split", fit.inner_split,
                    "fraction of in-sample rows used for training");
  c_fit->add_option("--split-seed", fit.split_seed,
                    "seed for the random train/validation split");
  c_fit->add_option("--train-seed", fit.train_seed, "optimizer seed");
  c_fit->add_flag("--standardize", fit.standardize,
                  "z-score covariates using training rows");
  c_fit->add_option("--rbar", fit.rbar, "projection dimension");
  c_fit->add_option("--width", fit.width, "hidden layer width");
  c_fit->add_option("--depth", fit.depth, "hidden layer count");
  c_fit->add_option("--epochs", fit.epochs, "training epochs");
  c_fit->add_option("--batch", fit.batch, "minibatch size");
  c_fit->add_option("--lr", fit.lr, "Adam learning rate");
  c_fit->add_option("--lambda", fit.lambda, "clipped-l1 penalty weight");
  c_fit->add_option("--tau", fit.tau, "clipped-l1 threshold");
  c_fit->add_option("--n-sel", fit.n_sel, "selection channels");
  c_fit->add_option("--restarts", fit.restarts,
                    "refits keeping the best validation loss");
  c_fit->add_option("--fanam-lambda", fit.fanam_lambda,
                    "additive model l1 level (default: small grid)");
  c_fit->add_option("--lasso-lambda", fit.lasso_lambda,
                    "lasso/farm l1 level (default: small grid)");
  c_fit->add_option("--pcr-k", fit.pcr_k, "principal components (0 = rbar)");

  // predict / eval ---------------------------------------------------------
  PredictOptions pred;
  CLI::App* c_pred = app.add_subcommand(
      "predict", "append a prediction column to a CSV");
  c_pred->add_option("--model", pred.model, "model JSON from fit")->required();
  c_pred->add_option("--data", pred.data, "headered numeric CSV")->required();
  c_pred->add_option("--out", pred.out, "output CSV (default: stdout)");
  c_pred->add_option("--response", pred.response,
                     "response column to exclude");

  EvalOptions ev;
  CLI::App* c_eval = app.add_subcommand(
      "eval", "out-of-sample R^2 on the held-out tail of a CSV");
  c_eval->add_option("--model", ev.model, "model JSON from fit")->required();
  c_eval->add_option("--data", ev.data, "headered numeric CSV")->required();
  c_eval->add_option("--response", ev.response, "response column name");
  c_eval->add_option("--split", ev.split,
                     "leading fraction treated as training rows");

  // dpm ---------------------------------------------------------------------
  DpmOptions dpm;
  CLI::App* c_dpm = app.add_subcommand(
      "dpm", "estimate a diversified projection matrix from a CSV");
  c_dpm->add_option("--data", dpm.data, "headered numeric CSV")->required();
  c_dpm->add_option("--rbar", dpm.rbar, "number of projection directions");
  c_dpm->add_option("--out", dpm.out, "output CSV (default: stdout)");
  c_dpm->add_option("--response", dpm.response, "column to exclude");

  // netbuild-audit ----------------------------------------------------------
  AuditOptions audit;
  CLI::App* c_audit = app.add_subcommand(
      "netbuild-audit", "check constructive network size/weight contracts");
  c_audit->add_option("--out", audit.out, "output CSV (default: stdout)");
  c_audit->add_option("--inject-fault", audit.fault,
                      "deliberately misdeclare a bound")
      ->check(CLI::IsMember({"multiply-depth"}));
  c_audit->add_option("--grid", audit.grid, "construction grid")
      ->check(CLI::IsMember({"default", "empty"}));

  if (argc <= 1) {
    std::cout << app.help();
    return 0;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are config errors
  }

  try {
    sim.has_p = c_sim->count("--p") > 0;
    sim.has_n1 = c_sim->count("--n1") > 0;
    sim.has_estimators = c_sim->count("--estimators") > 0;
    sim.has_trials = c_sim->count("--trials") > 0;
    sim.has_seed = c_sim->count("--seed") > 0;
    fit.has_epochs = c_fit->count("--epochs") > 0;
    fit.has_batch = c_fit->count("--batch") > 0;
    fit.has_lr = c_fit->count("--lr") > 0;

    if (*c_sim) return cmd_simulate(sim);
    if (*c_fit) return cmd_fit(fit);
    if (*c_pred) return cmd_predict(pred);
    if (*c_eval) return cmd_eval(ev);
    if (*c_dpm) return cmd_dpm(dpm);
    if (*c_audit) return cmd_netbuild_audit(audit);
    std::cout << app.help();
    return 0;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
