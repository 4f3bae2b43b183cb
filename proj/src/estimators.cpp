#include "fastnn/estimators.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include <json.hpp>

namespace fastnn {

double clipped_l1(double x, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("clipping threshold must be positive");
  return std::min(std::abs(x) / tau, 1.0);
}

double clipped_l1_subgrad(double x, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("clipping threshold must be positive");
  if (x == 0.0 || std::abs(x) >= tau) return 0.0;
  return x > 0.0 ? 1.0 / tau : -1.0 / tau;
}

double clipped_l1_sum(const Eigen::MatrixXd& theta, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("clipping threshold must be positive");
  return (theta.cwiseAbs() / tau).cwiseMin(1.0).sum();
}

ClippedL1Config theory_penalty(Eigen::Index n, Eigen::Index p, double c_lambda,
                               double c_tau) {
  if (n < 2 || p < 1) throw std::invalid_argument("need n >= 2 and p >= 1");
  ClippedL1Config c;
  c.lambda = c_lambda * std::log(static_cast<double>(p) * n) / n;
  c.tau = 1.0 / (c_tau * static_cast<double>(n) * static_cast<double>(p));
  return c;
}

std::vector<Eigen::Index> arch_widths(const NetArch& arch,
                                      Eigen::Index input_dim) {
  if (arch.depth < 1 || arch.width < 1)
    throw std::invalid_argument("architecture needs depth >= 1, width >= 1");
  std::vector<Eigen::Index> w;
  w.push_back(input_dim);
  for (int l = 0; l < arch.depth; ++l) w.push_back(arch.width);
  w.push_back(1);
  return w;
}

namespace {

void check_split(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                 const Eigen::MatrixXd& xv, const Eigen::VectorXd& yv) {
  if (x.rows() == 0 || xv.rows() == 0)
    throw std::invalid_argument("empty training or validation split");
  if (x.rows() != y.size() || xv.rows() != yv.size())
    throw std::invalid_argument("feature row count disagrees with labels");
  if (x.cols() != xv.cols())
    throw std::invalid_argument("train and validation dimensions differ");
}

// Columns of the result are the samples order[begin..end).
Eigen::MatrixXd gather_cols(const Eigen::MatrixXd& rows,
                            const std::vector<int>& order, std::size_t begin,
                            std::size_t end) {
  Eigen::MatrixXd out(rows.cols(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i)
    out.col(static_cast<Eigen::Index>(i - begin)) =
        rows.row(order[i]).transpose();
  return out;
}

Eigen::MatrixXd gather_labels(const Eigen::VectorXd& y,
                              const std::vector<int>& order, std::size_t begin,
                              std::size_t end) {
  Eigen::MatrixXd out(1, static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i)
    out(0, static_cast<Eigen::Index>(i - begin)) = y(order[i]);
  return out;
}

double mse_of(const DenseReluNet& net, const Eigen::MatrixXd& input_rows,
              const Eigen::VectorXd& y) {
  const Eigen::MatrixXd out = forward(net, Eigen::MatrixXd(input_rows.transpose()));
  return (out.row(0).transpose() - y).squaredNorm() /
         static_cast<double>(y.size());
}

std::vector<int> index_order(Eigen::Index n) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  return order;
}

}  // namespace

PlainNetModel fit_plain_net(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const Eigen::MatrixXd& xv,
                            const Eigen::VectorXd& yv, const NetArch& arch,
                            const TrainConfig& cfg) {
  check_split(x, y, xv, yv);
  if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  Rng rng(cfg.seed);
  DenseReluNet net =
      make_net(arch_widths(arch, x.cols()), rng.next_u64(), arch.truncation);
  NetAdam adam = make_net_adam(net);
  AdamParams hp;
  hp.lr = cfg.lr;

  PlainNetModel best;
  best.net = net;
  best.best_valid = mse_of(net, xv, yv);
  best.best_epoch = 0;
  best.dropout_used = cfg.input_dropout;
  best.cfg = cfg;

  std::vector<int> order = index_order(x.rows());
  const std::size_t n = order.size(), bs = static_cast<std::size_t>(cfg.batch_size);
  NetGrads grads;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t at = 0; at < n; at += bs) {
      const std::size_t stop = std::min(n, at + bs);
      Eigen::MatrixXd xb = gather_cols(x, order, at, stop);
      const Eigen::MatrixXd yb = gather_labels(y, order, at, stop);
      if (cfg.input_dropout > 0.0)
        input_dropout_inplace(xb, cfg.input_dropout, rng);
      backward_mse(net, xb, yb, grads);
      adam_step(net, adam, grads, hp);
      if (cfg.clamp_weights) clamp_weights(net, cfg.weight_bound);
    }
    const double v = mse_of(net, xv, yv);
    if (!cfg.early_stopping || v < best.best_valid) {
      best.net = net;
      best.best_valid = v;
      best.best_epoch = epoch;
    }
  }
  return best;
}

Eigen::VectorXd predict(const PlainNetModel& m, const Eigen::MatrixXd& x) {
  return forward(m.net, Eigen::MatrixXd(x.transpose())).row(0).transpose();
}

JointNetModel fit_joint_net(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const Eigen::MatrixXd& xv,
                            const Eigen::VectorXd& yv,
                            const Eigen::MatrixXd& w_init,
                            const NetArch& arch, const TrainConfig& cfg) {
  check_split(x, y, xv, yv);
  if (w_init.rows() != x.cols())
    throw std::invalid_argument("projection rows disagree with covariates");
  const Eigen::Index p = x.cols(), rbar = w_init.cols();
  Rng rng(cfg.seed);
  DenseReluNet net =
      make_net(arch_widths(arch, rbar), rng.next_u64(), arch.truncation);
  Eigen::MatrixXd proj = w_init.transpose() / static_cast<double>(p);
  NetAdam adam = make_net_adam(net);
  AdamBuf pbuf = make_adam_buf(rbar, p);
  AdamParams hp;
  hp.lr = cfg.lr;

  auto valid_mse = [&](const DenseReluNet& g, const Eigen::MatrixXd& pr) {
    const Eigen::MatrixXd out = forward(g, Eigen::MatrixXd(pr * xv.transpose()));
    return (out.row(0).transpose() - yv).squaredNorm() /
           static_cast<double>(yv.size());
  };

  JointNetModel best;
  best.proj = proj;
  best.net = net;
  best.best_valid = valid_mse(net, proj);
  best.best_epoch = 0;
  best.dropout_used = cfg.input_dropout;
  best.cfg = cfg;

  std::vector<int> order = index_order(x.rows());
  const std::size_t n = order.size(), bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t at = 0; at < n; at += bs) {
      const std::size_t stop = std::min(n, at + bs);
      Eigen::MatrixXd xb = gather_cols(x, order, at, stop);
      const Eigen::MatrixXd yb = gather_labels(y, order, at, stop);
      if (cfg.input_dropout > 0.0)
        input_dropout_inplace(xb, cfg.input_dropout, rng);
      const ForwardTrace trace = forward_trace(net, proj * xb);
      const Eigen::MatrixXd grad_out =
          2.0 / static_cast<double>(xb.cols()) * (trace.out - yb);
      Eigen::MatrixXd gin;
      const NetGrads grads = backward(net, trace, grad_out, &gin);
      const Eigen::MatrixXd dproj = gin * xb.transpose();
      adam_step(net, adam, grads, hp);
      adam_update(proj, pbuf, dproj, adam.step, hp);
      if (cfg.clamp_weights) {
        clamp_weights(net, cfg.weight_bound);
        proj = proj.cwiseMin(cfg.weight_bound).cwiseMax(-cfg.weight_bound);
      }
    }
    const double v = valid_mse(net, proj);
    if (!cfg.early_stopping || v < best.best_valid) {
      best.proj = proj;
      best.net = net;
      best.best_valid = v;
      best.best_epoch = epoch;
    }
  }
  return best;
}

Eigen::VectorXd predict(const JointNetModel& m, const Eigen::MatrixXd& x) {
  return forward(m.net, Eigen::MatrixXd(m.proj * x.transpose())).row(0).transpose();
}

FarNnModel fit_far_nn(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                      const Eigen::MatrixXd& xv, const Eigen::VectorXd& yv,
                      const Eigen::MatrixXd& w, const NetArch& arch,
                      const TrainConfig& cfg) {
  if (w.rows() != x.cols())
    throw std::invalid_argument("projection rows disagree with covariates");
  const PlainNetModel inner =
      fit_plain_net(surrogate_factors(w, x), y, surrogate_factors(w, xv), yv,
                    arch, cfg);
  FarNnModel m;
  m.w = w;
  m.net = inner.net;
  m.best_valid = inner.best_valid;
  m.best_epoch = inner.best_epoch;
  m.cfg = cfg;
  return m;
}

Eigen::VectorXd predict(const FarNnModel& m, const Eigen::MatrixXd& x) {
  return forward(m.net,
                 Eigen::MatrixXd(surrogate_factors(m.w, x).transpose()))
      .row(0)
      .transpose();
}

namespace {

Eigen::MatrixXd fast_trunk_input(const Eigen::MatrixXd& surrogate_rows,
                                 const Eigen::MatrixXd& x_rows,
                                 const Eigen::MatrixXd& theta, double level) {
  const Eigen::Index n = x_rows.rows();
  const Eigen::Index rbar = surrogate_rows.cols(), nsel = theta.cols();
  Eigen::MatrixXd z(rbar + nsel, n);
  z.topRows(rbar) = surrogate_rows.transpose();
  z.bottomRows(nsel) = truncate(Eigen::MatrixXd(x_rows * theta), level).transpose();
  return z;
}

}  // namespace

FastNnModel fit_fast_nn(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                        const Eigen::MatrixXd& xv, const Eigen::VectorXd& yv,
                        const Eigen::MatrixXd& w, const NetArch& arch,
                        const ClippedL1Config& penalty, const TrainConfig& cfg,
                        int n_sel) {
  check_split(x, y, xv, yv);
  if (w.rows() != x.cols())
    throw std::invalid_argument("projection rows disagree with covariates");
  if (n_sel < 1) throw std::invalid_argument("need at least one selection channel");
  if (penalty.tau <= 0.0 || penalty.lambda < 0.0)
    throw std::invalid_argument("penalty needs tau > 0 and lambda >= 0");

  const Eigen::Index p = x.cols(), rbar = w.cols();
  const Eigen::MatrixXd ft = surrogate_factors(w, x);
  const Eigen::MatrixXd fv = surrogate_factors(w, xv);
  const double level = arch.truncation;

  Rng rng(cfg.seed);
  Eigen::MatrixXd theta =
      uniform_matrix(rng, p, n_sel, -0.5 * penalty.tau, 0.5 * penalty.tau);
  DenseReluNet trunk = make_net(arch_widths(arch, rbar + n_sel),
                                rng.next_u64(), arch.truncation);
  NetAdam adam = make_net_adam(trunk);
  AdamBuf tbuf = make_adam_buf(p, n_sel);
  AdamParams hp;
  hp.lr = cfg.lr;

  auto valid_loss = [&](const DenseReluNet& g, const Eigen::MatrixXd& th) {
    const Eigen::MatrixXd out = forward(g, fast_trunk_input(fv, xv, th, level));
    return (out.row(0).transpose() - yv).squaredNorm() /
               static_cast<double>(yv.size()) +
           penalty.lambda * clipped_l1_sum(th, penalty.tau);
  };

  FastNnModel best;
  best.w = w;
  best.theta = theta;
  best.trunk = trunk;
  best.penalty = penalty;
  best.best_valid = valid_loss(trunk, theta);
  best.best_epoch = 0;
  best.cfg = cfg;

  std::vector<int> order = index_order(x.rows());
  const std::size_t n = order.size(), bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t at = 0; at < n; at += bs) {
      const std::size_t stop = std::min(n, at + bs);
      const Eigen::MatrixXd xb = gather_cols(x, order, at, stop);
      const Eigen::MatrixXd fb = gather_cols(ft, order, at, stop);
      const Eigen::MatrixXd yb = gather_labels(y, order, at, stop);
      const Eigen::Index b = xb.cols();

      const Eigen::MatrixXd sel_pre = theta.transpose() * xb;  // nsel x b
      Eigen::MatrixXd zin(rbar + n_sel, b);
      zin.topRows(rbar) = fb;
      zin.bottomRows(n_sel) = truncate(sel_pre, level);

      const ForwardTrace trace = forward_trace(trunk, zin);
      const Eigen::MatrixXd grad_out =
          2.0 / static_cast<double>(b) * (trace.out - yb);
      Eigen::MatrixXd gin;
      const NetGrads grads = backward(trunk, trace, grad_out, &gin);

      Eigen::MatrixXd gsel = gin.bottomRows(n_sel);
      // straight-through clip: no gradient where |theta^T x| reached the level
      gsel = (sel_pre.cwiseAbs().array() < level).select(gsel, 0.0);
      Eigen::MatrixXd dtheta = xb * gsel.transpose();  // p x nsel
      for (Eigen::Index c = 0; c < dtheta.cols(); ++c)
        for (Eigen::Index r = 0; r < dtheta.rows(); ++r)
          dtheta(r, c) +=
              penalty.lambda * clipped_l1_subgrad(theta(r, c), penalty.tau);

      adam_step(trunk, adam, grads, hp);
      adam_update(theta, tbuf, dtheta, adam.step, hp);
      if (cfg.clamp_weights) {
        clamp_weights(trunk, cfg.weight_bound);
        theta = theta.cwiseMin(cfg.weight_bound).cwiseMax(-cfg.weight_bound);
      }
    }
    const double v = valid_loss(trunk, theta);
    if (!cfg.early_stopping || v < best.best_valid) {
      best.theta = theta;
      best.trunk = trunk;
      best.best_valid = v;
      best.best_epoch = epoch;
    }
  }
  return best;
}

Eigen::VectorXd predict(const FastNnModel& m, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd zin = fast_trunk_input(
      surrogate_factors(m.w, x), x, m.theta, m.trunk.truncation);
  return forward(m.trunk, zin).row(0).transpose();
}

FanamModel fit_fanam(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     const Eigen::MatrixXd& xv, const Eigen::VectorXd& yv,
                     const Eigen::MatrixXd& w, const NetArch& arch,
                     double lambda, const TrainConfig& cfg) {
  check_split(x, y, xv, yv);
  if (w.rows() != x.cols())
    throw std::invalid_argument("projection rows disagree with covariates");
  if (lambda < 0.0) throw std::invalid_argument("negative penalty");

  const Eigen::Index p = x.cols(), rbar = w.cols();
  const Eigen::MatrixXd ft = surrogate_factors(w, x);
  const Eigen::MatrixXd fv = surrogate_factors(w, xv);

  Rng rng(cfg.seed);
  // Residualizers start at the least squares fit of each covariate on the
  // surrogate factors, so x_j - v_j^T f~ begins near the idiosyncratic part.
  Eigen::MatrixXd v =
      (ft.transpose() * ft).ldlt().solve(ft.transpose() * x).transpose();
  Eigen::MatrixXd beta = uniform_matrix(rng, p, 1, -0.05, 0.05);
  DenseReluNet g0 =
      make_net(arch_widths(arch, rbar), rng.next_u64(), arch.truncation);
  NetArch uni;
  uni.depth = arch.univariate_depth;
  uni.width = arch.univariate_width;
  uni.truncation = arch.truncation;
  std::vector<DenseReluNet> gj;
  for (Eigen::Index j = 0; j < p; ++j)
    gj.push_back(make_net(arch_widths(uni, 1), rng.next_u64(), arch.truncation));

  NetAdam adam0 = make_net_adam(g0);
  std::vector<NetAdam> adamj;
  for (Eigen::Index j = 0; j < p; ++j) adamj.push_back(make_net_adam(gj[j]));
  AdamBuf bbuf = make_adam_buf(p, 1);
  AdamBuf vbuf = make_adam_buf(p, rbar);
  AdamParams hp;
  hp.lr = cfg.lr;

  auto predict_cols = [&](const DenseReluNet& head,
                          const std::vector<DenseReluNet>& subs,
                          const Eigen::MatrixXd& bet,
                          const Eigen::MatrixXd& res,
                          const Eigen::MatrixXd& f_cols,
                          const Eigen::MatrixXd& x_cols) {
    Eigen::MatrixXd pred = forward(head, f_cols);
    const Eigen::MatrixXd z = x_cols - res * f_cols;
    for (Eigen::Index j = 0; j < p; ++j)
      pred += bet(j, 0) *
              forward(subs[static_cast<std::size_t>(j)], Eigen::MatrixXd(z.row(j)));
    return pred;
  };
  auto valid_loss = [&](const DenseReluNet& head,
                        const std::vector<DenseReluNet>& subs,
                        const Eigen::MatrixXd& bet, const Eigen::MatrixXd& res) {
    const Eigen::MatrixXd pred = predict_cols(head, subs, bet, res,
                                              fv.transpose(), xv.transpose());
    return (pred.row(0).transpose() - yv).squaredNorm() /
               static_cast<double>(yv.size()) +
           lambda * bet.cwiseAbs().sum();
  };

  FanamModel best;
  best.w = w;
  best.v = v;
  best.g0 = g0;
  best.gj = gj;
  best.beta = beta.col(0);
  best.lambda = lambda;
  best.best_valid = valid_loss(g0, gj, beta, v);
  best.best_epoch = 0;
  best.cfg = cfg;

  std::vector<int> order = index_order(x.rows());
  const std::size_t n = order.size(), bs = static_cast<std::size_t>(cfg.batch_size);
  std::vector<ForwardTrace> traces(static_cast<std::size_t>(p));
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t at = 0; at < n; at += bs) {
      const std::size_t stop = std::min(n, at + bs);
      const Eigen::MatrixXd xb = gather_cols(x, order, at, stop);
      const Eigen::MatrixXd fb = gather_cols(ft, order, at, stop);
      const Eigen::MatrixXd yb = gather_labels(y, order, at, stop);
      const Eigen::Index b = xb.cols();

      const Eigen::MatrixXd zb = xb - v * fb;  // p x b residual channels
      const ForwardTrace trace0 = forward_trace(g0, fb);
      Eigen::MatrixXd pred = trace0.out;
      for (Eigen::Index j = 0; j < p; ++j) {
        traces[static_cast<std::size_t>(j)] =
            forward_trace(gj[static_cast<std::size_t>(j)], zb.row(j));
        pred += beta(j, 0) * traces[static_cast<std::size_t>(j)].out;
      }
      const Eigen::MatrixXd grad_out = 2.0 / static_cast<double>(b) * (pred - yb);

      const NetGrads grads0 = backward(g0, trace0, grad_out);
      Eigen::MatrixXd dbeta(p, 1), dv(p, rbar);
      std::vector<NetGrads> gradsj(static_cast<std::size_t>(p));
      for (Eigen::Index j = 0; j < p; ++j) {
        const std::size_t js = static_cast<std::size_t>(j);
        Eigen::MatrixXd gz;
        gradsj[js] = backward(gj[js], traces[js],
                              Eigen::MatrixXd(beta(j, 0) * grad_out), &gz);
        double sign = 0.0;
        if (beta(j, 0) > 0.0) sign = 1.0;
        else if (beta(j, 0) < 0.0) sign = -1.0;
        dbeta(j, 0) =
            grad_out.cwiseProduct(traces[js].out).sum() + lambda * sign;
        dv.row(j) = -(gz * fb.transpose()).row(0);
      }

      adam_step(g0, adam0, grads0, hp);
      for (Eigen::Index j = 0; j < p; ++j)
        adam_step(gj[static_cast<std::size_t>(j)],
                  adamj[static_cast<std::size_t>(j)],
                  gradsj[static_cast<std::size_t>(j)], hp);
      adam_update(beta, bbuf, dbeta, adam0.step, hp);
      adam_update(v, vbuf, dv, adam0.step, hp);
      if (cfg.clamp_weights) {
        clamp_weights(g0, cfg.weight_bound);
        for (auto& sub : gj) clamp_weights(sub, cfg.weight_bound);
      }
    }
    const double loss = valid_loss(g0, gj, beta, v);
    if (!cfg.early_stopping || loss < best.best_valid) {
      best.v = v;
      best.g0 = g0;
      best.gj = gj;
      best.beta = beta.col(0);
      best.best_valid = loss;
      best.best_epoch = epoch;
    }
  }
  return best;
}

Eigen::VectorXd predict(const FanamModel& m, const Eigen::MatrixXd& x) {
  if (x.cols() != static_cast<Eigen::Index>(m.gj.size()))
    throw std::invalid_argument("covariate count disagrees with the model");
  const Eigen::MatrixXd f_cols = surrogate_factors(m.w, x).transpose();
  const Eigen::MatrixXd x_cols = x.transpose();
  Eigen::MatrixXd pred = forward(m.g0, f_cols);
  const Eigen::MatrixXd z = x_cols - m.v * f_cols;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    pred += m.beta(j) *
            forward(m.gj[static_cast<std::size_t>(j)], Eigen::MatrixXd(z.row(j)));
  return pred.row(0).transpose();
}

const std::vector<double>& dropout_grid() {
  static const std::vector<double> grid{0.0, 0.3, 0.5, 0.6, 0.7, 0.8, 0.9};
  return grid;
}

namespace {

Eigen::MatrixXd baseline_input(BaselineKind kind, const Dataset& d,
                               int n_idio) {
  switch (kind) {
    case BaselineKind::oracle: {
      if (d.f.size() == 0 || (n_idio > 0 && d.u.cols() < n_idio))
        throw std::invalid_argument("oracle input needs the latent truth");
      Eigen::MatrixXd in(d.f.rows(), d.f.cols() + n_idio);
      in.leftCols(d.f.cols()) = d.f;
      if (n_idio > 0) in.rightCols(n_idio) = d.u.leftCols(n_idio);
      return in;
    }
    case BaselineKind::oracle_factor:
      if (d.f.size() == 0)
        throw std::invalid_argument("oracle input needs the latent factors");
      return d.f;
    default:
      return d.x;
  }
}

}  // namespace

std::string baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::oracle: return "oracle-nn";
    case BaselineKind::oracle_factor: return "oracle-factor-nn";
    case BaselineKind::vanilla: return "vanilla-nn";
    case BaselineKind::nn_joint: return "nn-joint";
    case BaselineKind::dropout_vanilla: return "dropout-vanilla";
    case BaselineKind::dropout_joint: return "dropout-joint";
  }
  throw std::logic_error("unreachable");
}

BaselineFit fit_baseline_nn(BaselineKind kind, const Dataset& train,
                            const Dataset& valid, const Eigen::MatrixXd* w,
                            const NetArch& arch, const TrainConfig& cfg,
                            int n_idio) {
  BaselineFit fit;
  fit.kind = kind;
  switch (kind) {
    case BaselineKind::oracle:
    case BaselineKind::oracle_factor:
    case BaselineKind::vanilla: {
      fit.plain = fit_plain_net(baseline_input(kind, train, n_idio), train.y,
                                baseline_input(kind, valid, n_idio), valid.y,
                                arch, cfg);
      fit.plain.kind = baseline_name(kind);
      return fit;
    }
    case BaselineKind::dropout_vanilla: {
      bool have = false;
      for (double rho : dropout_grid()) {
        TrainConfig c = cfg;
        c.input_dropout = rho;
        PlainNetModel m =
            fit_plain_net(train.x, train.y, valid.x, valid.y, arch, c);
        if (!have || m.best_valid < fit.plain.best_valid) {
          fit.plain = m;
          have = true;
        }
      }
      fit.plain.kind = baseline_name(kind);
      return fit;
    }
    case BaselineKind::nn_joint: {
      if (w == nullptr)
        throw std::invalid_argument("joint baseline needs a projection");
      fit.is_joint = true;
      fit.joint =
          fit_joint_net(train.x, train.y, valid.x, valid.y, *w, arch, cfg);
      return fit;
    }
    case BaselineKind::dropout_joint: {
      if (w == nullptr)
        throw std::invalid_argument("joint baseline needs a projection");
      fit.is_joint = true;
      bool have = false;
      for (double rho : dropout_grid()) {
        TrainConfig c = cfg;
        c.input_dropout = rho;
        JointNetModel m =
            fit_joint_net(train.x, train.y, valid.x, valid.y, *w, arch, c);
        if (!have || m.best_valid < fit.joint.best_valid) {
          fit.joint = m;
          have = true;
        }
      }
      return fit;
    }
  }
  throw std::logic_error("unreachable");
}

Eigen::VectorXd predict_baseline(const BaselineFit& fit, const Dataset& data,
                                 int n_idio) {
  if (fit.is_joint) return predict(fit.joint, data.x);
  return predict(fit.plain, baseline_input(fit.kind, data, n_idio));
}

// ---------------------------------------------------------------------------
// JSON round trip

namespace {

using nlohmann::json;

json mat_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd json_mat(const json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw std::runtime_error("matrix payload size mismatch");
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[k++].get<double>();
  return m;
}

json vec_json(const Eigen::VectorXd& v) {
  json data = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) data.push_back(v(i));
  return data;
}

Eigen::VectorXd json_vec(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json finite_or_null(double x) {
  if (std::isfinite(x)) return json(x);
  return json(nullptr);
}

double null_or_inf(const json& j) {
  return j.is_null() ? kInf : j.get<double>();
}

json net_json(const DenseReluNet& net) {
  json layers_w = json::array(), layers_b = json::array();
  for (const auto& w : net.weights) layers_w.push_back(mat_json(w));
  for (const auto& b : net.biases) layers_b.push_back(vec_json(b));
  json widths = json::array();
  for (Eigen::Index d : net.widths()) widths.push_back(d);
  return json{{"widths", widths},
              {"truncation", finite_or_null(net.truncation)},
              {"weights", layers_w},
              {"biases", layers_b}};
}

DenseReluNet json_net(const json& j) {
  DenseReluNet net;
  net.truncation = null_or_inf(j.at("truncation"));
  for (const auto& w : j.at("weights")) net.weights.push_back(json_mat(w));
  for (const auto& b : j.at("biases")) net.biases.push_back(json_vec(b));
  if (net.weights.size() != net.biases.size() || net.weights.size() < 2)
    throw std::runtime_error("malformed network payload");
  return net;
}

json cfg_json(const TrainConfig& cfg) {
  return json{{"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"lr", cfg.lr},
              {"input_dropout", cfg.input_dropout},
              {"early_stopping", cfg.early_stopping},
              {"seed", cfg.seed},
              {"clamp_weights", cfg.clamp_weights},
              {"weight_bound", finite_or_null(cfg.weight_bound)}};
}

TrainConfig json_cfg(const json& j) {
  TrainConfig cfg;
  cfg.epochs = j.at("epochs").get<int>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.lr = j.at("lr").get<double>();
  cfg.input_dropout = j.at("input_dropout").get<double>();
  cfg.early_stopping = j.at("early_stopping").get<bool>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.clamp_weights = j.at("clamp_weights").get<bool>();
  cfg.weight_bound = null_or_inf(j.at("weight_bound"));
  return cfg;
}

json model_header(const std::string& estimator) {
  return json{{"schema", "fastnn-model/1"}, {"estimator", estimator}};
}

}  // namespace

std::string model_to_json(const FarNnModel& m) {
  json j = model_header("far-nn");
  j["w"] = mat_json(m.w);
  j["net"] = net_json(m.net);
  j["best_valid"] = m.best_valid;
  j["best_epoch"] = m.best_epoch;
  j["config"] = cfg_json(m.cfg);
  return j.dump(2);
}

std::string model_to_json(const FastNnModel& m) {
  json j = model_header("fast-nn");
  j["w"] = mat_json(m.w);
  j["theta"] = mat_json(m.theta);
  j["net"] = net_json(m.trunk);
  j["penalty"] = json{{"lambda", m.penalty.lambda}, {"tau", m.penalty.tau}};
  j["best_valid"] = m.best_valid;
  j["best_epoch"] = m.best_epoch;
  j["config"] = cfg_json(m.cfg);
  return j.dump(2);
}

std::string model_to_json(const FanamModel& m) {
  json j = model_header("fanam");
  j["w"] = mat_json(m.w);
  j["v"] = mat_json(m.v);
  j["net"] = net_json(m.g0);
  json subs = json::array();
  for (const auto& g : m.gj) subs.push_back(net_json(g));
  j["subnets"] = subs;
  j["beta"] = vec_json(m.beta);
  j["lambda"] = m.lambda;
  j["best_valid"] = m.best_valid;
  j["best_epoch"] = m.best_epoch;
  j["config"] = cfg_json(m.cfg);
  return j.dump(2);
}

std::string model_to_json(const JointNetModel& m) {
  json j = model_header("nn-joint");
  j["proj"] = mat_json(m.proj);
  j["net"] = net_json(m.net);
  j["dropout_used"] = m.dropout_used;
  j["best_valid"] = m.best_valid;
  j["best_epoch"] = m.best_epoch;
  j["config"] = cfg_json(m.cfg);
  return j.dump(2);
}

std::string model_to_json(const PlainNetModel& m) {
  json j = model_header("plain-nn");
  j["kind"] = m.kind;
  j["net"] = net_json(m.net);
  j["dropout_used"] = m.dropout_used;
  j["best_valid"] = m.best_valid;
  j["best_epoch"] = m.best_epoch;
  j["config"] = cfg_json(m.cfg);
  return j.dump(2);
}

std::string model_to_json(const FittedLinear& m) {
  json j = model_header(m.method);
  j["beta"] = vec_json(m.beta);
  j["intercept"] = m.intercept;
  j["converged"] = m.converged;
  return j.dump(2);
}

LoadedModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("model file is not valid JSON: ") +
                             e.what());
  }
  if (!j.contains("schema") || j.at("schema") != "fastnn-model/1")
    throw std::runtime_error("unrecognized model schema");
  LoadedModel m;
  m.estimator = j.at("estimator").get<std::string>();
  if (m.estimator == "far-nn") {
    m.far.w = json_mat(j.at("w"));
    m.far.net = json_net(j.at("net"));
    m.far.best_valid = j.at("best_valid").get<double>();
    m.far.best_epoch = j.at("best_epoch").get<int>();
    m.far.cfg = json_cfg(j.at("config"));
  } else if (m.estimator == "fast-nn") {
    m.fast.w = json_mat(j.at("w"));
    m.fast.theta = json_mat(j.at("theta"));
    m.fast.trunk = json_net(j.at("net"));
    m.fast.penalty.lambda = j.at("penalty").at("lambda").get<double>();
    m.fast.penalty.tau = j.at("penalty").at("tau").get<double>();
    m.fast.best_valid = j.at("best_valid").get<double>();
    m.fast.best_epoch = j.at("best_epoch").get<int>();
    m.fast.cfg = json_cfg(j.at("config"));
  } else if (m.estimator == "fanam") {
    m.fanam.w = json_mat(j.at("w"));
    m.fanam.v = json_mat(j.at("v"));
    m.fanam.g0 = json_net(j.at("net"));
    for (const auto& g : j.at("subnets")) m.fanam.gj.push_back(json_net(g));
    m.fanam.beta = json_vec(j.at("beta"));
    m.fanam.lambda = j.at("lambda").get<double>();
    m.fanam.best_valid = j.at("best_valid").get<double>();
    m.fanam.best_epoch = j.at("best_epoch").get<int>();
    m.fanam.cfg = json_cfg(j.at("config"));
  } else if (m.estimator == "nn-joint") {
    m.joint.proj = json_mat(j.at("proj"));
    m.joint.net = json_net(j.at("net"));
    m.joint.dropout_used = j.at("dropout_used").get<double>();
    m.joint.best_valid = j.at("best_valid").get<double>();
    m.joint.best_epoch = j.at("best_epoch").get<int>();
    m.joint.cfg = json_cfg(j.at("config"));
  } else if (m.estimator == "plain-nn") {
    m.plain.kind = j.at("kind").get<std::string>();
    m.plain.net = json_net(j.at("net"));
    m.plain.dropout_used = j.at("dropout_used").get<double>();
    m.plain.best_valid = j.at("best_valid").get<double>();
    m.plain.best_epoch = j.at("best_epoch").get<int>();
    m.plain.cfg = json_cfg(j.at("config"));
  } else if (m.estimator == "lasso" || m.estimator == "pcr" ||
             m.estimator == "min-l2" || m.estimator == "farm-lite") {
    m.linear.method = m.estimator;
    m.linear.beta = json_vec(j.at("beta"));
    m.linear.intercept = j.at("intercept").get<double>();
    m.linear.converged = j.at("converged").get<bool>();
  } else {
    throw std::runtime_error("unknown estimator tag: " + m.estimator);
  }
  return m;
}

Eigen::VectorXd predict(const LoadedModel& m, const Eigen::MatrixXd& x) {
  if (m.estimator == "far-nn") return predict(m.far, x);
  if (m.estimator == "fast-nn") return predict(m.fast, x);
  if (m.estimator == "fanam") return predict(m.fanam, x);
  if (m.estimator == "nn-joint") return predict(m.joint, x);
  if (m.estimator == "plain-nn") return predict(m.plain, x);
  return predict(m.linear, x);
}

}  // namespace fastnn
