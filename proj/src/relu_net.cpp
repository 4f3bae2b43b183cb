#include "fastnn/relu_net.hpp"

#include <cmath>
#include <stdexcept>

namespace fastnn {

double truncate(double z, double level) {
  if (std::abs(z) <= level) return z;
  return z > 0 ? level : -level;
}

Eigen::MatrixXd truncate(const Eigen::MatrixXd& z, double level) {
  return z.array().min(level).max(-level).matrix();
}

std::vector<Eigen::Index> DenseReluNet::widths() const {
  std::vector<Eigen::Index> w;
  w.push_back(weights.front().cols());
  for (const auto& m : weights) w.push_back(m.rows());
  return w;
}

Eigen::Index DenseReluNet::param_count() const {
  Eigen::Index n = 0;
  for (const auto& m : weights) n += m.size();
  for (const auto& v : biases) n += v.size();
  return n;
}

double DenseReluNet::max_abs_weight() const {
  double m = 0.0;
  for (const auto& w : weights) m = std::max(m, w.cwiseAbs().maxCoeff());
  for (const auto& b : biases)
    if (b.size() > 0) m = std::max(m, b.cwiseAbs().maxCoeff());
  return m;
}

DenseReluNet make_net(const std::vector<Eigen::Index>& widths,
                      std::uint64_t seed, double truncation) {
  if (widths.size() < 2) throw std::invalid_argument("net needs >= 2 widths");
  for (Eigen::Index w : widths)
    if (w < 1) throw std::invalid_argument("net widths must be positive");
  Rng rng(seed);
  DenseReluNet net;
  net.truncation = truncation;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    double bound = std::sqrt(6.0 / static_cast<double>(widths[l]));
    net.weights.push_back(
        uniform_matrix(rng, widths[l + 1], widths[l], -bound, bound));
    net.biases.push_back(Eigen::VectorXd::Zero(widths[l + 1]));
  }
  return net;
}

Eigen::MatrixXd forward(const DenseReluNet& net, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a = x;
  const std::size_t last = net.weights.size() - 1;
  for (std::size_t l = 0; l < last; ++l) {
    a = (((net.weights[l] * a).colwise() + net.biases[l]).array().max(0.0))
            .matrix();
  }
  Eigen::MatrixXd out = (net.weights[last] * a).colwise() + net.biases[last];
  if (std::isfinite(net.truncation)) out = truncate(out, net.truncation);
  return out;
}

Eigen::VectorXd forward(const DenseReluNet& net, const Eigen::VectorXd& x) {
  return forward(net, Eigen::MatrixXd(x)).col(0);
}

double forward_scalar(const DenseReluNet& net, const Eigen::VectorXd& x) {
  return forward(net, Eigen::MatrixXd(x))(0, 0);
}

ForwardTrace forward_trace(const DenseReluNet& net, const Eigen::MatrixXd& x) {
  ForwardTrace t;
  t.acts.reserve(net.weights.size());
  t.acts.push_back(x);
  const std::size_t last = net.weights.size() - 1;
  for (std::size_t l = 0; l < last; ++l) {
    t.acts.push_back(
        (((net.weights[l] * t.acts[l]).colwise() + net.biases[l])
             .array()
             .max(0.0))
            .matrix());
  }
  t.out_pre = (net.weights[last] * t.acts[last]).colwise() + net.biases[last];
  t.out = std::isfinite(net.truncation) ? truncate(t.out_pre, net.truncation)
                                        : t.out_pre;
  return t;
}

NetGrads backward(const DenseReluNet& net, const ForwardTrace& trace,
                  const Eigen::MatrixXd& grad_out,
                  Eigen::MatrixXd* grad_input) {
  const std::size_t layers = net.weights.size();
  NetGrads g;
  g.dweights.resize(layers);
  g.dbiases.resize(layers);

  Eigen::MatrixXd delta = grad_out;
  if (std::isfinite(net.truncation)) {
    delta.array() *=
        (trace.out_pre.array().abs() < net.truncation).cast<double>();
  }
  for (std::size_t l = layers; l-- > 0;) {
    g.dweights[l] = delta * trace.acts[l].transpose();
    g.dbiases[l] = delta.rowwise().sum();
    if (l > 0) {
      delta = (net.weights[l].transpose() * delta).array() *
              (trace.acts[l].array() > 0.0).cast<double>();
    } else if (grad_input != nullptr) {
      *grad_input = net.weights[0].transpose() * delta;
    }
  }
  return g;
}

double backward_mse(const DenseReluNet& net, const Eigen::MatrixXd& x,
                    const Eigen::MatrixXd& y, NetGrads& grads,
                    Eigen::MatrixXd* grad_input) {
  if (y.cols() != x.cols()) throw std::invalid_argument("batch size mismatch");
  ForwardTrace trace = forward_trace(net, x);
  const double n = static_cast<double>(x.cols());
  Eigen::MatrixXd resid = trace.out - y;
  grads = backward(net, trace, Eigen::MatrixXd(2.0 / n * resid), grad_input);
  return resid.squaredNorm() / n;
}

AdamBuf make_adam_buf(Eigen::Index rows, Eigen::Index cols) {
  return AdamBuf{Eigen::MatrixXd::Zero(rows, cols),
                 Eigen::MatrixXd::Zero(rows, cols)};
}

void adam_update(Eigen::Ref<Eigen::MatrixXd> param, AdamBuf& buf,
                 const Eigen::MatrixXd& grad, long step,
                 const AdamParams& hp) {
  buf.m = hp.beta1 * buf.m + (1.0 - hp.beta1) * grad;
  buf.v = hp.beta2 * buf.v.array().matrix() +
          (1.0 - hp.beta2) * grad.array().square().matrix();
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(step));
  param.array() -=
      hp.lr * (buf.m.array() / c1) / ((buf.v.array() / c2).sqrt() + hp.eps);
}

NetAdam make_net_adam(const DenseReluNet& net) {
  NetAdam s;
  for (const auto& w : net.weights)
    s.wbuf.push_back(make_adam_buf(w.rows(), w.cols()));
  for (const auto& b : net.biases)
    s.bbuf.push_back(make_adam_buf(b.rows(), 1));
  return s;
}

void adam_step(DenseReluNet& net, NetAdam& state, const NetGrads& grads,
               const AdamParams& hp) {
  ++state.step;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    adam_update(net.weights[l], state.wbuf[l], grads.dweights[l], state.step,
                hp);
    adam_update(net.biases[l], state.bbuf[l], grads.dbiases[l], state.step,
                hp);
  }
}

void clamp_weights(DenseReluNet& net, double bound) {
  for (auto& w : net.weights)
    w = w.array().min(bound).max(-bound).matrix();
  for (auto& b : net.biases)
    b = b.array().min(bound).max(-bound).matrix();
}

void input_dropout_inplace(Eigen::MatrixXd& x, double rho, Rng& rng) {
  if (rho == 0.0) return;
  if (rho < 0.0 || rho >= 1.0)
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  const double scale = 1.0 / (1.0 - rho);
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      x(i, j) = rng.uniform() < rho ? 0.0 : x(i, j) * scale;
}

}  // namespace fastnn
