#ifndef FASTNN_RELU_NET_HPP
#define FASTNN_RELU_NET_HPP

#include <limits>
#include <vector>

#include <Eigen/Core>

#include "fastnn/rng.hpp"

namespace fastnn {

constexpr double kInf = std::numeric_limits<double>::infinity();

// sign(z) * min(|z|, level), entrywise in the matrix overload
double truncate(double z, double level);
Eigen::MatrixXd truncate(const Eigen::MatrixXd& z, double level);

// Fully connected feed-forward net with ReLU hidden activations and an
// affine output layer whose value is clipped to [-truncation, truncation].
// weights[l] has shape d_{l+1} x d_l; hidden layer count L = weights.size()-1.
struct DenseReluNet {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  double truncation = kInf;

  int hidden_layers() const { return static_cast<int>(weights.size()) - 1; }
  Eigen::Index input_dim() const { return weights.front().cols(); }
  Eigen::Index output_dim() const { return weights.back().rows(); }
  std::vector<Eigen::Index> widths() const;
  Eigen::Index param_count() const;
  double max_abs_weight() const;
};

// widths = (d_in, hidden..., d_out); weights Unif[-sqrt(6/fan_in),
// sqrt(6/fan_in)], biases zero
DenseReluNet make_net(const std::vector<Eigen::Index>& widths,
                      std::uint64_t seed, double truncation = kInf);

// Columns of x are samples.
Eigen::MatrixXd forward(const DenseReluNet& net, const Eigen::MatrixXd& x);
Eigen::VectorXd forward(const DenseReluNet& net, const Eigen::VectorXd& x);
double forward_scalar(const DenseReluNet& net, const Eigen::VectorXd& x);

struct ForwardTrace {
  std::vector<Eigen::MatrixXd> acts;  // acts[0] = input, acts[l] = ReLU output
  Eigen::MatrixXd out_pre;            // affine output before clipping
  Eigen::MatrixXd out;
};

ForwardTrace forward_trace(const DenseReluNet& net, const Eigen::MatrixXd& x);

struct NetGrads {
  std::vector<Eigen::MatrixXd> dweights;
  std::vector<Eigen::VectorXd> dbiases;
};

// Reverse pass from d(loss)/d(clipped output). The clip passes gradients
// unchanged strictly inside (-truncation, truncation) and blocks them
// outside; ReLU passes only strictly positive pre-activations. When
// grad_input is non-null it receives d(loss)/d(input).
NetGrads backward(const DenseReluNet& net, const ForwardTrace& trace,
                  const Eigen::MatrixXd& grad_out,
                  Eigen::MatrixXd* grad_input = nullptr);

// Mean squared error over the batch: |out - y|_F^2 / n. Returns the loss and
// fills grads.
double backward_mse(const DenseReluNet& net, const Eigen::MatrixXd& x,
                    const Eigen::MatrixXd& y, NetGrads& grads,
                    Eigen::MatrixXd* grad_input = nullptr);

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment buffers for one tensor; step counting is the caller's.
struct AdamBuf {
  Eigen::MatrixXd m, v;
};

AdamBuf make_adam_buf(Eigen::Index rows, Eigen::Index cols);
void adam_update(Eigen::Ref<Eigen::MatrixXd> param, AdamBuf& buf,
                 const Eigen::MatrixXd& grad, long step,
                 const AdamParams& hp);

// Buffers for every weight/bias tensor of a net, plus the shared step count.
struct NetAdam {
  std::vector<AdamBuf> wbuf, bbuf;
  long step = 0;
};

NetAdam make_net_adam(const DenseReluNet& net);
void adam_step(DenseReluNet& net, NetAdam& state, const NetGrads& grads,
               const AdamParams& hp);

// Entrywise projection of all weights and biases onto [-bound, bound].
void clamp_weights(DenseReluNet& net, double bound);

// Zeroes each entry with probability rho and scales survivors by 1/(1-rho);
// rho = 0 leaves x untouched. Training-time only.
void input_dropout_inplace(Eigen::MatrixXd& x, double rho, Rng& rng);

}  // namespace fastnn

#endif
