#ifndef FASTNN_NETBUILD_HPP
#define FASTNN_NETBUILD_HPP

#include <string>
#include <vector>

#include "fastnn/relu_net.hpp"

namespace fastnn {

// A network produced by one of the constructive builders below, together
// with the size and weight budget the construction promises. The
// constructor throws if the realized network exceeds a declared bound.
struct BuiltNet {
  DenseReluNet net;
  std::string label;
  int declared_depth = 0;            // hidden layer count
  Eigen::Index declared_width = 0;   // max hidden layer width
  double declared_weight_bound = 0;  // max |entry| over all weights/biases

  Eigen::Index max_hidden_width() const;
};

BuiltNet make_built(DenseReluNet net, std::string label, int depth,
                    Eigen::Index width, double weight_bound);

// One-dimensional exact gadgets: identity and |x| (width 2), min and max of
// two inputs (width 4); depth 1, weights bounded by 1.
BuiltNet gadget_identity();
BuiltNet gadget_abs();
BuiltNet gadget_min2();
BuiltNet gadget_max2();

// Grows a net to the requested hidden depth and width without changing the
// function it computes: identity layers go in after the first hidden layer
// (post-ReLU activations are nonnegative, so sigma(Ix) = x there) and dead
// zero-weight units fill each hidden layer out to the target width.
BuiltNet pad(const BuiltNet& g, int depth, Eigen::Index width);

// Serial connection feeding f's output into g's input; the two boundary
// affine maps merge into one, so depth adds and the interface width
// disappears.
BuiltNet compose(const BuiltNet& f, const BuiltNet& g);

// Side-by-side stacking over a shared input vector. wiring[i] lists the
// input coordinates fed to nets[i]; outputs are concatenated in order.
BuiltNet parallelize(const std::vector<BuiltNet>& nets,
                     const std::vector<std::vector<Eigen::Index>>& wiring,
                     Eigen::Index input_dim);

// Depth-1 interpolant through (xs[i], ys[i]) with xs strictly increasing in
// [0, 1]; linear between knots, slope 0 left of xs[0], last slope continued
// to the right. Second-layer weights are slope differences, so the weight
// bound is twice the largest slope.
BuiltNet fit_piecewise_linear(const std::vector<double>& xs,
                              const std::vector<double>& ys);

// Depth-3 interpolant through n1*n2 points grouped in n1 blocks of n2
// consecutive points, all pairwise gaps >= delta, xs and ys inside [0, 1].
// Width vector (1, 2*n1-1, 4*(n2-2)+2, 8*(n2-2)+2, 1); weights bounded by
// 4/delta^2 with first and output layer weights bounded by 1.
BuiltNet fit_points_1d(const std::vector<double>& xs,
                       const std::vector<double>& ys, int n1, int n2,
                       double delta);

// Maps [0,1]^dim onto the lower-left corners of a grid of k^2 cells per
// axis, k = floor(resolution^(1/dim)): coordinate j of the output equals
// l_j/K exactly whenever l_j/K <= x_j <= (l_j+1)/K - gap (the gap is waived
// on the last cell). Depth 3, width <= 16*resolution*dim, weights <=
// 4/gap^2.
BuiltNet build_index_creator(int dim, int resolution, double gap);

// Exact median of three inputs; depth 2, width <= 14, weights <= 1.
BuiltNet build_mid();

// Approximate product of two numbers in [lo, hi]^2 with sup error at most
// 6*(hi-lo)^2*units^(-depth); depth hidden layers, width <= 9*units+1,
// weights <= 3*units^2*max((|lo|+|hi|)^2, 1).
BuiltNet build_multiply(int units, int depth, double lo, double hi);

// Pushes good behaviour of g on a grid-interior region out to the whole
// cube by taking coordinatewise medians of step-shifted copies: d rounds of
// mid(g(x - step*e_j), g(x), g(x + step*e_j)). Depth grows by 2 per round,
// width triples per round.
BuiltNet extend_by_mid(const BuiltNet& g, double step);

enum class AuditFault { none, multiply_depth };

struct AuditRow {
  std::string construction;
  std::string config;
  int declared_depth;
  Eigen::Index declared_width;
  double declared_weight_bound;
  int actual_depth;
  Eigen::Index actual_width;
  double actual_weight_bound;
  bool ok;
};

// Builds a fixed grid of constructions and reports declared versus measured
// size and weight statistics. The fault switch deliberately misdeclares the
// product net's depth so callers can verify violations are caught.
std::vector<AuditRow> netbuild_audit(AuditFault fault = AuditFault::none);

}  // namespace fastnn

#endif
