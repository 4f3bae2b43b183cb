#include "fastnn/netbuild.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fastnn {

namespace {

constexpr double kBoundSlack = 1e-9;

void append_layer(DenseReluNet& net, Eigen::MatrixXd w, Eigen::VectorXd b) {
  net.weights.push_back(std::move(w));
  net.biases.push_back(std::move(b));
}

// Coefficients of the continuous piecewise-linear interpolant through
// (x_i, y_i) in the ramp basis relu(t - x_j), j < m-1:
//   g(t) = y_0 + sum_j w_j relu(t - x_j),  w_j = slope_j - slope_{j-1}.
struct RampFit {
  Eigen::VectorXd w;  // one per basis knot x_0 .. x_{m-2}
  double y0 = 0.0;
  double max_slope = 0.0;
};

RampFit ramp_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t m = xs.size();
  RampFit fit;
  fit.w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m) - 1);
  fit.y0 = ys[0];
  double prev_slope = 0.0;
  for (std::size_t j = 1; j < m; ++j) {
    const double slope = (ys[j] - ys[j - 1]) / (xs[j] - xs[j - 1]);
    fit.w(static_cast<Eigen::Index>(j) - 1) = slope - prev_slope;
    fit.max_slope = std::max(fit.max_slope, std::abs(slope));
    prev_slope = slope;
  }
  return fit;
}

}  // namespace

Eigen::Index BuiltNet::max_hidden_width() const {
  Eigen::Index w = 0;
  for (std::size_t l = 0; l + 1 < net.weights.size(); ++l)
    w = std::max(w, net.weights[l].rows());
  return w;
}

BuiltNet make_built(DenseReluNet net, std::string label, int depth,
                    Eigen::Index width, double weight_bound) {
  BuiltNet b{std::move(net), std::move(label), depth, width, weight_bound};
  if (b.net.hidden_layers() > depth)
    throw std::logic_error(b.label + ": depth exceeds declared bound");
  if (b.max_hidden_width() > width)
    throw std::logic_error(b.label + ": width exceeds declared bound");
  if (b.net.max_abs_weight() > weight_bound + kBoundSlack)
    throw std::logic_error(b.label + ": weight exceeds declared bound");
  const Eigen::Index in = b.net.input_dim(), out = b.net.output_dim();
  const Eigen::Index cap = width * (in + 1) + out * (width + 1) +
                           (depth > 1 ? (depth - 1) * width * (width + 1) : 0);
  if (b.net.param_count() > std::max(cap, (in + 1) * out))
    throw std::logic_error(b.label + ": parameter count exceeds shape bound");
  return b;
}

BuiltNet gadget_identity() {
  DenseReluNet net;
  Eigen::MatrixXd w1(2, 1);
  w1 << 1, -1;
  Eigen::MatrixXd w2(1, 2);
  w2 << 1, -1;
  append_layer(net, w1, Eigen::VectorXd::Zero(2));
  append_layer(net, w2, Eigen::VectorXd::Zero(1));
  return make_built(std::move(net), "identity", 1, 2, 1.0);
}

BuiltNet gadget_abs() {
  DenseReluNet net;
  Eigen::MatrixXd w1(2, 1);
  w1 << 1, -1;
  Eigen::MatrixXd w2(1, 2);
  w2 << 1, 1;
  append_layer(net, w1, Eigen::VectorXd::Zero(2));
  append_layer(net, w2, Eigen::VectorXd::Zero(1));
  return make_built(std::move(net), "abs", 1, 2, 1.0);
}

namespace {

BuiltNet minmax_gadget(bool take_min) {
  DenseReluNet net;
  Eigen::MatrixXd w1(4, 2);
  w1 << 1, 1, -1, -1, 1, -1, -1, 1;
  Eigen::MatrixXd w2(1, 4);
  if (take_min)
    w2 << 0.5, -0.5, -0.5, -0.5;
  else
    w2 << 0.5, -0.5, 0.5, 0.5;
  append_layer(net, w1, Eigen::VectorXd::Zero(4));
  append_layer(net, w2, Eigen::VectorXd::Zero(1));
  return make_built(std::move(net), take_min ? "min2" : "max2", 1, 4, 1.0);
}

}  // namespace

BuiltNet gadget_min2() { return minmax_gadget(true); }
BuiltNet gadget_max2() { return minmax_gadget(false); }

BuiltNet pad(const BuiltNet& g, int depth, Eigen::Index width) {
  const int cur_depth = g.net.hidden_layers();
  if (cur_depth < 1)
    throw std::invalid_argument("pad: net needs at least one hidden layer");
  if (depth < cur_depth || width < g.max_hidden_width())
    throw std::invalid_argument("pad: target shape smaller than the net");

  DenseReluNet net = g.net;
  // Dead units: widen every hidden layer with zero rows and columns.
  for (std::size_t l = 0; l + 1 < net.weights.size(); ++l) {
    const Eigen::Index rows = net.weights[l].rows();
    if (rows == width) continue;
    net.weights[l].conservativeResize(width, Eigen::NoChange);
    net.weights[l].bottomRows(width - rows).setZero();
    net.biases[l].conservativeResize(width);
    net.biases[l].tail(width - rows).setZero();
    const Eigen::Index cols = net.weights[l + 1].cols();
    net.weights[l + 1].conservativeResize(Eigen::NoChange, width);
    net.weights[l + 1].rightCols(width - cols).setZero();
  }
  // Identity layers after the first hidden layer keep the function intact.
  const int extra = depth - cur_depth;
  if (extra > 0) {
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(width, width);
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(width);
    net.weights.insert(net.weights.begin() + 1, extra, id);
    net.biases.insert(net.biases.begin() + 1, extra, zero);
  }
  return make_built(std::move(net), "pad(" + g.label + ")", depth, width,
                    std::max(g.declared_weight_bound, 1.0));
}

BuiltNet compose(const BuiltNet& f, const BuiltNet& g) {
  if (f.net.output_dim() != g.net.input_dim())
    throw std::invalid_argument("compose: interface dimensions differ");
  const Eigen::Index d2 = f.net.output_dim();

  DenseReluNet net;
  const std::size_t lf = f.net.weights.size();
  for (std::size_t l = 0; l + 1 < lf; ++l)
    append_layer(net, f.net.weights[l], f.net.biases[l]);
  append_layer(net, g.net.weights[0] * f.net.weights[lf - 1],
               g.net.weights[0] * f.net.biases[lf - 1] + g.net.biases[0]);
  for (std::size_t l = 1; l < g.net.weights.size(); ++l)
    append_layer(net, g.net.weights[l], g.net.biases[l]);

  auto affine_max = [](const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
    return std::max(w.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  };
  const double boundary =
      static_cast<double>(d2 + 1) *
      affine_max(g.net.weights[0], g.net.biases[0]) *
      std::max(affine_max(f.net.weights[lf - 1], f.net.biases[lf - 1]), 1.0);
  const double bound = std::max(
      {f.declared_weight_bound, g.declared_weight_bound, boundary});
  return make_built(std::move(net), "compose(" + f.label + ">" + g.label + ")",
                    f.net.hidden_layers() + g.net.hidden_layers(),
                    std::max(f.declared_width, g.declared_width), bound);
}

BuiltNet parallelize(const std::vector<BuiltNet>& nets,
                     const std::vector<std::vector<Eigen::Index>>& wiring,
                     Eigen::Index input_dim) {
  if (nets.empty() || nets.size() != wiring.size())
    throw std::invalid_argument("parallelize: nets/wiring mismatch");
  int depth = 0;
  for (const auto& n : nets) depth = std::max(depth, n.net.hidden_layers());

  std::vector<BuiltNet> padded;
  Eigen::Index width = 0;
  double bound = 0.0;
  for (std::size_t i = 0; i < nets.size(); ++i) {
    if (static_cast<Eigen::Index>(wiring[i].size()) != nets[i].net.input_dim())
      throw std::invalid_argument("parallelize: wiring arity mismatch");
    for (Eigen::Index c : wiring[i])
      if (c < 0 || c >= input_dim)
        throw std::invalid_argument("parallelize: wiring index out of range");
    padded.push_back(nets[i].net.hidden_layers() == depth
                         ? nets[i]
                         : pad(nets[i], depth, nets[i].max_hidden_width()));
    width += padded.back().declared_width;
    bound = std::max(bound, padded.back().declared_weight_bound);
  }

  DenseReluNet net;
  for (int l = 0; l <= depth; ++l) {
    Eigen::Index rows = 0, cols = 0;
    for (const auto& n : padded) {
      rows += n.net.weights[l].rows();
      cols += n.net.weights[l].cols();
    }
    if (l == 0) cols = input_dim;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(rows, cols);
    Eigen::VectorXd b(rows);
    Eigen::Index r0 = 0, c0 = 0;
    for (std::size_t i = 0; i < padded.size(); ++i) {
      const auto& wi = padded[i].net.weights[l];
      if (l == 0) {
        for (Eigen::Index c = 0; c < wi.cols(); ++c)
          w.block(r0, wiring[i][static_cast<std::size_t>(c)], wi.rows(), 1) +=
              wi.col(c);
      } else {
        w.block(r0, c0, wi.rows(), wi.cols()) = wi;
        c0 += wi.cols();
      }
      b.segment(r0, wi.rows()) = padded[i].net.biases[l];
      r0 += wi.rows();
    }
    append_layer(net, std::move(w), std::move(b));
  }
  return make_built(std::move(net), "parallel", depth, width,
                    std::max(bound, 1.0));
}

BuiltNet fit_piecewise_linear(const std::vector<double>& xs,
                              const std::vector<double>& ys) {
  if (xs.size() < 2 || xs.size() != ys.size())
    throw std::invalid_argument("interpolant needs >= 2 matched points");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] < 0.0 || xs[i] > 1.0)
      throw std::invalid_argument("knots must lie in [0, 1]");
    if (i > 0 && xs[i] <= xs[i - 1])
      throw std::invalid_argument("knots must be strictly increasing");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(xs.size()) - 1;
  RampFit fit = ramp_fit(xs, ys);

  DenseReluNet net;
  Eigen::MatrixXd w1 = Eigen::MatrixXd::Ones(n, 1);
  Eigen::VectorXd b1(n);
  for (Eigen::Index j = 0; j < n; ++j) b1(j) = -xs[static_cast<std::size_t>(j)];
  append_layer(net, std::move(w1), std::move(b1));
  append_layer(net, fit.w.transpose(), Eigen::VectorXd::Constant(1, fit.y0));

  const double bound =
      std::max({2.0 * fit.max_slope, 1.0, std::abs(fit.y0)});
  return make_built(std::move(net), "pl-interp", 1, n, bound);
}

BuiltNet fit_points_1d(const std::vector<double>& xs,
                       const std::vector<double>& ys, int n1, int n2,
                       double delta) {
  if (n1 < 2 || n2 < 2)
    throw std::invalid_argument("block counts must be at least 2");
  const std::size_t total = static_cast<std::size_t>(n1) * n2;
  if (xs.size() != total || ys.size() != total)
    throw std::invalid_argument("expected n1*n2 matched points");
  if (delta <= 0.0)
    throw std::invalid_argument("minimum gap must be positive");
  for (std::size_t i = 0; i < total; ++i) {
    if (xs[i] < 0.0 || xs[i] > 1.0 || ys[i] < 0.0 || ys[i] > 1.0)
      throw std::invalid_argument("points must lie in [0, 1]^2");
    if (i > 0 && xs[i] - xs[i - 1] < delta * (1.0 - 1e-12))
      throw std::invalid_argument("consecutive abscissae closer than the gap");
  }

  // Anchor set: first and last point of each block, in order.
  std::vector<std::size_t> anchor;
  for (int j = 0; j < n1; ++j) {
    anchor.push_back(static_cast<std::size_t>(j) * n2);
    anchor.push_back(static_cast<std::size_t>(j) * n2 + n2 - 1);
  }
  std::vector<double> ax(anchor.size());
  for (std::size_t t = 0; t < anchor.size(); ++t) ax[t] = xs[anchor[t]];
  const Eigen::Index basis = static_cast<Eigen::Index>(ax.size()) - 1;

  // Base interpolant through the anchors.
  std::vector<double> ay(anchor.size());
  for (std::size_t t = 0; t < anchor.size(); ++t) ay[t] = ys[anchor[t]];
  RampFit base = ramp_fit(ax, ay);
  auto base_eval = [&](double t) {
    double v = base.y0;
    for (Eigen::Index j = 0; j < basis; ++j)
      v += base.w(j) * std::max(t - ax[static_cast<std::size_t>(j)], 0.0);
    return v;
  };

  DenseReluNet net;
  Eigen::MatrixXd w1 = Eigen::MatrixXd::Ones(basis, 1);
  Eigen::VectorXd b1(basis);
  for (Eigen::Index j = 0; j < basis; ++j)
    b1(j) = -ax[static_cast<std::size_t>(j)];
  append_layer(net, std::move(w1), std::move(b1));

  // Layer 2: per interior offset k and sign, ramp fits through anchor values
  // chosen so that inside block j they extend the line vanishing at the
  // sample before (l) or after (u) the peak; plus the base carried as a pair.
  const int teeth = n2 - 2;
  const Eigen::Index w2_rows = 4 * teeth + 2;
  Eigen::MatrixXd w2 = Eigen::MatrixXd::Zero(w2_rows, basis);
  Eigen::VectorXd b2 = Eigen::VectorXd::Zero(w2_rows);
  Eigen::Index row = 0;
  for (int k = 1; k <= teeth; ++k) {
    for (int sign = 0; sign < 2; ++sign) {
      for (int side = 0; side < 2; ++side) {  // 0 = l (zero before), 1 = u
        std::vector<double> vy(anchor.size());
        for (int j = 0; j < n1; ++j) {
          const std::size_t peak = static_cast<std::size_t>(j) * n2 + k;
          const double c = ys[peak] - base_eval(xs[peak]);
          const double v = std::max(sign == 0 ? c : -c, 0.0);
          const double zero_x = side == 0 ? xs[peak - 1] : xs[peak + 1];
          const double slope = v / (xs[peak] - zero_x);
          vy[2 * static_cast<std::size_t>(j)] =
              slope * (ax[2 * static_cast<std::size_t>(j)] - zero_x);
          vy[2 * static_cast<std::size_t>(j) + 1] =
              slope * (ax[2 * static_cast<std::size_t>(j) + 1] - zero_x);
        }
        RampFit rf = ramp_fit(ax, vy);
        w2.row(row) = rf.w.transpose();
        b2(row) = rf.y0;
        ++row;
      }
    }
  }
  w2.row(row) = base.w.transpose();
  b2(row) = base.y0;
  w2.row(row + 1) = -base.w.transpose();
  b2(row + 1) = -base.y0;
  append_layer(net, std::move(w2), std::move(b2));

  // Layer 3: a min gadget per (k, sign) pair plus the carried base.
  const Eigen::Index w3_rows = 8 * teeth + 2;
  Eigen::MatrixXd w3 = Eigen::MatrixXd::Zero(w3_rows, w2_rows);
  Eigen::MatrixXd wout = Eigen::MatrixXd::Zero(1, w3_rows);
  for (int t = 0; t < 2 * teeth; ++t) {
    const Eigen::Index a = 2 * t, b = 2 * t + 1;  // l and u units
    const Eigen::Index r = 4 * t;
    w3(r, a) = 1;
    w3(r, b) = 1;
    w3(r + 1, a) = -1;
    w3(r + 1, b) = -1;
    w3(r + 2, a) = 1;
    w3(r + 2, b) = -1;
    w3(r + 3, a) = -1;
    w3(r + 3, b) = 1;
    const double s = t % 2 == 0 ? 0.5 : -0.5;  // even t carries the + sign
    wout(0, r) = s;
    wout(0, r + 1) = -s;
    wout(0, r + 2) = -s;
    wout(0, r + 3) = -s;
  }
  w3(8 * teeth, 4 * teeth) = 1;
  w3(8 * teeth, 4 * teeth + 1) = -1;
  w3(8 * teeth + 1, 4 * teeth) = -1;
  w3(8 * teeth + 1, 4 * teeth + 1) = 1;
  wout(0, 8 * teeth) = 1;
  wout(0, 8 * teeth + 1) = -1;
  append_layer(net, std::move(w3), Eigen::VectorXd::Zero(w3_rows));
  append_layer(net, std::move(wout), Eigen::VectorXd::Zero(1));

  const double bound = 4.0 / (delta * delta);
  std::ostringstream label;
  label << "grid-interp(" << n1 << "x" << n2 << ")";
  return make_built(std::move(net), label.str(), 3,
                    std::max<Eigen::Index>({basis, w2_rows, w3_rows}), bound);
}

BuiltNet build_index_creator(int dim, int resolution, double gap) {
  if (dim < 1) throw std::invalid_argument("dimension must be positive");
  int root = static_cast<int>(std::floor(
      std::pow(static_cast<double>(resolution), 1.0 / dim) + 1e-12));
  while (std::pow(root + 1, dim) <= resolution + 1e-9) ++root;
  while (root > 1 && std::pow(root, dim) > resolution + 1e-9) --root;
  if (root < 2)
    throw std::invalid_argument("resolution too small for this dimension");
  const int cells = root * root;
  if (gap <= 0.0 || gap > 1.0 / (3.0 * cells))
    throw std::invalid_argument("cell gap must lie in (0, 1/(3K)]");

  std::vector<double> xs, ys;
  for (int k = 0; k < cells; ++k) {
    const double lower = static_cast<double>(k) / cells;
    xs.push_back(lower);
    ys.push_back(lower);
    xs.push_back(static_cast<double>(k + 1) / cells -
                 (k + 1 < cells ? gap : 0.0));
    ys.push_back(lower);
  }
  BuiltNet step = fit_points_1d(xs, ys, root, 2 * root, gap);

  std::vector<BuiltNet> copies(static_cast<std::size_t>(dim), step);
  std::vector<std::vector<Eigen::Index>> wiring;
  for (int j = 0; j < dim; ++j) wiring.push_back({j});
  BuiltNet par = parallelize(copies, wiring, dim);

  std::ostringstream label;
  label << "cell-index(d=" << dim << ",K=" << cells << ")";
  return make_built(std::move(par.net), label.str(), 3,
                    static_cast<Eigen::Index>(16) * resolution * dim,
                    4.0 / (gap * gap));
}

BuiltNet build_mid() {
  DenseReluNet net;
  Eigen::MatrixXd w1(8, 3);
  // |x-y| pair, x+y pair, z pair, sum pair
  w1 << 1, -1, 0, -1, 1, 0, 1, 1, 0, -1, -1, 0, 0, 0, 1, 0, 0, -1, 1, 1, 1,
      -1, -1, -1;
  append_layer(net, w1, Eigen::VectorXd::Zero(8));

  Eigen::MatrixXd w2 = Eigen::MatrixXd::Zero(10, 8);
  auto set_pm = [&](Eigen::Index r, double hi_lo, double z_sign) {
    // rows for sigma(w +- z) with w in {wmax, wmin}:
    // wmax = (u1+u2+u3-u4)/2, wmin = (u3-u4-u1-u2)/2, z = u5-u6
    w2(r, 0) = 0.5 * hi_lo;
    w2(r, 1) = 0.5 * hi_lo;
    w2(r, 2) = 0.5;
    w2(r, 3) = -0.5;
    w2(r, 4) = z_sign;
    w2(r, 5) = -z_sign;
  };
  set_pm(0, 1.0, -1.0);   // wmax - z
  w2.row(1) = -w2.row(0);
  set_pm(2, 1.0, 1.0);    // wmax + z
  w2.row(3) = -w2.row(2);
  set_pm(4, -1.0, -1.0);  // wmin - z
  w2.row(5) = -w2.row(4);
  set_pm(6, -1.0, 1.0);   // wmin + z
  w2.row(7) = -w2.row(6);
  w2(8, 6) = 1;
  w2(8, 7) = -1;  // sum
  w2.row(9) = -w2.row(8);
  append_layer(net, w2, Eigen::VectorXd::Zero(10));

  // mid = sum - max(wmax, z) - min(wmin, z)
  Eigen::MatrixXd wout(1, 10);
  wout << -0.5, -0.5, -0.5, 0.5, 0.5, 0.5, -0.5, 0.5, 1, -1;
  append_layer(net, wout, Eigen::VectorXd::Zero(1));
  return make_built(std::move(net), "mid3", 2, 14, 1.0);
}

BuiltNet build_multiply(int units, int depth, double lo, double hi) {
  if (units < 1 || depth < 1)
    throw std::invalid_argument("size parameters must be positive");
  if (!(lo < hi)) throw std::invalid_argument("domain must satisfy lo < hi");
  const double span = hi - lo;
  const double bound =
      3.0 * units * units *
      std::max((std::abs(lo) + std::abs(hi)) * (std::abs(lo) + std::abs(hi)),
               1.0);
  std::ostringstream label;
  label << "product(N=" << units << ",L=" << depth << ")";

  if (units == 1) {
    // Tangent plane through the domain midpoint: error span^2/4. Realized
    // as one always-active unit, sigma(plane + shift) - shift.
    const double mx = 0.5 * (lo + hi);
    const double shift =
        2.0 * std::abs(mx) * std::max(std::abs(lo), std::abs(hi)) + mx * mx;
    DenseReluNet net;
    Eigen::MatrixXd w1(1, 2);
    w1 << mx, mx;
    Eigen::VectorXd b1 = Eigen::VectorXd::Constant(1, -mx * mx + shift);
    Eigen::MatrixXd w2 = Eigen::MatrixXd::Ones(1, 1);
    Eigen::VectorXd b2 = Eigen::VectorXd::Constant(1, -shift);
    append_layer(net, w1, b1);
    append_layer(net, w2, b2);
    BuiltNet flat = make_built(std::move(net), label.str(), 1, 1,
                               std::max(std::abs(mx * mx) + shift, 1.0));
    BuiltNet grown = depth == 1 ? std::move(flat) : pad(flat, depth, 1);
    return make_built(std::move(grown.net), label.str(), depth, 9, bound);
  }

  const int nb = 2 * units;  // shared ramp basis size per chain
  const double alpha = 1.0 / (2.0 * span);
  const double scarry = hi * hi - lo * lo;

  // Ramp-basis coefficients of the tent wave and of the dome interpolant.
  Eigen::VectorXd tent(nb), dome(nb);
  {
    double prev_t = 0.0, prev_d = 0.0;
    for (int k = 0; k < nb; ++k) {
      const double st = (k % 2 == 0 ? 1.0 : -1.0) * nb;
      const double b0 = (static_cast<double>(k) / nb) * (1.0 - static_cast<double>(k) / nb);
      const double b1v = (static_cast<double>(k + 1) / nb) *
                         (1.0 - static_cast<double>(k + 1) / nb);
      const double sd = (b1v - b0) * nb;
      tent(k) = st - prev_t;
      dome(k) = sd - prev_d;
      prev_t = st;
      prev_d = sd;
    }
  }

  DenseReluNet net;
  // Layer 1 on raw inputs: ramp bases of u and v plus the linear carry.
  {
    Eigen::MatrixXd w(2 * nb + 1, 2);
    Eigen::VectorXd b(2 * nb + 1);
    for (int k = 0; k < nb; ++k) {
      const double knot = static_cast<double>(k) / nb;
      w.row(k) << alpha, alpha;
      b(k) = -lo / span - knot;
      w.row(nb + k) << alpha, -alpha;
      b(nb + k) = 0.5 - knot;
    }
    const double s = std::abs(scarry);
    w.row(2 * nb) << s * alpha, s * alpha;
    b(2 * nb) = -s * lo / span;
    append_layer(net, std::move(w), std::move(b));
  }

  // Layers 2..depth: fresh ramp bases of the tent iterate plus chain
  // accumulators and the carried linear term.
  for (int layer = 2; layer <= depth; ++layer) {
    const Eigen::Index prev = net.weights.back().rows();
    const bool first_acc = layer == 2;
    const Eigen::Index rows = 2 * nb + 3;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(rows, prev);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
    const double inc = std::pow(static_cast<double>(nb),
                                -2.0 * (layer - 2));  // increment weight
    for (int k = 0; k < nb; ++k) {
      const double knot = static_cast<double>(k) / nb;
      w.row(k).segment(0, nb) = tent.transpose();
      b(k) = -knot;
      w.row(nb + k).segment(nb, nb) = tent.transpose();
      b(nb + k) = -knot;
    }
    w.row(2 * nb).segment(0, nb) = inc * dome.transpose();
    w.row(2 * nb + 1).segment(nb, nb) = inc * dome.transpose();
    if (!first_acc) {
      w(2 * nb, 2 * nb) = 1.0;
      w(2 * nb + 1, 2 * nb + 1) = 1.0;
    }
    w(2 * nb + 2, prev - 1) = 1.0;
    append_layer(net, std::move(w), std::move(b));
  }

  // Output: carry +- accumulated corrections + constant.
  {
    const Eigen::Index prev = net.weights.back().rows();
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(1, prev);
    const double inc =
        std::pow(static_cast<double>(nb), -2.0 * (depth - 1));
    const double s2 = span * span;
    if (depth == 1) {
      w.block(0, 0, 1, nb) = -s2 * inc * dome.transpose();
      w.block(0, nb, 1, nb) = s2 * inc * dome.transpose();
    } else {
      w.block(0, 0, 1, nb) = -s2 * inc * dome.transpose();
      w.block(0, nb, 1, nb) = s2 * inc * dome.transpose();
      w(0, 2 * nb) = -s2;
      w(0, 2 * nb + 1) = s2;
    }
    w(0, prev - 1) = scarry >= 0.0 ? 1.0 : -1.0;
    Eigen::VectorXd b(1);
    b << lo * lo - s2 / 4.0;
    append_layer(net, std::move(w), std::move(b));
  }
  return make_built(std::move(net), label.str(), depth,
                    9 * static_cast<Eigen::Index>(units) + 1, bound);
}

BuiltNet extend_by_mid(const BuiltNet& g, double step) {
  if (g.net.output_dim() != 1)
    throw std::invalid_argument("extension needs a scalar-valued net");
  if (step <= 0.0) throw std::invalid_argument("shift step must be positive");
  const Eigen::Index dim = g.net.input_dim();

  auto shifted = [&](const BuiltNet& base, Eigen::Index coord, double amount) {
    BuiltNet out = base;
    out.net.biases[0] += amount * out.net.weights[0].col(coord);
    out.declared_weight_bound =
        base.declared_weight_bound * (1.0 + std::abs(amount));
    return make_built(std::move(out.net), base.label, base.declared_depth,
                      base.declared_width, out.declared_weight_bound);
  };

  std::vector<Eigen::Index> all;
  for (Eigen::Index j = 0; j < dim; ++j) all.push_back(j);
  const BuiltNet mid = build_mid();

  BuiltNet cur = g;
  for (Eigen::Index j = 0; j < dim; ++j) {
    std::vector<BuiltNet> copies{shifted(cur, j, -step), cur,
                                 shifted(cur, j, step)};
    BuiltNet par = parallelize(copies, {all, all, all}, dim);
    cur = compose(par, mid);
  }
  return make_built(std::move(cur.net), "mid-extension(" + g.label + ")",
                    g.net.hidden_layers() + 2 * static_cast<int>(dim),
                    cur.declared_width, cur.declared_weight_bound);
}

std::vector<AuditRow> netbuild_audit(AuditFault fault) {
  std::vector<std::pair<std::string, BuiltNet>> entries;
  entries.emplace_back("gadget", gadget_identity());
  entries.emplace_back("gadget", gadget_abs());
  entries.emplace_back("gadget", gadget_min2());
  entries.emplace_back("gadget", gadget_max2());
  entries.emplace_back("mid", build_mid());
  entries.emplace_back("pl-interp",
                       fit_piecewise_linear({0.0, 0.25, 0.5, 0.75, 1.0},
                                            {0.0, 1.0, 0.25, 0.75, 0.5}));
  {
    std::vector<double> xs, ys;
    for (int i = 0; i < 16; ++i) {
      xs.push_back(0.06 * i + 0.02);
      ys.push_back(0.5 + 0.45 * std::sin(2.1 * i));
    }
    entries.emplace_back("grid-interp", fit_points_1d(xs, ys, 4, 4, 0.05));
  }
  entries.emplace_back("cell-index", build_index_creator(1, 2, 1.0 / 24));
  entries.emplace_back("cell-index", build_index_creator(2, 4, 1.0 / 24));
  entries.emplace_back("product", build_multiply(4, 3, -1.0, 1.0));
  entries.emplace_back("product", build_multiply(2, 1, -1.0, 1.0));
  entries.emplace_back("product", build_multiply(1, 2, 0.0, 1.0));
  entries.emplace_back(
      "mid-extension",
      extend_by_mid(fit_piecewise_linear({0.0, 0.3, 0.42, 0.7, 1.0},
                                         {0.0, 0.0, 1.0, 1.0, 1.0}),
                    0.1));

  std::vector<AuditRow> rows;
  for (auto& [kind, built] : entries) {
    AuditRow r;
    r.construction = kind;
    r.config = built.label;
    r.declared_depth = built.declared_depth;
    r.declared_width = built.declared_width;
    r.declared_weight_bound = built.declared_weight_bound;
    if (fault == AuditFault::multiply_depth &&
        built.label == "product(N=4,L=3)")
      r.declared_depth -= 1;
    r.actual_depth = built.net.hidden_layers();
    r.actual_width = built.max_hidden_width();
    r.actual_weight_bound = built.net.max_abs_weight();
    r.ok = r.actual_depth <= r.declared_depth &&
           r.actual_width <= r.declared_width &&
           r.actual_weight_bound <= r.declared_weight_bound + kBoundSlack;
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace fastnn
