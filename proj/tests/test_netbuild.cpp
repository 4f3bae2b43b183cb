#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fastnn/netbuild.hpp"
#include "oracles.hpp"

using namespace fastnn;

namespace {

double eval1(const BuiltNet& b, double x) {
  Eigen::VectorXd v(1);
  v << x;
  return forward_scalar(b.net, v);
}

double eval2(const BuiltNet& b, double x, double y) {
  Eigen::VectorXd v(2);
  v << x, y;
  return forward_scalar(b.net, v);
}

// random interpolation instance with all gaps >= delta
void random_grid_points(Rng& rng, int count, double delta,
                        std::vector<double>& xs, std::vector<double>& ys) {
  xs.clear();
  ys.clear();
  const double stride = 1.0 / (count + 0.5);
  const double jitter = stride - delta;
  REQUIRE(jitter >= 0.0);
  for (int i = 0; i < count; ++i) {
    xs.push_back(i * stride + rng.uniform(0.0, jitter));
    ys.push_back(rng.uniform(0.0, 1.0));
  }
}

}  // namespace

TEST_CASE("gadgets compute identity, abs, min, max exactly") {
  BuiltNet id = gadget_identity(), ab = gadget_abs();
  BuiltNet mn = gadget_min2(), mx = gadget_max2();
  CHECK(id.net.hidden_layers() == 1);
  CHECK(id.max_hidden_width() == 2);
  CHECK(mn.max_hidden_width() == 4);
  CHECK(mn.net.max_abs_weight() <= 1.0);
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    double x = rng.uniform(-3.0, 3.0), y = rng.uniform(-3.0, 3.0);
    CHECK(eval1(id, x) == doctest::Approx(x).epsilon(1e-14));
    CHECK(eval1(ab, x) == doctest::Approx(std::abs(x)).epsilon(1e-14));
    CHECK(eval2(mn, x, y) == doctest::Approx(std::min(x, y)).epsilon(1e-14));
    CHECK(eval2(mx, x, y) == doctest::Approx(std::max(x, y)).epsilon(1e-14));
  }
}

TEST_CASE("pad preserves the function while growing the shape") {
  BuiltNet g = fit_piecewise_linear({0.0, 0.3, 0.6, 1.0},
                                    {0.1, 0.9, 0.2, 0.7});
  BuiltNet p = pad(g, g.net.hidden_layers() + 2, g.max_hidden_width() + 3);
  CHECK(p.net.hidden_layers() == g.net.hidden_layers() + 2);
  CHECK(p.max_hidden_width() == g.max_hidden_width() + 3);
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    double x = rng.uniform(-0.5, 1.5);
    CHECK(std::abs(eval1(p, x) - eval1(g, x)) < 1e-10);
  }
  CHECK_THROWS_AS(pad(g, 0, 10), std::invalid_argument);
  CHECK_THROWS_AS(pad(g, 5, 1), std::invalid_argument);
}

TEST_CASE("compose merges the boundary affines") {
  BuiltNet f = fit_piecewise_linear({0.0, 0.5, 1.0}, {0.0, 1.0, 0.0});
  BuiltNet g = gadget_abs();
  BuiltNet fg = compose(f, g);
  CHECK(fg.net.hidden_layers() ==
        f.net.hidden_layers() + g.net.hidden_layers());
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    double x = rng.uniform(-0.5, 1.5);
    double want = std::abs(eval1(f, x));
    CHECK(std::abs(eval1(fg, x) - want) < 1e-10);
  }
  CHECK_THROWS_AS(compose(f, gadget_min2()), std::invalid_argument);
}

TEST_CASE("parallelize stacks nets over a shared input") {
  BuiltNet tent = fit_piecewise_linear({0.0, 0.5, 1.0}, {0.0, 1.0, 0.0});
  BuiltNet deep = pad(tent, 3, 4);  // forces depth alignment inside
  BuiltNet par = parallelize({tent, deep, gadget_min2()},
                             {{1}, {0}, {0, 1}}, 2);
  CHECK(par.net.input_dim() == 2);
  CHECK(par.net.output_dim() == 3);
  CHECK(par.net.hidden_layers() == 3);
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd v(2);
    v << rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0);
    Eigen::VectorXd out = forward(par.net, v);
    CHECK(std::abs(out(0) - eval1(tent, v(1))) < 1e-12);
    CHECK(std::abs(out(1) - eval1(tent, v(0))) < 1e-12);
    CHECK(std::abs(out(2) - std::min(v(0), v(1))) < 1e-12);
  }
  CHECK_THROWS_AS(parallelize({tent}, {{3}}, 2), std::invalid_argument);
  CHECK_THROWS_AS(parallelize({tent}, {{0, 1}}, 2), std::invalid_argument);
}

TEST_CASE("piecewise-linear interpolant: knots exact, segments straight") {
  BuiltNet hat = fit_piecewise_linear({0.0, 0.5, 1.0}, {0.0, 1.0, 0.0});
  CHECK(eval1(hat, 0.25) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(eval1(hat, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(eval1(hat, -1.0) == doctest::Approx(0.0));  // flat left of the knots
  CHECK(eval1(hat, 1.25) == doctest::Approx(-0.5)); // last slope continues

  Rng rng(21);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 2 + static_cast<int>(rng.uniform_index(9));
    std::vector<double> xs, ys;
    random_grid_points(rng, n + 1, 0.02, xs, ys);
    BuiltNet g = fit_piecewise_linear(xs, ys);
    CHECK(g.net.hidden_layers() == 1);
    CHECK(g.max_hidden_width() == n);
    double max_slope = 0.0;
    for (int i = 1; i <= n; ++i)
      max_slope = std::max(max_slope, std::abs((ys[i] - ys[i - 1]) /
                                               (xs[i] - xs[i - 1])));
    CHECK(g.net.max_abs_weight() <=
          std::max({2.0 * max_slope, 1.0, std::abs(ys[0])}) + 1e-9);
    for (int i = 0; i <= n; ++i)
      CHECK(std::abs(eval1(g, xs[i]) - ys[i]) < 1e-10);
    for (int i = 0; i < n; ++i) {
      double mid = 0.5 * (xs[i] + xs[i + 1]);
      CHECK(std::abs(eval1(g, mid) - 0.5 * (ys[i] + ys[i + 1])) < 1e-10);
    }
  }

  CHECK_THROWS_AS(fit_piecewise_linear({0.0, 0.0, 1.0}, {0, 1, 2}),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_piecewise_linear({-0.1, 1.0}, {0, 1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_piecewise_linear({0.0}, {0.0}), std::invalid_argument);
}

TEST_CASE("blocked interpolant: exact at every point with budget intact") {
  Rng rng(33);
  const double delta = 0.05;
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> xs, ys;
    random_grid_points(rng, 16, delta, xs, ys);
    BuiltNet g = fit_points_1d(xs, ys, 4, 4, delta);

    auto widths = g.net.widths();
    REQUIRE(widths.size() == 5);
    CHECK(widths[0] == 1);
    CHECK(widths[1] == 7);   // 2*n1 - 1
    CHECK(widths[2] == 10);  // 4*(n2-2) + 2
    CHECK(widths[3] == 18);  // 8*(n2-2) + 2
    CHECK(widths[4] == 1);
    CHECK(g.net.max_abs_weight() <= 4.0 / (delta * delta) + 1e-9);
    const auto& first = g.net.weights[0];
    CHECK(std::max(first.cwiseAbs().maxCoeff(),
                   g.net.biases[0].cwiseAbs().maxCoeff()) <= 1.0);
    CHECK(g.net.weights.back().cwiseAbs().maxCoeff() <= 1.0);

    for (std::size_t i = 0; i < xs.size(); ++i)
      CHECK(std::abs(eval1(g, xs[i]) - ys[i]) < 1e-8);
    // linear between consecutive samples of the same block
    for (int j = 0; j < 4; ++j) {
      for (int k = 0; k + 1 < 4; ++k) {
        std::size_t i = static_cast<std::size_t>(4 * j + k);
        double mid = 0.5 * (xs[i] + xs[i + 1]);
        CHECK(std::abs(eval1(g, mid) - 0.5 * (ys[i] + ys[i + 1])) < 1e-8);
      }
    }
  }

  SUBCASE("all-zero targets give the zero function") {
    std::vector<double> xs, ys;
    random_grid_points(rng, 16, delta, xs, ys);
    for (double& y : ys) y = 0.0;
    BuiltNet g = fit_points_1d(xs, ys, 4, 4, delta);
    for (double t = 0.0; t <= 1.0; t += 0.01)
      CHECK(std::abs(eval1(g, t)) < 1e-10);
  }

  SUBCASE("two-point blocks skip the tooth layers") {
    std::vector<double> xs, ys;
    random_grid_points(rng, 8, delta, xs, ys);
    BuiltNet g = fit_points_1d(xs, ys, 4, 2, delta);
    CHECK(g.net.widths()[2] == 2);
    CHECK(g.net.widths()[3] == 2);
    for (std::size_t i = 0; i < xs.size(); ++i)
      CHECK(std::abs(eval1(g, xs[i]) - ys[i]) < 1e-8);
  }

  SUBCASE("violated gap precondition is rejected") {
    std::vector<double> xs, ys;
    random_grid_points(rng, 16, delta, xs, ys);
    xs[5] = xs[4] + delta / 3.0;
    CHECK_THROWS_AS(fit_points_1d(xs, ys, 4, 4, delta),
                    std::invalid_argument);
    CHECK_THROWS_AS(fit_points_1d(xs, ys, 1, 16, delta),
                    std::invalid_argument);
  }
}

TEST_CASE("cell index net reports the lower-left corner on good cells") {
  const double gap = 1.0 / 24.0;

  BuiltNet one = build_index_creator(1, 2, gap);  // K = 4
  CHECK(one.net.hidden_layers() == 3);
  CHECK(eval1(one, 0.30) == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(eval1(one, 0.0) == doctest::Approx(0.0));
  CHECK(std::abs(eval1(one, 0.99) - 0.75) < 1e-9);
  for (int cell = 0; cell < 4; ++cell) {
    const double l = cell / 4.0, u = (cell + 1) / 4.0 - (cell < 3 ? gap : 0.0);
    for (int s = 0; s < 5; ++s) {
      double x = l + (u - l) * s / 4.0;
      CHECK(std::abs(eval1(one, x) - l) < 1e-9);
    }
  }

  BuiltNet two = build_index_creator(2, 4, gap);  // K = 4 per axis
  CHECK(two.net.input_dim() == 2);
  CHECK(two.net.output_dim() == 2);
  Rng rng(13);
  for (int cx = 0; cx < 4; ++cx) {
    for (int cy = 0; cy < 4; ++cy) {
      for (int s = 0; s < 5; ++s) {
        auto coord = [&](int c) {
          const double l = c / 4.0;
          const double u = (c + 1) / 4.0 - (c < 3 ? gap : 0.0);
          return rng.uniform(l, u);
        };
        Eigen::VectorXd v(2);
        v << coord(cx), coord(cy);
        Eigen::VectorXd out = forward(two.net, v);
        CHECK(std::abs(out(0) - cx / 4.0) < 1e-9);
        CHECK(std::abs(out(1) - cy / 4.0) < 1e-9);
      }
    }
  }

  CHECK_THROWS_AS(build_index_creator(1, 2, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(build_index_creator(2, 1, gap), std::invalid_argument);
}

TEST_CASE("mid net equals the sorted middle of three") {
  BuiltNet mid = build_mid();
  CHECK(mid.net.hidden_layers() == 2);
  CHECK(mid.max_hidden_width() <= 14);
  CHECK(mid.net.max_abs_weight() <= 1.0);
  Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd v(3);
    v << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
        rng.uniform(-2.0, 2.0);
    double want = oracles::sort3_mid(v(0), v(1), v(2));
    CHECK(forward_scalar(mid.net, v) == doctest::Approx(want).epsilon(1e-12));
  }
  Eigen::VectorXd tie(3);
  tie << 5.0, 5.0, 0.0;
  CHECK(forward_scalar(mid.net, tie) == doctest::Approx(5.0));
}

TEST_CASE("product net meets its error budget on the square") {
  BuiltNet prod = build_multiply(4, 3, -1.0, 1.0);
  CHECK(prod.net.hidden_layers() == 3);
  CHECK(prod.max_hidden_width() <= 9 * 4 + 1);
  CHECK(prod.net.max_abs_weight() <= 3.0 * 16 * 4 + 1e-9);
  double worst = 0.0;
  for (int i = 0; i <= 32; ++i) {
    for (int j = 0; j <= 32; ++j) {
      double x = -1.0 + i / 16.0, y = -1.0 + j / 16.0;
      worst = std::max(worst, std::abs(eval2(prod, x, y) - x * y));
    }
  }
  CHECK(worst <= 6.0 * 4.0 * std::pow(4.0, -3.0));  // stated budget
  CHECK(worst < 1e-4);                              // realized construction

  SUBCASE("error shrinks strictly as depth grows") {
    double prev = fastnn::kInf;
    for (int depth = 1; depth <= 3; ++depth) {
      BuiltNet p = build_multiply(4, depth, -1.0, 1.0);
      double err = 0.0;
      for (int i = 0; i <= 57; ++i)
        for (int j = 0; j <= 57; ++j) {
          double x = -1.0 + 2.0 * i / 57.0, y = -1.0 + 2.0 * j / 57.0;
          err = std::max(err, std::abs(eval2(p, x, y) - x * y));
        }
      CHECK(err <= 6.0 * 4.0 * std::pow(4.0, -depth));
      CHECK(err < prev);
      prev = err;
    }
  }

  SUBCASE("single-unit fallback keeps the coarse bound") {
    for (auto [lo, hi] : {std::pair{-1.0, 1.0}, std::pair{0.0, 1.0}}) {
      BuiltNet p = build_multiply(1, 2, lo, hi);
      CHECK(p.net.hidden_layers() == 2);
      double err = 0.0;
      for (int i = 0; i <= 20; ++i)
        for (int j = 0; j <= 20; ++j) {
          double x = lo + (hi - lo) * i / 20.0, y = lo + (hi - lo) * j / 20.0;
          err = std::max(err, std::abs(eval2(p, x, y) - x * y));
        }
      CHECK(err <= (hi - lo) * (hi - lo) / 4.0 + 1e-12);
    }
  }

  SUBCASE("asymmetric domain") {
    BuiltNet p = build_multiply(3, 2, -0.5, 2.0);
    double err = 0.0;
    for (int i = 0; i <= 25; ++i)
      for (int j = 0; j <= 25; ++j) {
        double x = -0.5 + 2.5 * i / 25.0, y = -0.5 + 2.5 * j / 25.0;
        err = std::max(err, std::abs(eval2(p, x, y) - x * y));
      }
    CHECK(err <= 6.0 * 2.5 * 2.5 * std::pow(3.0, -2.0));
  }

  CHECK_THROWS_AS(build_multiply(0, 1, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_multiply(2, 1, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("mid extension: bookkeeping and agreement with direct medians") {
  SUBCASE("constants pass through unchanged") {
    BuiltNet c = fit_piecewise_linear({0.0, 1.0}, {0.4, 0.4});
    BuiltNet ext = extend_by_mid(c, 0.05);
    CHECK(ext.net.hidden_layers() == c.net.hidden_layers() + 2);
    for (double x = 0.0; x <= 1.0; x += 0.05)
      CHECK(eval1(ext, x) == doctest::Approx(0.4).epsilon(1e-12));
  }

  SUBCASE("width triples per input coordinate") {
    BuiltNet g = fit_piecewise_linear({0.0, 0.2, 0.4, 0.6, 0.8, 1.0},
                                      {0.0, 0.5, 0.1, 0.9, 0.3, 0.7});
    BuiltNet ext = extend_by_mid(g, 0.02);
    CHECK(ext.declared_width == 3 * g.declared_width);
    CHECK(ext.declared_depth == g.net.hidden_layers() + 2);

    BuiltNet prod = build_multiply(2, 1, -1.0, 1.0);
    BuiltNet ext2 = extend_by_mid(prod, 0.02);
    CHECK(ext2.declared_width == 9 * prod.declared_width);
    CHECK(ext2.declared_depth == prod.net.hidden_layers() + 4);
  }

  SUBCASE("one round equals the median of three shifted evaluations") {
    const double step = 0.1;
    BuiltNet g = fit_piecewise_linear({0.0, 0.40, 0.44, 1.0},
                                      {0.0, 0.0, 1.0, 1.0});
    BuiltNet ext = extend_by_mid(g, step);
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
      double x = rng.uniform(step, 1.0 - step);
      double want = oracles::sort3_mid(eval1(g, x - step), eval1(g, x),
                                       eval1(g, x + step));
      CHECK(eval1(ext, x) == doctest::Approx(want).epsilon(1e-10));
    }
  }

  CHECK_THROWS_AS(extend_by_mid(gadget_min2(), 0.0), std::invalid_argument);
}

TEST_CASE("audit reports every construction inside its declared budget") {
  auto rows = netbuild_audit();
  CHECK(rows.size() >= 10);
  for (const auto& r : rows) {
    INFO(r.config);
    CHECK(r.ok);
    CHECK(r.actual_depth <= r.declared_depth);
    CHECK(r.actual_width <= r.declared_width);
    CHECK(r.actual_weight_bound <= r.declared_weight_bound + 1e-9);
  }
  auto bad = netbuild_audit(AuditFault::multiply_depth);
  bool saw_violation = false;
  for (const auto& r : bad)
    if (!r.ok) saw_violation = true;
  CHECK(saw_violation);
}
