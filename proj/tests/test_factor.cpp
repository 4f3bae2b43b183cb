#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fastnn/factor.hpp"
#include "oracles.hpp"

using namespace fastnn;

namespace {

// Pervasive-design dataset used by the projection tests.
Dataset pervasive_sample(int p, int r, Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  FactorDgp dgp;
  dgp.p = p;
  dgp.r = r;
  dgp.loading = random_loading(p, r, rng);
  return generate(dgp, n, rng);
}

}  // namespace

TEST_CASE("candidate links match their closed forms") {
  CHECK(additive_candidate(0, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(additive_candidate(0, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(additive_candidate(1, 1.0) ==
        doctest::Approx(0.8414709848078965).epsilon(1e-12));
  CHECK(additive_candidate(2, -0.5) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(additive_candidate(2, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(additive_candidate(3, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(additive_candidate(3, 1.0) ==
        doctest::Approx(0.7310585786300049).epsilon(1e-12));
  CHECK(additive_candidate(4, 0.25) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(additive_candidate(4, 0.0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK_THROWS_AS(additive_candidate(5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(additive_candidate(-1, 0.0), std::invalid_argument);
}

TEST_CASE("additive regression sums one link per factor") {
  RegressionFn fn;
  fn.kind = RegressionKind::additive;
  fn.additive_ids = {0, 1, 2, 3, 4};
  Eigen::VectorXd u = Eigen::VectorXd::Zero(7);

  // All five links evaluated at zero: 1 + 0 + 1 + 1/2 - 1.
  CHECK(fn.eval(Eigen::VectorXd::Zero(5), u) ==
        doctest::Approx(1.5).epsilon(1e-12));

  Eigen::VectorXd f(5);
  f << 0.5, 1.0, -0.5, 1.0, 0.25;
  const double want = std::cos(M_PI * 0.5) + std::sin(1.0) + 0.25 +
                      1.0 / (1.0 + std::exp(-1.0)) +
                      (2.0 * std::sqrt(0.25) - 1.0);
  CHECK(fn.eval(f, u) == doctest::Approx(want).epsilon(1e-12));

  CHECK_THROWS_AS(fn.eval(Eigen::VectorXd::Zero(4), u),
                  std::invalid_argument);
}

TEST_CASE("fast1 is the signed sum of four factors and five idio terms") {
  RegressionFn fn;
  fn.kind = RegressionKind::fast1;
  Eigen::VectorXd f(4);
  f << 1.0, 2.0, 3.0, 4.0;
  Eigen::VectorXd u(8);
  u << 1.0, 2.0, 3.0, 4.0, 5.0, 99.0, 99.0, 99.0;  // tail must be ignored
  // (1 - 2 + 3 - 4) + (-1 + 2 - 3 + 4 - 5) = -2 - 3
  CHECK(fn.eval(f, u) == doctest::Approx(-5.0).epsilon(1e-12));

  CHECK_THROWS_AS(fn.eval(Eigen::VectorXd::Zero(3), u),
                  std::invalid_argument);
  CHECK_THROWS_AS(fn.eval(f, Eigen::VectorXd::Zero(4)),
                  std::invalid_argument);
}

TEST_CASE("fast2 matches a hand evaluation") {
  RegressionFn fn;
  fn.kind = RegressionKind::fast2;

  CHECK(fn.eval(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(5)) ==
        doctest::Approx(std::log(9.0) + std::tan(0.1)).epsilon(1e-12));

  Eigen::VectorXd f(4);
  f << 0.5, -0.5, 0.25, 1.0;
  Eigen::VectorXd u(5);
  u << 0.1, -0.2, 0.3, 0.4, -0.5;
  const double want = 0.5 * 0.25 - 0.25 +
                      std::log(8.0 + 1.0 + 0.4 + std::exp(-0.06 - 0.5)) +
                      std::tan(0.5) + std::sin(-0.5);
  CHECK(fn.eval(f, u) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("null regression is identically zero") {
  RegressionFn fn;
  fn.kind = RegressionKind::null_case;
  Rng rng(11);
  for (int t = 0; t < 5; ++t)
    CHECK(fn.eval(gaussian_vector(rng, 5, 0.0, 1.0),
                  gaussian_vector(rng, 9, 0.0, 1.0)) == 0.0);
}

TEST_CASE("random additive draws valid ids deterministically") {
  Rng a(42), b(42);
  RegressionFn fa = random_additive(6, a);
  RegressionFn fb = random_additive(6, b);
  REQUIRE(fa.additive_ids.size() == 6);
  CHECK(fa.kind == RegressionKind::additive);
  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(fa.additive_ids[j] >= 0);
    CHECK(fa.additive_ids[j] < kAdditiveCandidateCount);
    CHECK(fa.additive_ids[j] == fb.additive_ids[j]);
  }
}

TEST_CASE("loading entries live in [-sqrt(3), sqrt(3)]") {
  Rng rng(7);
  Eigen::MatrixXd b = random_loading(40, 5, rng);
  REQUIRE(b.rows() == 40);
  REQUIRE(b.cols() == 5);
  const double bound = std::sqrt(3.0);
  CHECK(b.cwiseAbs().maxCoeff() <= bound);
  CHECK(b.cwiseAbs().maxCoeff() > 0.8 * bound);  // nearly tight for 200 draws
}

TEST_CASE("generated data satisfies x = f loading^T + u exactly") {
  Rng rng(99);
  FactorDgp dgp;
  dgp.p = 30;
  dgp.r = 4;
  dgp.loading = random_loading(dgp.p, dgp.r, rng);
  dgp.fn = random_additive(dgp.r, rng);
  Dataset d = generate(dgp, 25, rng);

  REQUIRE(d.x.rows() == 25);
  REQUIRE(d.x.cols() == 30);
  REQUIRE(d.f.cols() == 4);
  REQUIRE(d.u.cols() == 30);
  const Eigen::MatrixXd rebuilt = d.f * dgp.loading.transpose() + d.u;
  CHECK((d.x - rebuilt).cwiseAbs().maxCoeff() == 0.0);

  CHECK(d.f.cwiseAbs().maxCoeff() <= dgp.factor_bound);
  CHECK(d.u.cwiseAbs().maxCoeff() <= dgp.idio_bound);

  for (Eigen::Index i = 0; i < 25; ++i)
    CHECK(d.m(i) ==
          doctest::Approx(dgp.fn.eval(d.f.row(i), d.u.row(i))).epsilon(1e-12));
}

TEST_CASE("observation noise has the requested spread") {
  Rng rng(123);
  FactorDgp dgp;
  dgp.p = 10;
  dgp.r = 2;
  dgp.loading = random_loading(dgp.p, dgp.r, rng);
  dgp.fn.kind = RegressionKind::null_case;
  dgp.noise_sd = std::sqrt(0.3);
  Dataset d = generate(dgp, 4000, rng);
  const Eigen::VectorXd eps = d.y - d.m;
  CHECK(std::abs(eps.mean()) < 0.05);
  const double var = eps.squaredNorm() / 4000.0 - eps.mean() * eps.mean();
  CHECK(var == doctest::Approx(0.3).epsilon(0.08));
}

TEST_CASE("gaussian idiosyncratic mode is unbounded and unit variance") {
  Rng rng(5);
  FactorDgp dgp;
  dgp.p = 50;
  dgp.r = 2;
  dgp.loading = Eigen::MatrixXd::Zero(dgp.p, dgp.r);
  dgp.idio = IdioKind::gaussian;
  dgp.fn.kind = RegressionKind::null_case;
  Dataset d = generate(dgp, 400, rng);
  CHECK(d.u.cwiseAbs().maxCoeff() > 1.5);  // uniform mode would cap at 1
  const double var = d.u.array().square().mean();
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("generation is reproducible and shape-checked") {
  FactorDgp dgp;
  dgp.p = 12;
  dgp.r = 3;
  {
    Rng rng(1);
    dgp.loading = random_loading(dgp.p, dgp.r, rng);
  }
  dgp.fn.kind = RegressionKind::null_case;
  Rng r1(77), r2(77);
  Dataset a = generate(dgp, 8, r1);
  Dataset b = generate(dgp, 8, r2);
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);

  FactorDgp bad = dgp;
  bad.p = 13;  // loading no longer matches
  Rng r3(1);
  CHECK_THROWS_AS(generate(bad, 4, r3), std::invalid_argument);
}

TEST_CASE("projection on an axis-aligned sample picks the top direction") {
  Eigen::MatrixXd x(2, 2);
  x << 2.0, 0.0, 0.0, 1.0;
  DiversifiedProjection dp = estimate_dpm_pca(x, 2);
  REQUIRE(dp.w.rows() == 2);
  REQUIRE(dp.w.cols() == 2);
  const double s = std::sqrt(2.0);
  CHECK(dp.w(0, 0) == doctest::Approx(s).epsilon(1e-12));
  CHECK(dp.w(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(dp.w(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(dp.w(1, 1) == doctest::Approx(s).epsilon(1e-12));
  CHECK(dp.eigenvalues(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(dp.eigenvalues(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("gram-based projection agrees with a direct eigensolve") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Dataset d = pervasive_sample(12, 3, 30, seed);
    DiversifiedProjection dp = estimate_dpm_pca(d.x, 5);

    Eigen::MatrixXd cov = d.x.transpose() * d.x / 30.0;
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
    oracles::jacobi_eigen(cov, values, vectors);

    const double scale = std::sqrt(12.0);
    for (int k = 0; k < 5; ++k) {
      CHECK(dp.eigenvalues(k) ==
            doctest::Approx(values(k)).epsilon(1e-8));
      CHECK(oracles::abs_cosine(dp.w.col(k), vectors.col(k)) >= 1.0 - 1e-8);
      CHECK(dp.w.col(k).norm() == doctest::Approx(scale).epsilon(1e-10));
    }
    // descending order
    for (int k = 1; k < 5; ++k)
      CHECK(dp.eigenvalues(k) <= dp.eigenvalues(k - 1) + 1e-12);
  }
}

TEST_CASE("projection columns are orthogonal with the sqrt(p) scale") {
  Dataset d = pervasive_sample(60, 4, 40, 3);
  DiversifiedProjection dp = estimate_dpm_pca(d.x, 8);
  const Eigen::MatrixXd gram = dp.w.transpose() * dp.w / 60.0;
  CHECK((gram - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() <
        1e-10);
  for (int k = 0; k < 8; ++k) {
    Eigen::Index arg = 0;
    dp.w.col(k).cwiseAbs().maxCoeff(&arg);
    CHECK(dp.w(arg, k) > 0.0);
  }
}

TEST_CASE("projection rejects impossible component counts") {
  Dataset d = pervasive_sample(20, 2, 6, 9);
  CHECK_THROWS_AS(estimate_dpm_pca(d.x, 7), std::invalid_argument);
  CHECK_THROWS_AS(estimate_dpm_pca(d.x, 0), std::invalid_argument);

  // rank-one input cannot support two components
  Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(5, 1.0, 5.0);
  Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(8, 0.5, 2.0);
  Eigen::MatrixXd rank1 = a * b.transpose();
  CHECK_THROWS_AS(estimate_dpm_pca(rank1, 2), std::invalid_argument);
  CHECK_NOTHROW(estimate_dpm_pca(rank1, 1));

  Eigen::MatrixXd wide(4, 3);
  wide.setRandom();
  CHECK_THROWS_AS(estimate_dpm_pca(wide, 4), std::invalid_argument);
}

TEST_CASE("surrogate factors average the projected coordinates") {
  Eigen::MatrixXd w(3, 2);
  w << 1.0, 0.0, 0.0, 2.0, 3.0, 0.0;
  Eigen::VectorXd x(3);
  x << 1.0, 1.0, 1.0;
  Eigen::VectorXd s = surrogate_factor(w, x);
  CHECK(s(0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(s(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  Eigen::MatrixXd rows(2, 3);
  rows << 1.0, 1.0, 1.0, 0.0, -1.0, 2.0;
  Eigen::MatrixXd ss = surrogate_factors(w, rows);
  REQUIRE(ss.rows() == 2);
  REQUIRE(ss.cols() == 2);
  CHECK(ss(0, 0) == doctest::Approx(s(0)).epsilon(1e-12));
  CHECK(ss(0, 1) == doctest::Approx(s(1)).epsilon(1e-12));
  CHECK(ss(1, 0) == doctest::Approx((0.0 + 0.0 + 6.0) / 3.0).epsilon(1e-12));
  CHECK(ss(1, 1) == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("diagnostics report the extreme singular values of W^T B / p") {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(4, 2);
  w(0, 0) = 2.0;
  w(1, 1) = 2.0;
  Eigen::MatrixXd loading = Eigen::MatrixXd::Zero(4, 2);
  loading(0, 0) = 1.0;
  loading(1, 1) = 3.0;
  ProjectionDiagnostics diag = projection_diagnostics(w, loading);
  CHECK(diag.nu_min == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(diag.nu_max == doctest::Approx(1.5).epsilon(1e-12));

  CHECK_THROWS_AS(projection_diagnostics(w, Eigen::MatrixXd::Zero(5, 2)),
                  std::invalid_argument);
}

TEST_CASE("estimated projections are significant, random ones are not") {
  // Pervasive loadings, principal-component W: nu_min should sit well above
  // p^-1/2. A data-independent gaussian W with the same shape should not.
  const int p = 500, r = 5, rbar = 10;
  const Eigen::Index n1 = 50;
  int strong = 0, weak_control = 0;
  const int seeds = 20;
  for (int t = 0; t < seeds; ++t) {
    Rng rng(derive_seed(2024, {static_cast<std::uint64_t>(t)}));
    FactorDgp dgp;
    dgp.p = p;
    dgp.r = r;
    dgp.loading = random_loading(p, r, rng);
    dgp.fn.kind = RegressionKind::null_case;
    Dataset d = generate(dgp, n1, rng);

    DiversifiedProjection dp = estimate_dpm_pca(d.x, rbar);
    if (projection_diagnostics(dp.w, dgp.loading).nu_min >= 0.5) ++strong;

    Eigen::MatrixXd wg = gaussian_matrix(rng, p, rbar, 0.0, 1.0);
    if (projection_diagnostics(wg, dgp.loading).nu_min < 0.1) ++weak_control;
  }
  CHECK(strong >= 18);
  CHECK(weak_control >= 18);
}
