#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mrtcount/errors.hpp"
#include "mrtcount/glm.hpp"
#include "mrtcount/spline.hpp"

using namespace mrtcount;

TEST_CASE("clamped basis partitions unity and clamps extrapolation") {
  SplineBasis b = SplineBasis::over_range(0.0, 10.0, 8, 3);
  REQUIRE(static_cast<int>(b.knots.size()) == 8 + 3 + 1);

  for (double x : {0.0, 0.3, 2.7, 5.0, 9.99, 10.0}) {
    Eigen::RowVectorXd row = b.eval(x);
    REQUIRE(row.size() == 8);
    CHECK(row.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(row.minCoeff() >= 0.0);
  }
  // outside the training range the expansion freezes at the boundary
  CHECK((b.eval(-5.0) - b.eval(0.0)).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK((b.eval(25.0) - b.eval(10.0)).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("basis fit takes its range from the data") {
  Eigen::VectorXd x(4);
  x << -2.0, 0.0, 1.0, 7.0;
  SplineBasis b = SplineBasis::fit(x, 6, 3);
  CHECK(b.lo == doctest::Approx(-2.0));
  CHECK(b.hi == doctest::Approx(7.0));
  Eigen::MatrixXd M = b.eval(x);
  CHECK(M.rows() == 4);
  CHECK(M.cols() == 6);
}

TEST_CASE("difference penalty annihilates polynomials below its order") {
  SplineBasis b = SplineBasis::over_range(0.0, 1.0, 7, 3);
  Eigen::MatrixXd P = b.difference_penalty(2);
  REQUIRE(P.rows() == 7);
  CHECK((P - P.transpose()).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  Eigen::VectorXd lin(7);
  for (int i = 0; i < 7; ++i) lin(i) = 2.0 + 0.5 * i;
  CHECK(lin.dot(P * lin) == doctest::Approx(0.0).epsilon(1e-12));

  Eigen::VectorXd quad(7);
  for (int i = 0; i < 7; ++i) quad(i) = i * i;
  CHECK(quad.dot(P * quad) > 1.0);
}

TEST_CASE("unpenalized log-link fit recovers poisson coefficients") {
  std::mt19937_64 rng(11);
  int n = 4000;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    double x = std::uniform_real_distribution<double>(-1, 1)(rng);
    X(i, 0) = 1.0;
    X(i, 1) = x;
    std::poisson_distribution<int> pois(std::exp(0.5 + 0.3 * x));
    y(i) = pois(rng);
  }
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
  PenalizedGlmFit fit = fit_penalized_glm(X, y, zero);
  CHECK(fit.coef(0) == doctest::Approx(0.5).epsilon(0.05));
  CHECK(fit.coef(1) == doctest::Approx(0.3).epsilon(0.12));
  CHECK(fit.lambda == 0.0);
  CHECK(fit.predict(X.row(0)) == doctest::Approx(std::exp(fit.coef.dot(X.row(0)))));
}

TEST_CASE("unpenalized logit fit recovers logistic coefficients") {
  std::mt19937_64 rng(12);
  int n = 6000;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    double x = std::uniform_real_distribution<double>(-2, 2)(rng);
    X(i, 0) = 1.0;
    X(i, 1) = x;
    double p = 1.0 / (1.0 + std::exp(-(-0.4 + 0.8 * x)));
    y(i) = std::bernoulli_distribution(p)(rng) ? 1.0 : 0.0;
  }
  GlmOptions opts;
  opts.link = GlmLink::logit;
  PenalizedGlmFit fit = fit_penalized_glm(X, y, Eigen::MatrixXd::Zero(2, 2), opts);
  CHECK(fit.coef(0) == doctest::Approx(-0.4).epsilon(0.15));
  CHECK(fit.coef(1) == doctest::Approx(0.8).epsilon(0.10));
}

TEST_CASE("gcv scans the grid and the penalized curve tracks a smooth signal") {
  std::mt19937_64 rng(13);
  int n = 800;
  Eigen::VectorXd x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x(i) = 6.0 * i / (n - 1.0);
    double mu = std::exp(1.0 + 0.8 * std::sin(x(i)));
    y(i) = std::poisson_distribution<int>(mu)(rng);
  }
  SplineBasis basis = SplineBasis::fit(x, 12, 3);
  Eigen::MatrixXd X = basis.eval(x);
  PenalizedGlmFit fit = fit_penalized_glm(X, y, basis.difference_penalty(2));

  CHECK(fit.gcv_by_lambda.size() == default_lambda_grid().size());
  double best = std::numeric_limits<double>::infinity();
  for (auto& [lam, gcv] : fit.gcv_by_lambda) best = std::min(best, gcv);
  CHECK(fit.gcv == doctest::Approx(best));
  CHECK(fit.lambda > 0.0);
  CHECK(fit.edf < 12.0);

  double worst = 0;
  for (int i = 0; i < n; i += 7) {
    double truth = std::exp(1.0 + 0.8 * std::sin(x(i)));
    worst = std::max(worst, std::fabs(fit.predict(X.row(i)) - truth) / truth);
  }
  CHECK(worst < 0.25);
}

TEST_CASE("rescaling every prior weight leaves the fit unchanged") {
  std::mt19937_64 rng(14);
  int n = 300;
  Eigen::VectorXd x(n), y(n), w(n);
  for (int i = 0; i < n; ++i) {
    x(i) = 4.0 * i / (n - 1.0);
    y(i) = std::poisson_distribution<int>(std::exp(0.7 + 0.2 * x(i)))(rng);
    w(i) = 0.2 + std::uniform_real_distribution<double>(0, 1)(rng);
  }
  SplineBasis basis = SplineBasis::fit(x, 8, 3);
  Eigen::MatrixXd X = basis.eval(x);
  Eigen::MatrixXd P = basis.difference_penalty(2);

  GlmOptions a;
  a.weights = w;
  GlmOptions b;
  b.weights = 7.3 * w;
  PenalizedGlmFit fa = fit_penalized_glm(X, y, P, a);
  PenalizedGlmFit fb = fit_penalized_glm(X, y, P, b);
  CHECK((fa.coef - fb.coef).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(fa.lambda == fb.lambda);
  CHECK(fa.gcv == doctest::Approx(fb.gcv).epsilon(1e-10));
}

TEST_CASE("irls that cannot converge anywhere on the grid throws") {
  Eigen::MatrixXd X(4, 1);
  X << 1, 1, 1, 1;
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  GlmOptions opts;
  opts.max_iter = 0;
  try {
    fit_penalized_glm(X, y, Eigen::MatrixXd::Zero(1, 1), opts);
    FAIL("expected a throw");
  } catch (const estimation_error& e) {
    CHECK(e.code() == errc::irls_diverged);
  }
}

TEST_CASE("perfectly separated logistic data is reported, not returned") {
  int n = 60;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    double x = i < n / 2 ? -1.0 - 0.01 * i : 1.0 + 0.01 * i;
    X(i, 0) = 1.0;
    X(i, 1) = x;
    y(i) = x > 0 ? 1.0 : 0.0;
  }
  GlmOptions opts;
  opts.link = GlmLink::logit;
  try {
    fit_penalized_glm(X, y, Eigen::MatrixXd::Zero(2, 2), opts);
    FAIL("expected a throw");
  } catch (const estimation_error& e) {
    CHECK(e.code() == errc::separation_detected);
  }
}

TEST_CASE("an all-zero logistic response is flagged degenerate") {
  Eigen::MatrixXd X(10, 1);
  X.setOnes();
  Eigen::VectorXd y = Eigen::VectorXd::Zero(10);
  GlmOptions opts;
  opts.link = GlmLink::logit;
  PenalizedGlmFit fit = fit_penalized_glm(X, y, Eigen::MatrixXd::Zero(1, 1), opts);
  CHECK(fit.degenerate_response);
  CHECK(fit.predict(X.row(0)) < 0.01);
}
