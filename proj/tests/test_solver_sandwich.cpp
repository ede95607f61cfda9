#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mrtcount/errors.hpp"
#include "mrtcount/estimators.hpp"
#include "mrtcount/solver.hpp"

using namespace mrtcount;

TEST_CASE("damped newton finds the root of a mean score") {
  std::mt19937_64 rng(31);
  Eigen::VectorXd x(500);
  for (int i = 0; i < 500; ++i) x(i) = std::normal_distribution<double>(3.0, 2.0)(rng);

  ScoreFn f = [&x](const Eigen::VectorXd& th) {
    Eigen::VectorXd out(1);
    out(0) = (x.array() - th(0)).mean();
    return out;
  };
  SolveDiagnostics diag;
  Eigen::VectorXd root = solve_score(f, Eigen::VectorXd::Zero(1), {}, &diag);
  // convergence is on the score, so the root can sit tol*(1+|theta|) away
  CHECK(std::fabs(root(0) - x.mean()) <= 1e-7 * (1.0 + std::fabs(root(0))));
  CHECK(diag.converged);
  CHECK(diag.score_norm <= 1e-8 * (1.0 + std::fabs(root(0))));
}

TEST_CASE("nonlinear scalar root: exp(theta) = c") {
  ScoreFn f = [](const Eigen::VectorXd& th) {
    Eigen::VectorXd out(1);
    out(0) = 5.0 - std::exp(th(0));
    return out;
  };
  Eigen::VectorXd root = solve_score(f, Eigen::VectorXd::Zero(1));
  CHECK(root(0) == doctest::Approx(std::log(5.0)).epsilon(1e-9));
}

TEST_CASE("a score with no root exhausts its restarts and throws") {
  ScoreFn f = [](const Eigen::VectorXd& th) {
    return Eigen::VectorXd::Ones(th.size());
  };
  try {
    solve_score(f, Eigen::VectorXd::Zero(2));
    FAIL("expected a throw");
  } catch (const estimation_error& e) {
    CHECK(e.code() == errc::no_convergence);
  }
}

TEST_CASE("forward and central jacobians agree on a smooth map") {
  ScoreFn f = [](const Eigen::VectorXd& th) {
    Eigen::VectorXd out(2);
    out(0) = std::sin(th(0)) + th(1) * th(1);
    out(1) = th(0) * std::cos(th(1));
    return out;
  };
  Eigen::VectorXd at(2);
  at << 0.4, -0.7;
  Eigen::MatrixXd fwd = numeric_jacobian(f, at);
  Eigen::MatrixXd ctr = numeric_jacobian_central(f, at);

  Eigen::MatrixXd exact(2, 2);
  exact << std::cos(at(0)), 2.0 * at(1), std::cos(at(1)), -at(0) * std::sin(at(1));
  CHECK((fwd - exact).cwiseAbs().maxCoeff() / exact.cwiseAbs().maxCoeff() < 1e-4);
  CHECK((fwd - ctr).cwiseAbs().maxCoeff() / ctr.cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("sandwich on an iid mean reduces to the classical variance") {
  std::mt19937_64 rng(32);
  int n = 400;
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = std::exp(std::normal_distribution<double>(0, 1)(rng));

  auto rows = [&x](const Eigen::VectorXd& th) {
    Eigen::MatrixXd m(x.size(), 1);
    m.col(0) = x.array() - th(0);
    return m;
  };
  Eigen::VectorXd at(1);
  at << x.mean();
  std::vector<int> cluster(n);
  std::iota(cluster.begin(), cluster.end(), 0);
  Eigen::MatrixXd cov = sandwich_cov(rows, at, cluster, {});

  double pop_var = (x.array() - x.mean()).square().mean();
  CHECK(std::fabs(std::sqrt(cov(0, 0)) - std::sqrt(pop_var / n)) < 1e-8);
}

TEST_CASE("cluster meat aggregates scores within participants first") {
  Eigen::VectorXd x(4);
  x << 1.0, 3.0, 2.0, 6.0;
  auto rows = [&x](const Eigen::VectorXd& th) {
    Eigen::MatrixXd m(4, 1);
    m.col(0) = x.array() - th(0);
    return m;
  };
  Eigen::VectorXd at(1);
  at << 3.0;
  std::vector<int> cluster = {0, 0, 1, 1};
  SandwichOptions opts;
  opts.meat = MeatMode::cluster;
  Eigen::MatrixXd cov = sandwich_cov(rows, at, cluster, opts);
  // bread is -1, cluster sums are (1-3)+(3-3) = -2 and (2-3)+(6-3) = 2
  double expected = (4.0 + 4.0) / 16.0;
  CHECK(cov(0, 0) == doctest::Approx(expected).epsilon(1e-10));

  Eigen::MatrixXd per_record = sandwich_cov(rows, at, cluster, {});
  double expected_rec = (4.0 + 0.0 + 1.0 + 9.0) / 16.0;
  CHECK(per_record(0, 0) == doctest::Approx(expected_rec).epsilon(1e-10));
}

TEST_CASE("record order cannot change estimates or standard errors") {
  std::mt19937_64 rng(33);
  int n = 120;
  Eigen::VectorXd x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x(i) = std::uniform_real_distribution<double>(-1, 1)(rng);
    y(i) = std::poisson_distribution<int>(std::exp(0.3 + 0.5 * x(i)))(rng);
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  auto rows_for = [&](const std::vector<int>& idx) {
    return [&x, &y, idx](const Eigen::VectorXd& th) {
      Eigen::MatrixXd m(idx.size(), 2);
      for (size_t r = 0; r < idx.size(); ++r) {
        int i = idx[r];
        double resid = y(i) - std::exp(th(0) + th(1) * x(i));
        m(r, 0) = resid;
        m(r, 1) = resid * x(i);
      }
      return m;
    };
  };
  std::vector<int> ident(n);
  std::iota(ident.begin(), ident.end(), 0);
  auto rows_a = rows_for(ident);
  auto rows_b = rows_for(order);

  ScoreFn mean_a = [&rows_a](const Eigen::VectorXd& th) {
    return Eigen::VectorXd(rows_a(th).colwise().mean());
  };
  ScoreFn mean_b = [&rows_b](const Eigen::VectorXd& th) {
    return Eigen::VectorXd(rows_b(th).colwise().mean());
  };
  Eigen::VectorXd ra = solve_score(mean_a, Eigen::VectorXd::Zero(2));
  Eigen::VectorXd rb = solve_score(mean_b, Eigen::VectorXd::Zero(2));
  CHECK((ra - rb).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + ra.cwiseAbs().maxCoeff()));

  std::vector<int> cl_a(n), cl_b(n);
  for (int i = 0; i < n; ++i) cl_a[i] = i / 10;
  for (int i = 0; i < n; ++i) cl_b[i] = cl_a[order[i]];
  Eigen::MatrixXd cov_a = sandwich_cov(rows_a, ra, cl_a, {});
  Eigen::MatrixXd cov_b = sandwich_cov(rows_b, rb, cl_b, {});
  CHECK((cov_a - cov_b).cwiseAbs().maxCoeff() <=
        1e-12 * (1.0 + cov_a.cwiseAbs().maxCoeff()));
}

TEST_CASE("a flat score direction makes the bread singular") {
  Eigen::VectorXd x(10);
  for (int i = 0; i < 10; ++i) x(i) = i;
  auto rows = [&x](const Eigen::VectorXd& th) {
    Eigen::MatrixXd m(10, 2);
    m.col(0) = x.array() - th(0);
    m.col(1).setZero();  // second coordinate never moves
    return m;
  };
  Eigen::VectorXd at(2);
  at << x.mean(), 0.0;
  std::vector<int> cluster(10, 0);
  try {
    sandwich_cov(rows, at, cluster, {});
    FAIL("expected a throw");
  } catch (const estimation_error& e) {
    CHECK(e.code() == errc::singular_bread);
  }
}
