#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mrtcount/replicate.hpp"

using namespace mrtcount;

namespace {

Eigen::VectorXd v1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

}  // namespace

TEST_CASE("metrics on injected constants come out exact") {
  Eigen::VectorXd truth = v1(0.46);
  std::vector<Eigen::VectorXd> est(5, v1(0.56)), se(5, v1(0.2));
  std::vector<Eigen::VectorXd> lo, hi;
  for (int r = 0; r < 5; ++r) {
    // three intervals cover the truth, two sit entirely above it
    lo.push_back(v1(r < 3 ? 0.40 : 0.50));
    hi.push_back(v1(r < 3 ? 0.60 : 0.70));
  }
  EstimatorSummary s =
      summarize_replicates("x", {"1"}, est, se, lo, hi, truth, 2);
  CHECK(s.bias(0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(s.sd(0) == 0.0);
  CHECK(s.rmse(0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(s.mean_se(0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(s.cp(0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(s.used == 5);
  CHECK(s.failures == 2);
}

TEST_CASE("rmse decomposes into bias and variance") {
  std::mt19937_64 rng(31);
  std::vector<Eigen::VectorXd> est, se, lo, hi;
  const int R = 40;
  for (int r = 0; r < R; ++r) {
    Eigen::VectorXd e(2);
    e << std::normal_distribution<double>(0.5, 0.3)(rng),
        std::normal_distribution<double>(-0.2, 0.1)(rng);
    est.push_back(e);
    se.push_back(Eigen::VectorXd::Constant(2, 0.1));
    lo.push_back(e.array() - 0.2);
    hi.push_back(e.array() + 0.2);
  }
  Eigen::VectorXd truth(2);
  truth << 0.46, -0.25;
  EstimatorSummary s = summarize_replicates("x", {"1", "Z"}, est, se, lo, hi, truth, 0);
  for (int j = 0; j < 2; ++j) {
    double want = s.bias(j) * s.bias(j) + s.sd(j) * s.sd(j) * (R - 1.0) / R;
    CHECK(s.rmse(j) * s.rmse(j) == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("replication output is a pure function of the request") {
  ReplicationRequest req;
  req.gen.scenario = 1;
  req.gen.n = 12;
  req.gen.t = 10;
  req.replicates = 20;
  req.seed = 32;
  req.estimators = {EstimatorKind::ece,      EstimatorKind::ece_nonp,
                    EstimatorKind::emee,     EstimatorKind::emee_nonp,
                    EstimatorKind::dr_emee_nonp, EstimatorKind::gee_ind,
                    EstimatorKind::gee_exch};
  std::string a = run_replications(req).to_csv();
  std::string b = run_replications(req).to_csv();
  CHECK(a == b);
  req.workers = 3;
  CHECK(run_replications(req).to_csv() == a);
  req.seed = 33;
  CHECK(run_replications(req).to_csv() != a);
  CHECK(a.find(estimator_name(EstimatorKind::dr_emee_nonp)) != std::string::npos);
}

TEST_CASE("failed replicates are counted, logged, and excluded from metrics") {
  ReplicationRequest req;
  req.gen.scenario = 1;
  req.gen.n = 4;
  req.gen.t = 5;
  req.replicates = 30;
  req.seed = 99;
  req.estimators = {EstimatorKind::emee_nonp};
  ReplicationSummary s = run_replications(req);
  const EstimatorSummary& e = s.by_estimator[0];
  CHECK(e.used == 17);
  CHECK(e.failures == 13);
  CHECK(e.used + e.failures == 30);
  REQUIRE(s.failure_log.size() == 13);
  CHECK(s.failure_log[0].rfind("replicate ", 0) == 0);
  CHECK(std::isfinite(e.bias(0)));

  // worker split must not disturb which replicates fail or the log order
  req.workers = 4;
  ReplicationSummary sw = run_replications(req);
  CHECK(sw.failure_log == s.failure_log);
  CHECK(sw.to_csv() == s.to_csv());
}

TEST_CASE("a run where nothing converges is a typed error, not a summary") {
  ReplicationRequest req;
  req.gen.scenario = 1;
  req.gen.n = 1;
  req.gen.t = 1;
  req.replicates = 5;
  req.seed = 34;
  req.estimators = {EstimatorKind::emee_nonp};
  try {
    run_replications(req);
    FAIL("expected a throw");
  } catch (const estimation_error& e) {
    CHECK(e.code() == errc::all_replicates_failed);
  }
}

TEST_CASE("scenario wiring uses the documented defaults") {
  EstimandSpec m = scenario_estimand(1, EstimatorKind::emee_nonp, false);
  CHECK(m.model.moderators == std::vector<std::string>{"1"});
  CHECK(m.model.controls == (std::vector<std::string>{"1", "Z"}));
  REQUIRE(m.nuisance.mean_terms.size() == 1);
  CHECK(m.nuisance.mean_terms[0].feature == "Z");
  CHECK(m.nuisance.mean_terms[0].kind == TermKind::categorical);
  CHECK(m.nuisance.propensity == PropensityMode::known_prob);
  CHECK(m.meat == MeatMode::per_record);

  EstimandSpec c = scenario_estimand(1, EstimatorKind::ece_nonp, true);
  CHECK(c.model.moderators == (std::vector<std::string>{"1", "Z"}));

  CHECK(scenario_estimand(2, EstimatorKind::emee_nonp, false).nuisance.propensity ==
        PropensityMode::sample_proportion);
  CHECK(scenario_estimand(3, EstimatorKind::emee_nonp, false).nuisance.propensity ==
        PropensityMode::known_prob);
  CHECK(scenario_estimand(4, EstimatorKind::dr_emee_nonp, false).nuisance.propensity ==
        PropensityMode::known_prob);
}

TEST_CASE("the aligned truth matches the analytic effects") {
  CHECK(scenario_truth(1, false)(0) == doctest::Approx(0.459861176).epsilon(1e-8));
  Eigen::VectorXd c1 = scenario_truth(1, true);
  REQUIRE(c1.size() == 2);
  CHECK(c1(0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(c1(1) == doctest::Approx(0.4).epsilon(1e-12));

  Eigen::VectorXd m4 = scenario_truth(4, false);
  REQUIRE(m4.size() == 2);
  CHECK(m4(0) == doctest::Approx(0.459861176).epsilon(1e-8));
  CHECK(m4(1) == doctest::Approx(0.267164005).epsilon(1e-8));

  Eigen::VectorXd c4 = scenario_truth(4, true);
  REQUIRE(c4.size() == 4);
  CHECK(c4(2) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(c4(3) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("conditional estimators refuse the two-treatment scenario") {
  ReplicationRequest req;
  req.gen.scenario = 4;
  req.gen.n = 10;
  req.gen.t = 8;
  req.replicates = 3;
  req.seed = 35;
  req.estimators = {EstimatorKind::ece_nonp};
  try {
    run_replications(req);
    FAIL("expected a throw");
  } catch (const input_error& e) {
    CHECK(e.code() == errc::invalid_config);
    CHECK(std::string(e.what()).find("binary") != std::string::npos);
  }
}
