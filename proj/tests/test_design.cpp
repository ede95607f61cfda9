#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mrtcount/design.hpp"

using namespace mrtcount;

namespace {

PanelDataset two_person() {
  PanelDataset d;
  d.participant_ids = {"a", "b"};
  d.covariate_names = {"Z", "W"};
  d.k_arms = 1;
  auto rec = [](int g, int t, int arm, long long y, double z, double w) {
    DecisionRecord r;
    r.participant = g;
    r.t = t;
    r.arm = arm;
    r.outcome = y;
    r.covariates = {z, w};
    return r;
  };
  d.records = {rec(0, 1, 1, 3, 2.0, -1.0), rec(0, 2, 0, 1, 1.0, 0.5),
               rec(0, 3, 1, 4, 0.0, 2.0),  rec(1, 1, 0, 7, 5.0, 1.5),
               rec(1, 2, 1, 0, 6.0, -2.0)};
  d.finalize();
  return d;
}

}  // namespace

TEST_CASE("feature grammar covers intercept, time, covariates, lags") {
  PanelDataset d = two_person();
  Eigen::MatrixXd F = build_feature_matrix(
      d, {"1", "t", "Z", "Z_lag1", "outcome_lag1", "arm_lag1"}, 0.0);
  REQUIRE(F.rows() == 5);
  REQUIRE(F.cols() == 6);
  // record 0: first for participant a, lags resolve to the declared initial
  CHECK(F(0, 0) == 1.0);
  CHECK(F(0, 1) == 1.0);
  CHECK(F(0, 2) == 2.0);
  CHECK(F(0, 3) == 0.0);
  CHECK(F(0, 4) == 0.0);
  CHECK(F(0, 5) == 0.0);
  // record 2: previous record is (t=2, Z=1, y=1, arm=0)
  CHECK(F(2, 1) == 3.0);
  CHECK(F(2, 3) == 1.0);
  CHECK(F(2, 4) == 1.0);
  CHECK(F(2, 5) == 0.0);
  // record 3 starts participant b: lag columns reset
  CHECK(F(3, 3) == 0.0);
  CHECK(F(3, 4) == 0.0);
  // record 4: previous record is b's first (Z=5, y=7, arm=0)
  CHECK(F(4, 3) == 5.0);
  CHECK(F(4, 4) == 7.0);
}

TEST_CASE("lag initial value is configurable and refusable") {
  PanelDataset d = two_person();
  Eigen::MatrixXd F = build_feature_matrix(d, {"Z_lag1"}, -9.0);
  CHECK(F(0, 0) == -9.0);
  CHECK(F(3, 0) == -9.0);
  CHECK(F(1, 0) == 2.0);

  CHECK_THROWS_AS(build_feature_matrix(d, {"Z_lag1"}, std::nullopt), input_error);
  try {
    build_feature_matrix(d, {"Z_lag1"}, std::nullopt);
  } catch (const input_error& e) {
    CHECK(e.code() == errc::lag_before_start);
  }
}

TEST_CASE("unknown features are rejected by name") {
  PanelDataset d = two_person();
  try {
    build_feature_matrix(d, {"1", "bogus"}, 0.0);
    FAIL("expected a throw");
  } catch (const input_error& e) {
    CHECK(e.code() == errc::unknown_feature);
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
  // lag of an unknown base name is just as bad
  CHECK_THROWS_AS(build_feature_matrix(d, {"bogus_lag1"}, 0.0), input_error);
}

TEST_CASE("design bundle splits moderators from controls with intercepts") {
  PanelDataset d = two_person();
  EffectModelSpec spec;
  spec.moderators = {"Z"};
  spec.controls = {"Z", "W"};
  spec.moderator_intercept = true;
  spec.control_intercept = true;
  DesignBundle b = build_design(d, spec);
  REQUIRE(b.S.cols() == 2);
  REQUIRE(b.G.cols() == 3);
  CHECK(b.s_labels[0] == "1");
  CHECK(b.s_labels[1] == "Z");
  CHECK(b.g_labels[0] == "1");
  CHECK(b.S(0, 0) == 1.0);
  CHECK(b.S(0, 1) == 2.0);
  CHECK(b.G(4, 2) == -2.0);

  // an explicit leading "1" is not duplicated by the intercept flag
  EffectModelSpec withone;
  withone.moderators = {"1", "Z"};
  withone.moderator_intercept = true;
  DesignBundle b2 = build_design(d, withone);
  CHECK(b2.S.cols() == 2);
}
