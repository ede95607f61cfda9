#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mrtcount/estimators.hpp"
#include "mrtcount/simulate.hpp"

namespace mrtcount {

// default estimator wiring for a generated scenario: moderators (1) or (1, Z),
// controls (1, Z), saturated categorical outcome means on Z, known
// randomization probabilities where the scenario stores them and the sample
// proportion otherwise
EstimandSpec scenario_estimand(int scenario, EstimatorKind kind, bool conditional);

// analytic target aligned with the effect block: one value per arm (marginal)
// or per-arm (intercept, slope on Z) pairs (conditional)
Eigen::VectorXd scenario_truth(int scenario, bool conditional);

struct ReplicationRequest {
  GenConfig gen;
  int replicates = 200;
  std::uint64_t seed = 1;
  int workers = 1;
  bool conditional = false;
  std::vector<EstimatorKind> estimators;
};

struct EstimatorSummary {
  std::string estimator;
  std::vector<std::string> labels;  // effect-block terms
  Eigen::VectorXd bias, mean_se, sd, rmse, cp;
  int used = 0;
  int failures = 0;
};

struct ReplicationSummary {
  int scenario = 1;
  int t = 0;
  int replicates = 0;
  Eigen::VectorXd truth;
  std::vector<EstimatorSummary> by_estimator;
  std::vector<std::string> failure_log;  // "replicate k, <estimator>: message"

  std::string render_table() const;
  std::string to_csv() const;
};

// metric arithmetic over one estimator's successful replicates; CP is the
// fraction of intervals covering the truth coordinate-wise
EstimatorSummary summarize_replicates(const std::string& name,
                                      const std::vector<std::string>& labels,
                                      const std::vector<Eigen::VectorXd>& estimates,
                                      const std::vector<Eigen::VectorXd>& ses,
                                      const std::vector<Eigen::VectorXd>& ci_lo,
                                      const std::vector<Eigen::VectorXd>& ci_hi,
                                      const Eigen::VectorXd& truth, int failures);

ReplicationSummary run_replications(const ReplicationRequest& req);

}  // namespace mrtcount
