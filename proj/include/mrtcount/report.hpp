#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace mrtcount {

struct EstimateReport {
  std::string estimator;
  std::vector<std::string> labels;
  Eigen::VectorXd estimates;
  Eigen::MatrixXd cov;
  Eigen::VectorXd se, ci_lo, ci_hi, z_value, p_value;
  // the causal-effect block within `estimates` (parametric estimators and the
  // GEEs also carry control coefficients)
  int effect_offset = 0;
  int effect_dim = 0;
  bool all_zero_outcomes = false;  // estimates pinned at zero, SEs infinite
  bool used_t_critical = false;
  double critical_value = 1.96;
  int solver_iterations = 0;
  int solver_restarts = 0;
  double score_norm = 0;  // sup norm of the mean score at the estimate
  std::vector<std::string> warnings;

  std::string render_table() const;
  std::string to_json_text() const;
};

// fills se/ci/z/p from the covariance; t_critical switches the normal 1.96 to
// a Student-t quantile with df = records - parameters
void finish_inference(EstimateReport& report, long long n_records, bool t_critical);

}  // namespace mrtcount
