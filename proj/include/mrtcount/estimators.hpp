#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mrtcount/design.hpp"
#include "mrtcount/nuisance.hpp"
#include "mrtcount/panel.hpp"
#include "mrtcount/report.hpp"
#include "mrtcount/solver.hpp"

namespace mrtcount {

enum class EstimatorKind { ece, ece_nonp, emee, emee_nonp, dr_emee_nonp, gee_ind, gee_exch };

const char* estimator_name(EstimatorKind k);
EstimatorKind estimator_from_name(const std::string& name);
bool estimator_is_gee(EstimatorKind k);
bool estimator_is_conditional(EstimatorKind k);  // ece family

// --- pointwise pieces -------------------------------------------------------

// counterfactual de-escalation of the observed outcome: y * exp(-a * effect)
double blip_down(double y, int a, double effect);

// change-of-randomization weight (p_tilde / p)^A ((1-p_tilde)/(1-p))^(1-A)
double weight_w(double ptilde, double p, int arm);
// multi-arm version; arm = 0 or 1..K, rows hold per-arm probabilities
double weight_w(const Eigen::RowVectorXd& ptilde, const Eigen::RowVectorXd& p, int arm);

// variance-style premultiplier for the conditional-effect scores; equals -1
// when the effect is zero
double weight_ktilde(double f_dot_phi, double p);

// treat/control mixture the blipped-down outcome is centered on
double h_marginal(double mu1, double mu0, double ptilde, double s_dot_beta);
double h_marginal(const Eigen::RowVectorXd& mu, const Eigen::RowVectorXd& ptilde,
                  const Eigen::RowVectorXd& exp_neg_effect);

// --- score assembly ---------------------------------------------------------

// Per-record inputs shared by every estimating function. Row i of each matrix
// belongs to record i of the dataset (all records, available or not).
struct ScoreContext {
  Eigen::MatrixXd S;       // moderator rows (f(H_t) for the conditional family)
  Eigen::MatrixXd G;       // control rows (parametric estimators only)
  Eigen::VectorXd y;
  Eigen::VectorXd avail;   // 0/1
  Eigen::VectorXi arm;     // 0..K
  Eigen::MatrixXd prob;    // denominator probabilities, records x K
  Eigen::MatrixXd ptilde;  // numerator probabilities, records x K
  Eigen::MatrixXd mu;      // fitted means, records x (K+1); hurdle family only
  std::vector<int> cluster;
  int k_arms = 1;

  Eigen::Index records() const { return y.size(); }
};

// each returns one score row per record; estimates solve colwise-mean = 0
Eigen::MatrixXd score_emee_nonp(const ScoreContext& ctx, const Eigen::VectorXd& beta);
Eigen::MatrixXd score_dr_emee_nonp(const ScoreContext& ctx, const Eigen::VectorXd& beta);
Eigen::MatrixXd score_ece_nonp(const ScoreContext& ctx, const Eigen::VectorXd& phi);
// stacked (alpha, beta) scores for the parametric pair
Eigen::MatrixXd score_emee(const ScoreContext& ctx, const Eigen::VectorXd& alpha_beta);
Eigen::MatrixXd score_ece(const ScoreContext& ctx, const Eigen::VectorXd& alpha_phi);

Eigen::MatrixXd score_rows(EstimatorKind k, const ScoreContext& ctx,
                           const Eigen::VectorXd& theta);

// --- sandwich covariance ----------------------------------------------------

enum class MeatMode { per_record, cluster };

struct SandwichOptions {
  MeatMode meat = MeatMode::per_record;
  double jacobian_step = 1e-6;
};

// robust covariance of the root of the mean score: bread from a numeric
// Jacobian, meat from score outer products (per record or per cluster)
Eigen::MatrixXd sandwich_cov(const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& rows,
                             const Eigen::VectorXd& theta, const std::vector<int>& cluster,
                             const SandwichOptions& opts = {});

// --- orchestration ----------------------------------------------------------

struct PtildeSpec {
  bool use_fixed = false;
  std::vector<double> fixed;  // per arm 1..K
};

struct EstimandSpec {
  EstimatorKind estimator = EstimatorKind::emee_nonp;
  EffectModelSpec model;
  NuisanceConfig nuisance;
  PtildeSpec ptilde;
  MeatMode meat = MeatMode::per_record;
  bool t_critical = false;
  bool two_fold = false;  // split-sample nuisance fits for sensitivity checks
  SolveOptions solve;
};

// test seam: inject exact or deliberately wrong nuisances; any unset member
// falls back to the fitted one. prob overrides even stored randomization
// probabilities.
struct NuisanceOverride {
  std::function<double(const DecisionRecord&, int arm)> mu;
  std::function<double(const DecisionRecord&, int k)> prob;
};

EstimateReport estimate(const PanelDataset& data, const EstimandSpec& spec);
EstimateReport estimate(const PanelDataset& data, const EstimandSpec& spec,
                        const NuisanceOverride& override_fns);

}  // namespace mrtcount
