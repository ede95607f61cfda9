#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "mrtcount/design.hpp"
#include "mrtcount/glm.hpp"
#include "mrtcount/panel.hpp"
#include "mrtcount/spline.hpp"

namespace mrtcount {

enum class TermKind { linear, categorical, spline };

struct TermSpec {
  std::string feature;
  TermKind kind = TermKind::spline;
  int n_basis = 10;
  int degree = 3;
  int penalty_order = 2;
};

// A term design realized against training data: categorical levels and spline
// knots are frozen here so later predictions see the same expansion.
struct RealizedTerm {
  TermSpec spec;
  std::vector<double> levels;  // categorical: sorted unique training values
  SplineBasis basis;           // spline terms
  int offset = 0;              // first design column of this term
  int width = 0;
};

struct NuisanceDesign {
  std::vector<std::string> features;  // feature-matrix columns, in order
  std::vector<RealizedTerm> terms;
  bool intercept = true;
  int cols = 0;

  Eigen::MatrixXd expand(const Eigen::MatrixXd& feat) const;
  Eigen::RowVectorXd expand_row(const Eigen::RowVectorXd& feat_row) const;
  // block-diagonal difference penalties on spline terms, zero elsewhere
  Eigen::MatrixXd penalty() const;
};

// Realize term designs from training feature rows. Categorical one-hot drops
// the first level (the intercept carries it); spline blocks drop their first
// basis function for the same reason.
NuisanceDesign realize_design(const Eigen::MatrixXd& feat, const std::vector<std::string>& names,
                              const std::vector<TermSpec>& terms, bool intercept = true);

// Two-part model for one arm: P(Y>0 | h) via penalized logistic and
// E[Y | Y>0, h] via penalized log link, both on the same design.
struct HurdleFit {
  int arm = 0;
  bool all_zero = false;  // every training outcome was zero; mean is identically 0
  PenalizedGlmFit zero_part;
  PenalizedGlmFit positive_part;

  double predict_mean(const NuisanceDesign& design, const Eigen::RowVectorXd& feat_row) const;
  double predict_positive_mean(const NuisanceDesign& design,
                               const Eigen::RowVectorXd& feat_row) const;
};

// fits on available records with the given arm; throws NoRecordsForArm
HurdleFit fit_hurdle_mean(const PanelDataset& data, int arm, const NuisanceDesign& design,
                          const Eigen::MatrixXd& feat, const std::vector<double>& lambda_grid);

enum class PropensityMode { known_prob, sample_proportion, logistic, spline_logistic };

const char* propensity_mode_name(PropensityMode m);
PropensityMode propensity_mode_from_name(const std::string& name);

struct PropensityFit {
  PropensityMode mode = PropensityMode::sample_proportion;
  int k_arms = 1;
  double clip = 0.01;
  std::vector<double> sample_prop;  // arm k at [k-1]; availability-weighted
  NuisanceDesign design;            // logistic modes
  PenalizedGlmFit fit;              // logistic modes, binary treatment only

  // probability of arm k (1-based) given the feature row; clipped to
  // [clip, 1-clip]
  double predict(const Eigen::RowVectorXd& feat_row, int k) const;
};

struct NuisanceConfig {
  std::vector<TermSpec> mean_terms;
  std::vector<TermSpec> propensity_terms;
  PropensityMode propensity = PropensityMode::known_prob;
  std::vector<double> lambda_grid;  // empty = default grid
  double prob_clip = 0.01;
  std::optional<double> lag_initial = 0.0;
};

PropensityFit fit_propensity(const PanelDataset& data, const NuisanceConfig& config);

struct NuisanceFit {
  NuisanceDesign mean_design;
  std::vector<std::string> mean_features;
  std::vector<HurdleFit> arms;  // index = arm, 0..K
  PropensityFit propensity;
  std::vector<std::string> prop_features;
  std::optional<double> lag_initial = 0.0;
  std::vector<std::string> warnings;

  double predict_mu(const Eigen::RowVectorXd& mean_feat_row, int arm) const;
  double predict_prob(const Eigen::RowVectorXd& prop_feat_row, int k) const;
};

// Fits the K+1 arm means and the propensity on the full sample (available
// records only).
NuisanceFit fit_nuisance(const PanelDataset& data, const NuisanceConfig& config);

// versioned text round trip for fitted nuisance models
std::string nuisance_to_text(const NuisanceFit& fit);
NuisanceFit nuisance_from_text(const std::string& text);

}  // namespace mrtcount
