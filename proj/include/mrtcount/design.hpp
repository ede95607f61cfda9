#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "mrtcount/panel.hpp"

namespace mrtcount {

// Moderator features define S_t (the effect model); control features define
// g(H_t) for the parametric estimators and the GEE mean model. When an
// intercept flag is set a leading "1" is prepended unless already listed.
struct EffectModelSpec {
  std::vector<std::string> moderators;
  std::vector<std::string> controls;
  bool moderator_intercept = false;
  bool control_intercept = false;
  // value a lag-1 feature takes at a participant's first record; nullopt makes
  // that an error instead
  std::optional<double> lag_initial = 0.0;
};

// Feature grammar: "1", "t", a covariate name, or <name>_lag1 where <name> is
// a covariate, "outcome", or "arm". Lag-1 reads the participant's previous
// record (by position, not by decision-index arithmetic).
Eigen::MatrixXd build_feature_matrix(const PanelDataset& data,
                                     const std::vector<std::string>& features,
                                     std::optional<double> lag_initial = 0.0);

struct DesignBundle {
  Eigen::MatrixXd S;  // records x p, moderator rows
  Eigen::MatrixXd G;  // records x q, control rows
  std::vector<std::string> s_labels;
  std::vector<std::string> g_labels;
};

DesignBundle build_design(const PanelDataset& data, const EffectModelSpec& spec);

}  // namespace mrtcount
