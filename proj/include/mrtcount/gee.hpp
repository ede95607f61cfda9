#pragma once

#include "mrtcount/design.hpp"
#include "mrtcount/panel.hpp"
#include "mrtcount/report.hpp"

namespace mrtcount {

enum class GeeCorr { independence, exchangeable };

// Log-linear working-model comparator: Poisson-type GEE on the available
// records with regressors [controls, arm-indicator x moderator blocks] and a
// cluster-robust sandwich. The correlation parameter and dispersion are moment
// estimates refreshed each scoring step.
EstimateReport fit_gee(const PanelDataset& data, const EffectModelSpec& model, GeeCorr corr,
                       bool t_critical);

}  // namespace mrtcount
