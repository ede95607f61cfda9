#include "mrtcount/design.hpp"

#include <algorithm>

namespace mrtcount {

namespace {

enum class FeatKind { one, time_index, covariate, lag_covariate, lag_outcome, lag_arm };

struct Feat {
  FeatKind kind;
  int col = -1;  // covariate column when applicable
};

Feat resolve_feature(const PanelDataset& data, const std::string& name) {
  if (name == "1") return {FeatKind::one};
  if (name == "t") return {FeatKind::time_index};
  int j = data.covariate_index(name);
  if (j >= 0) return {FeatKind::covariate, j};
  const std::string suffix = "_lag1";
  if (name.size() > suffix.size() &&
      name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
    std::string base = name.substr(0, name.size() - suffix.size());
    if (base == "outcome" || base == "y") return {FeatKind::lag_outcome};
    if (base == "arm") return {FeatKind::lag_arm};
    int bj = data.covariate_index(base);
    if (bj >= 0) return {FeatKind::lag_covariate, bj};
  }
  throw_input(errc::unknown_feature, "feature '" + name + "' matches no covariate or lag");
}

}  // namespace

Eigen::MatrixXd build_feature_matrix(const PanelDataset& data,
                                     const std::vector<std::string>& features,
                                     std::optional<double> lag_initial) {
  std::vector<Feat> feats;
  feats.reserve(features.size());
  bool any_lag = false;
  for (const auto& name : features) {
    feats.push_back(resolve_feature(data, name));
    FeatKind k = feats.back().kind;
    any_lag |= (k == FeatKind::lag_covariate || k == FeatKind::lag_outcome ||
                k == FeatKind::lag_arm);
  }
  if (any_lag && !lag_initial.has_value()) {
    // a lag with no declared start value is only an error if some participant
    // actually begins a sequence
    for (const auto& g : data.groups)
      if (g.second > g.first)
        throw_input(errc::lag_before_start,
                    "lag-1 feature requested at a first record with no initial value");
  }

  Eigen::MatrixXd X(data.records.size(), features.size());
  for (int g = 0; g < data.n(); ++g) {
    for (int i = data.groups[g].first; i < data.groups[g].second; ++i) {
      const DecisionRecord& r = data.records[i];
      const DecisionRecord* prev = (i > data.groups[g].first) ? &data.records[i - 1] : nullptr;
      for (size_t j = 0; j < feats.size(); ++j) {
        double v = 0;
        switch (feats[j].kind) {
          case FeatKind::one: v = 1.0; break;
          case FeatKind::time_index: v = static_cast<double>(r.t); break;
          case FeatKind::covariate: v = r.covariates[feats[j].col]; break;
          case FeatKind::lag_covariate:
            v = prev ? prev->covariates[feats[j].col] : *lag_initial;
            break;
          case FeatKind::lag_outcome:
            v = prev ? static_cast<double>(prev->outcome) : *lag_initial;
            break;
          case FeatKind::lag_arm:
            v = prev ? static_cast<double>(prev->arm) : *lag_initial;
            break;
        }
        X(i, static_cast<Eigen::Index>(j)) = v;
      }
    }
  }
  return X;
}

namespace {

std::vector<std::string> with_intercept(const std::vector<std::string>& features, bool flag) {
  if (!flag) return features;
  if (std::find(features.begin(), features.end(), "1") != features.end()) return features;
  std::vector<std::string> out;
  out.reserve(features.size() + 1);
  out.push_back("1");
  out.insert(out.end(), features.begin(), features.end());
  return out;
}

}  // namespace

DesignBundle build_design(const PanelDataset& data, const EffectModelSpec& spec) {
  DesignBundle b;
  b.s_labels = with_intercept(spec.moderators, spec.moderator_intercept);
  b.g_labels = with_intercept(spec.controls, spec.control_intercept);
  b.S = build_feature_matrix(data, b.s_labels, spec.lag_initial);
  b.G = build_feature_matrix(data, b.g_labels, spec.lag_initial);
  return b;
}

}  // namespace mrtcount
