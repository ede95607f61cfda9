#include "mrtcount/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"

namespace mrtcount {

namespace {

constexpr double kLevelTol = 1e-9;

int match_level(const std::vector<double>& levels, double v) {
  for (size_t i = 0; i < levels.size(); ++i)
    if (std::fabs(levels[i] - v) <= kLevelTol) return static_cast<int>(i);
  return -1;
}

}  // namespace

NuisanceDesign realize_design(const Eigen::MatrixXd& feat, const std::vector<std::string>& names,
                              const std::vector<TermSpec>& terms, bool intercept) {
  if (static_cast<size_t>(feat.cols()) != names.size())
    throw_input(errc::invalid_config, "feature matrix does not match feature names");
  NuisanceDesign d;
  d.features = names;
  d.intercept = intercept;
  d.cols = intercept ? 1 : 0;
  for (const auto& spec : terms) {
    auto it = std::find(names.begin(), names.end(), spec.feature);
    if (it == names.end())
      throw_input(errc::unknown_feature,
                  "term feature '" + spec.feature + "' not in the feature list");
    Eigen::Index col = it - names.begin();
    RealizedTerm t;
    t.spec = spec;
    t.offset = d.cols;
    switch (spec.kind) {
      case TermKind::linear:
        t.width = 1;
        break;
      case TermKind::categorical: {
        std::set<double> seen;
        for (Eigen::Index i = 0; i < feat.rows(); ++i) {
          double v = feat(i, col);
          bool found = false;
          for (double u : seen)
            if (std::fabs(u - v) <= kLevelTol) {
              found = true;
              break;
            }
          if (!found) seen.insert(v);
        }
        t.levels.assign(seen.begin(), seen.end());
        // with an intercept the first level is the baseline; without one every
        // level gets its own column
        t.width = static_cast<int>(t.levels.size()) - (intercept ? 1 : 0);
        t.width = std::max(t.width, 0);
        break;
      }
      case TermKind::spline: {
        t.basis = SplineBasis::fit(feat.col(col), spec.n_basis, spec.degree);
        // the basis spans constants, so the first function is dropped whenever
        // an intercept is present
        t.width = spec.n_basis - (intercept ? 1 : 0);
        break;
      }
    }
    d.cols += t.width;
    d.terms.push_back(std::move(t));
  }
  return d;
}

Eigen::RowVectorXd NuisanceDesign::expand_row(const Eigen::RowVectorXd& feat_row) const {
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(cols);
  if (intercept) out(0) = 1.0;
  for (const auto& t : terms) {
    Eigen::Index col =
        std::find(features.begin(), features.end(), t.spec.feature) - features.begin();
    double v = feat_row(col);
    switch (t.spec.kind) {
      case TermKind::linear:
        out(t.offset) = v;
        break;
      case TermKind::categorical: {
        int lev = match_level(t.levels, v);
        // unseen levels fall back to the baseline (all dummies zero)
        int drop = intercept ? 1 : 0;
        if (lev >= drop) out(t.offset + lev - drop) = 1.0;
        break;
      }
      case TermKind::spline: {
        Eigen::RowVectorXd b = t.basis.eval(v);
        int drop = intercept ? 1 : 0;
        out.segment(t.offset, t.width) = b.segment(drop, t.width);
        break;
      }
    }
  }
  return out;
}

Eigen::MatrixXd NuisanceDesign::expand(const Eigen::MatrixXd& feat) const {
  Eigen::MatrixXd out(feat.rows(), cols);
  for (Eigen::Index i = 0; i < feat.rows(); ++i) out.row(i) = expand_row(feat.row(i));
  return out;
}

Eigen::MatrixXd NuisanceDesign::penalty() const {
  Eigen::MatrixXd pen = Eigen::MatrixXd::Zero(cols, cols);
  for (const auto& t : terms) {
    if (t.spec.kind != TermKind::spline) continue;
    Eigen::MatrixXd full = t.basis.difference_penalty(t.spec.penalty_order);
    int drop = intercept ? 1 : 0;
    pen.block(t.offset, t.offset, t.width, t.width) =
        full.block(drop, drop, t.width, t.width);
  }
  return pen;
}

double HurdleFit::predict_positive_mean(const NuisanceDesign& design,
                                        const Eigen::RowVectorXd& feat_row) const {
  if (all_zero) return 0.0;
  return positive_part.predict(design.expand_row(feat_row));
}

double HurdleFit::predict_mean(const NuisanceDesign& design,
                               const Eigen::RowVectorXd& feat_row) const {
  if (all_zero) return 0.0;
  Eigen::RowVectorXd row = design.expand_row(feat_row);
  return zero_part.predict(row) * positive_part.predict(row);
}

HurdleFit fit_hurdle_mean(const PanelDataset& data, int arm, const NuisanceDesign& design,
                          const Eigen::MatrixXd& feat, const std::vector<double>& lambda_grid) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(data.records.size()); ++i)
    if (data.records[i].availability == 1 && data.records[i].arm == arm) rows.push_back(i);
  if (rows.empty())
    throw_estimation(errc::no_records_for_arm,
                     "no available records with arm " + std::to_string(arm));

  Eigen::MatrixXd x(rows.size(), design.cols);
  Eigen::VectorXd y01(rows.size());
  std::vector<Eigen::Index> pos;
  for (size_t r = 0; r < rows.size(); ++r) {
    x.row(r) = design.expand_row(feat.row(rows[r]));
    long long yv = data.records[rows[r]].outcome;
    y01(r) = yv > 0 ? 1.0 : 0.0;
    if (yv > 0) pos.push_back(rows[r]);
  }

  HurdleFit fit;
  fit.arm = arm;
  if (pos.empty()) {
    fit.all_zero = true;
    return fit;
  }

  Eigen::MatrixXd pen = design.penalty();
  GlmOptions zero_opts;
  zero_opts.link = GlmLink::logit;
  zero_opts.lambda_grid = lambda_grid;
  fit.zero_part = fit_penalized_glm(x, y01, pen, zero_opts);

  Eigen::MatrixXd xp(pos.size(), design.cols);
  Eigen::VectorXd yp(pos.size());
  for (size_t r = 0; r < pos.size(); ++r) {
    xp.row(r) = design.expand_row(feat.row(pos[r]));
    yp(r) = static_cast<double>(data.records[pos[r]].outcome);
  }
  GlmOptions pos_opts;
  pos_opts.link = GlmLink::log;
  pos_opts.lambda_grid = lambda_grid;
  fit.positive_part = fit_penalized_glm(xp, yp, pen, pos_opts);
  return fit;
}

const char* propensity_mode_name(PropensityMode m) {
  switch (m) {
    case PropensityMode::known_prob: return "known-prob";
    case PropensityMode::sample_proportion: return "sample-proportion";
    case PropensityMode::logistic: return "logistic";
    case PropensityMode::spline_logistic: return "spline-logistic";
  }
  return "?";
}

PropensityMode propensity_mode_from_name(const std::string& name) {
  if (name == "known-prob" || name == "known") return PropensityMode::known_prob;
  if (name == "sample-proportion" || name == "sample") return PropensityMode::sample_proportion;
  if (name == "logistic") return PropensityMode::logistic;
  if (name == "spline-logistic") return PropensityMode::spline_logistic;
  throw_input(errc::invalid_config, "unknown propensity mode '" + name + "'");
}

double PropensityFit::predict(const Eigen::RowVectorXd& feat_row, int k) const {
  if (k < 1 || k > k_arms) throw_input(errc::invalid_config, "arm index outside 1..K");
  double p = 0;
  switch (mode) {
    case PropensityMode::known_prob:
      throw_input(errc::invalid_config,
                  "known-prob propensity reads record probabilities, not predictions");
    case PropensityMode::sample_proportion:
      p = sample_prop[k - 1];
      break;
    case PropensityMode::logistic:
    case PropensityMode::spline_logistic:
      p = fit.predict(design.expand_row(feat_row));
      break;
  }
  return std::clamp(p, clip, 1.0 - clip);
}

PropensityFit fit_propensity(const PanelDataset& data, const NuisanceConfig& config) {
  PropensityFit out;
  out.mode = config.propensity;
  out.k_arms = data.k_arms;
  out.clip = config.prob_clip;

  if (config.propensity == PropensityMode::known_prob) {
    if (!data.has_rand_prob)
      throw_input(errc::missing_known_probabilities,
                  "known-prob propensity requested but the data carry no randomization "
                  "probabilities");
    return out;
  }

  std::vector<long long> count(data.k_arms + 1, 0);
  long long available = 0;
  for (const auto& r : data.records) {
    if (r.availability != 1) continue;
    ++available;
    ++count[r.arm];
  }
  if (available == 0) throw_estimation(errc::empty_dataset, "no available records");
  for (int k = 0; k <= data.k_arms; ++k)
    if (count[k] == 0)
      throw_estimation(errc::degenerate_arm,
                       "arm " + std::to_string(k) + " has no available records");
  out.sample_prop.resize(data.k_arms);
  double total = 0;
  for (int k = 1; k <= data.k_arms; ++k) {
    double p = static_cast<double>(count[k]) / static_cast<double>(available);
    p = std::clamp(p, config.prob_clip, 1.0 - config.prob_clip);
    out.sample_prop[k - 1] = p;
    total += p;
  }
  if (total >= 1.0)
    throw_estimation(errc::degenerate_arm, "clipped arm proportions sum past 1");
  if (config.propensity == PropensityMode::sample_proportion) return out;

  // fitted logistic propensity; binary treatment only
  if (data.k_arms != 1)
    throw_input(errc::invalid_config,
                "fitted propensity models support a single treatment arm");
  if (config.propensity_terms.empty())
    throw_input(errc::invalid_config, "fitted propensity needs propensity_terms");

  std::vector<std::string> names;
  for (const auto& t : config.propensity_terms) names.push_back(t.feature);
  Eigen::MatrixXd feat = build_feature_matrix(data, names, config.lag_initial);

  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(data.records.size()); ++i)
    if (data.records[i].availability == 1) rows.push_back(i);
  Eigen::MatrixXd feat_av(rows.size(), feat.cols());
  Eigen::VectorXd a(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    feat_av.row(r) = feat.row(rows[r]);
    a(r) = data.records[rows[r]].arm > 0 ? 1.0 : 0.0;
  }
  out.design = realize_design(feat_av, names, config.propensity_terms, true);
  GlmOptions opts;
  opts.link = GlmLink::logit;
  opts.lambda_grid = config.lambda_grid;
  out.fit = fit_penalized_glm(out.design.expand(feat_av), a, out.design.penalty(), opts);
  return out;
}

NuisanceFit fit_nuisance(const PanelDataset& data, const NuisanceConfig& config) {
  if (config.mean_terms.empty())
    throw_input(errc::invalid_config, "nuisance mean model needs at least one term");
  NuisanceFit out;
  out.lag_initial = config.lag_initial;
  for (const auto& t : config.mean_terms) out.mean_features.push_back(t.feature);
  Eigen::MatrixXd feat = build_feature_matrix(data, out.mean_features, config.lag_initial);

  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(data.records.size()); ++i)
    if (data.records[i].availability == 1) rows.push_back(i);
  if (rows.empty()) throw_estimation(errc::empty_dataset, "no available records");
  Eigen::MatrixXd feat_av(rows.size(), feat.cols());
  for (size_t r = 0; r < rows.size(); ++r) feat_av.row(r) = feat.row(rows[r]);

  out.mean_design = realize_design(feat_av, out.mean_features, config.mean_terms, true);
  std::vector<double> grid =
      config.lambda_grid.empty() ? default_lambda_grid() : config.lambda_grid;
  for (int arm = 0; arm <= data.k_arms; ++arm) {
    out.arms.push_back(fit_hurdle_mean(data, arm, out.mean_design, feat, grid));
    if (out.arms.back().all_zero)
      out.warnings.push_back("arm " + std::to_string(arm) +
                             " outcomes are all zero; its mean is fixed at 0");
  }
  out.propensity = fit_propensity(data, config);
  for (const auto& t : config.propensity_terms) out.prop_features.push_back(t.feature);
  return out;
}

double NuisanceFit::predict_mu(const Eigen::RowVectorXd& mean_feat_row, int arm) const {
  if (arm < 0 || arm >= static_cast<int>(arms.size()))
    throw_input(errc::invalid_config, "arm index out of range");
  return arms[arm].predict_mean(mean_design, mean_feat_row);
}

double NuisanceFit::predict_prob(const Eigen::RowVectorXd& prop_feat_row, int k) const {
  return propensity.predict(prop_feat_row, k);
}

// --- serialization ---------------------------------------------------------

namespace {

using nlohmann::ordered_json;

ordered_json vec_to_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vec_from_json(const ordered_json& a) {
  Eigen::VectorXd v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v(i) = a[i].get<double>();
  return v;
}

ordered_json glm_to_json(const PenalizedGlmFit& f) {
  return ordered_json{{"coef", vec_to_json(f.coef)},
                      {"link", f.link == GlmLink::logit ? "logit" : "log"},
                      {"lambda", f.lambda},
                      {"mu_clip", f.mu_clip},
                      {"eta_clip", f.eta_clip}};
}

PenalizedGlmFit glm_from_json(const ordered_json& j) {
  PenalizedGlmFit f;
  f.coef = vec_from_json(j.at("coef"));
  f.link = j.at("link").get<std::string>() == "logit" ? GlmLink::logit : GlmLink::log;
  f.lambda = j.at("lambda").get<double>();
  f.mu_clip = j.at("mu_clip").get<double>();
  f.eta_clip = j.at("eta_clip").get<double>();
  return f;
}

ordered_json design_to_json(const NuisanceDesign& d) {
  ordered_json terms = ordered_json::array();
  for (const auto& t : d.terms) {
    ordered_json jt{{"feature", t.spec.feature},
                    {"kind", t.spec.kind == TermKind::linear        ? "linear"
                             : t.spec.kind == TermKind::categorical ? "categorical"
                                                                    : "spline"},
                    {"offset", t.offset},
                    {"width", t.width}};
    if (t.spec.kind == TermKind::categorical) jt["levels"] = t.levels;
    if (t.spec.kind == TermKind::spline) {
      jt["n_basis"] = t.spec.n_basis;
      jt["degree"] = t.spec.degree;
      jt["penalty_order"] = t.spec.penalty_order;
      jt["lo"] = t.basis.lo;
      jt["hi"] = t.basis.hi;
    }
    terms.push_back(jt);
  }
  return ordered_json{
      {"features", d.features}, {"intercept", d.intercept}, {"cols", d.cols}, {"terms", terms}};
}

NuisanceDesign design_from_json(const ordered_json& j) {
  NuisanceDesign d;
  d.features = j.at("features").get<std::vector<std::string>>();
  d.intercept = j.at("intercept").get<bool>();
  d.cols = j.at("cols").get<int>();
  for (const auto& jt : j.at("terms")) {
    RealizedTerm t;
    t.spec.feature = jt.at("feature").get<std::string>();
    std::string kind = jt.at("kind").get<std::string>();
    t.spec.kind = kind == "linear"        ? TermKind::linear
                  : kind == "categorical" ? TermKind::categorical
                                          : TermKind::spline;
    t.offset = jt.at("offset").get<int>();
    t.width = jt.at("width").get<int>();
    if (t.spec.kind == TermKind::categorical)
      t.levels = jt.at("levels").get<std::vector<double>>();
    if (t.spec.kind == TermKind::spline) {
      t.spec.n_basis = jt.at("n_basis").get<int>();
      t.spec.degree = jt.at("degree").get<int>();
      t.spec.penalty_order = jt.at("penalty_order").get<int>();
      t.basis = SplineBasis::over_range(jt.at("lo").get<double>(), jt.at("hi").get<double>(),
                                        t.spec.n_basis, t.spec.degree);
    }
    d.terms.push_back(std::move(t));
  }
  return d;
}

}  // namespace

std::string nuisance_to_text(const NuisanceFit& fit) {
  ordered_json arms = ordered_json::array();
  for (const auto& a : fit.arms) {
    ordered_json ja{{"arm", a.arm}, {"all_zero", a.all_zero}};
    if (!a.all_zero) {
      ja["zero_part"] = glm_to_json(a.zero_part);
      ja["positive_part"] = glm_to_json(a.positive_part);
    }
    arms.push_back(ja);
  }
  ordered_json prop{{"mode", propensity_mode_name(fit.propensity.mode)},
                    {"k_arms", fit.propensity.k_arms},
                    {"clip", fit.propensity.clip},
                    {"sample_prop", fit.propensity.sample_prop}};
  if (fit.propensity.mode == PropensityMode::logistic ||
      fit.propensity.mode == PropensityMode::spline_logistic) {
    prop["design"] = design_to_json(fit.propensity.design);
    prop["fit"] = glm_to_json(fit.propensity.fit);
  }
  ordered_json root{{"format", "mrtcount.nuisance"},
                    {"version", 1},
                    {"mean_features", fit.mean_features},
                    {"mean_design", design_to_json(fit.mean_design)},
                    {"arms", arms},
                    {"prop_features", fit.prop_features},
                    {"lag_initial", fit.lag_initial.has_value()
                                        ? ordered_json(*fit.lag_initial)
                                        : ordered_json(nullptr)},
                    {"propensity", prop}};
  return root.dump(2) + "\n";
}

NuisanceFit nuisance_from_text(const std::string& text) {
  ordered_json root = ordered_json::parse(text, nullptr, false);
  if (root.is_discarded() || root.value("format", "") != "mrtcount.nuisance" ||
      root.value("version", 0) != 1)
    throw_input(errc::invalid_config, "not a version-1 mrtcount nuisance file");
  NuisanceFit fit;
  fit.mean_features = root.at("mean_features").get<std::vector<std::string>>();
  fit.mean_design = design_from_json(root.at("mean_design"));
  for (const auto& ja : root.at("arms")) {
    HurdleFit a;
    a.arm = ja.at("arm").get<int>();
    a.all_zero = ja.at("all_zero").get<bool>();
    if (!a.all_zero) {
      a.zero_part = glm_from_json(ja.at("zero_part"));
      a.positive_part = glm_from_json(ja.at("positive_part"));
    }
    fit.arms.push_back(std::move(a));
  }
  fit.prop_features = root.at("prop_features").get<std::vector<std::string>>();
  if (!root.at("lag_initial").is_null())
    fit.lag_initial = root.at("lag_initial").get<double>();
  else
    fit.lag_initial = std::nullopt;
  const auto& jp = root.at("propensity");
  fit.propensity.mode = propensity_mode_from_name(jp.at("mode").get<std::string>());
  fit.propensity.k_arms = jp.at("k_arms").get<int>();
  fit.propensity.clip = jp.at("clip").get<double>();
  fit.propensity.sample_prop = jp.at("sample_prop").get<std::vector<double>>();
  if (fit.propensity.mode == PropensityMode::logistic ||
      fit.propensity.mode == PropensityMode::spline_logistic) {
    fit.propensity.design = design_from_json(jp.at("design"));
    fit.propensity.fit = glm_from_json(jp.at("fit"));
  }
  return fit;
}

}  // namespace mrtcount
