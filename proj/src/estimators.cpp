#include "mrtcount/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mrtcount/gee.hpp"

namespace mrtcount {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// keeps intermediate exponentials finite during wild Newton trial steps
double safe_exp(double x) { return std::exp(std::clamp(x, -60.0, 60.0)); }

}  // namespace

const char* estimator_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::ece: return "ece";
    case EstimatorKind::ece_nonp: return "ece-nonp";
    case EstimatorKind::emee: return "emee";
    case EstimatorKind::emee_nonp: return "emee-nonp";
    case EstimatorKind::dr_emee_nonp: return "dr-emee-nonp";
    case EstimatorKind::gee_ind: return "gee-ind";
    case EstimatorKind::gee_exch: return "gee-exch";
  }
  return "?";
}

EstimatorKind estimator_from_name(const std::string& name) {
  for (EstimatorKind k :
       {EstimatorKind::ece, EstimatorKind::ece_nonp, EstimatorKind::emee,
        EstimatorKind::emee_nonp, EstimatorKind::dr_emee_nonp, EstimatorKind::gee_ind,
        EstimatorKind::gee_exch})
    if (name == estimator_name(k)) return k;
  throw_input(errc::invalid_config, "unknown estimator '" + name + "'");
}

bool estimator_is_gee(EstimatorKind k) {
  return k == EstimatorKind::gee_ind || k == EstimatorKind::gee_exch;
}

bool estimator_is_conditional(EstimatorKind k) {
  return k == EstimatorKind::ece || k == EstimatorKind::ece_nonp;
}

// --- pointwise pieces -------------------------------------------------------

double blip_down(double y, int a, double effect) { return y * safe_exp(-a * effect); }

double weight_w(double ptilde, double p, int arm) {
  return arm ? ptilde / p : (1.0 - ptilde) / (1.0 - p);
}

double weight_w(const Eigen::RowVectorXd& ptilde, const Eigen::RowVectorXd& p, int arm) {
  if (arm > 0) return ptilde(arm - 1) / p(arm - 1);
  return (1.0 - ptilde.sum()) / (1.0 - p.sum());
}

double weight_ktilde(double f_dot_phi, double p) {
  double e = safe_exp(f_dot_phi);
  return -e / (e * p + (1.0 - p));
}

double h_marginal(double mu1, double mu0, double ptilde, double s_dot_beta) {
  return mu1 * safe_exp(-s_dot_beta) * ptilde + mu0 * (1.0 - ptilde);
}

double h_marginal(const Eigen::RowVectorXd& mu, const Eigen::RowVectorXd& ptilde,
                  const Eigen::RowVectorXd& exp_neg_effect) {
  double h = mu(0) * (1.0 - ptilde.sum());
  for (Eigen::Index k = 0; k < ptilde.size(); ++k)
    h += mu(k + 1) * exp_neg_effect(k) * ptilde(k);
  return h;
}

// --- score assembly ---------------------------------------------------------

namespace {

// exp(-S_i' beta_k) for every record and arm; beta holds the per-arm blocks
// stacked in arm order
Eigen::MatrixXd exp_neg_effects(const Eigen::MatrixXd& S, const Eigen::VectorXd& beta,
                                int k_arms) {
  Eigen::Index p = S.cols();
  Eigen::MatrixXd out(S.rows(), k_arms);
  for (int k = 0; k < k_arms; ++k) {
    Eigen::VectorXd eff = S * beta.segment(k * p, p);
    out.col(k) = eff.unaryExpr([](double v) { return safe_exp(-v); });
  }
  return out;
}

void check_dim(const ScoreContext& ctx, const Eigen::VectorXd& theta, Eigen::Index expected,
               const char* who, bool needs_mu) {
  if (theta.size() != expected)
    throw_input(errc::invalid_config,
                std::string(who) + ": parameter length " + std::to_string(theta.size()) +
                    ", expected " + std::to_string(expected));
  const Eigen::Index n = ctx.records();
  const int K = ctx.k_arms;
  auto fail = [&](const char* what) {
    throw_input(errc::invalid_config,
                std::string(who) + ": context field " + what + " has the wrong shape");
  };
  if (K < 1) fail("k_arms");
  if (ctx.arm.size() != n || ctx.avail.size() != n) fail("arm/avail");
  if (ctx.S.rows() != n) fail("S");
  if (ctx.prob.rows() != n || ctx.prob.cols() != K) fail("prob");
  if (ctx.ptilde.rows() != n || ctx.ptilde.cols() != K) fail("ptilde");
  if (needs_mu && (ctx.mu.rows() != n || ctx.mu.cols() != K + 1)) fail("mu");
  if (!needs_mu && ctx.G.rows() != n) fail("G");
}

}  // namespace

Eigen::MatrixXd score_emee_nonp(const ScoreContext& ctx, const Eigen::VectorXd& beta) {
  const Eigen::Index n = ctx.records(), p = ctx.S.cols();
  const int K = ctx.k_arms;
  check_dim(ctx, beta, p * K, "emee-nonp", true);
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(n, p * K);
  Eigen::MatrixXd eneg = exp_neg_effects(ctx.S, beta, K);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (ctx.avail(i) == 0) continue;
    int a = ctx.arm(i);
    double u = ctx.y(i) * (a > 0 ? eneg(i, a - 1) : 1.0);
    double h = h_marginal(ctx.mu.row(i), ctx.ptilde.row(i), eneg.row(i));
    double w = weight_w(ctx.ptilde.row(i), ctx.prob.row(i), a);
    double base = w * (u - h);
    for (int k = 1; k <= K; ++k) {
      double centered = (a == k ? 1.0 : 0.0) - ctx.ptilde(i, k - 1);
      rows.row(i).segment((k - 1) * p, p) = base * centered * ctx.S.row(i);
    }
  }
  return rows;
}

Eigen::MatrixXd score_dr_emee_nonp(const ScoreContext& ctx, const Eigen::VectorXd& beta) {
  const Eigen::Index n = ctx.records(), p = ctx.S.cols();
  const int K = ctx.k_arms;
  check_dim(ctx, beta, p * K, "dr-emee-nonp", true);
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(n, p * K);
  Eigen::MatrixXd eneg = exp_neg_effects(ctx.S, beta, K);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (ctx.avail(i) == 0) continue;
    int a = ctx.arm(i);
    double u = ctx.y(i) * (a > 0 ? eneg(i, a - 1) : 1.0);
    // the observed arm's modeled mean, blipped the same way as the outcome
    double mu_a = a > 0 ? ctx.mu(i, a) * eneg(i, a - 1) : ctx.mu(i, 0);
    double w = weight_w(ctx.ptilde.row(i), ctx.prob.row(i), a);
    double base = w * (u - mu_a);
    for (int k = 1; k <= K; ++k) {
      double pk = ctx.ptilde(i, k - 1);
      double centered = (a == k ? 1.0 : 0.0) - pk;
      // augmentation: pairs the arm-k contrast with every other arm so the
      // fitted-mean dependence cancels exactly when the propensities are right
      double aug = pk * (1.0 - pk) * (ctx.mu(i, k) * eneg(i, k - 1) - ctx.mu(i, 0));
      for (int j = 1; j <= K; ++j) {
        if (j == k) continue;
        double pj = ctx.ptilde(i, j - 1);
        aug -= pk * pj * (ctx.mu(i, j) * eneg(i, j - 1) - ctx.mu(i, 0));
      }
      rows.row(i).segment((k - 1) * p, p) = (base * centered + aug) * ctx.S.row(i);
    }
  }
  return rows;
}

Eigen::MatrixXd score_ece_nonp(const ScoreContext& ctx, const Eigen::VectorXd& phi) {
  if (ctx.k_arms != 1)
    throw_input(errc::invalid_config, "conditional-effect estimators are binary-treatment only");
  const Eigen::Index n = ctx.records(), p = ctx.S.cols();
  check_dim(ctx, phi, p, "ece-nonp", true);
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (ctx.avail(i) == 0) continue;
    int a = ctx.arm(i);
    double eff = ctx.S.row(i).dot(phi);
    double e = safe_exp(-eff);
    double pt = ctx.prob(i, 0);
    double u = ctx.y(i) * (a > 0 ? e : 1.0);
    double h = ctx.mu(i, 1) * e * pt + ctx.mu(i, 0) * (1.0 - pt);
    double kt = weight_ktilde(eff, pt);
    rows.row(i) = ctx.avail(i) * kt * (u - h) * (a - pt) * ctx.S.row(i);
  }
  return rows;
}

Eigen::MatrixXd score_emee(const Eigen::MatrixXd& G, const ScoreContext& ctx,
                           const Eigen::VectorXd& alpha_beta) {
  const Eigen::Index n = ctx.records(), p = ctx.S.cols(), q = G.cols();
  const int K = ctx.k_arms;
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(n, q + p * K);
  Eigen::VectorXd alpha = alpha_beta.head(q);
  Eigen::MatrixXd eneg = exp_neg_effects(ctx.S, alpha_beta.tail(p * K), K);
  Eigen::VectorXd ga = G * alpha;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (ctx.avail(i) == 0) continue;
    int a = ctx.arm(i);
    double u = ctx.y(i) * (a > 0 ? eneg(i, a - 1) : 1.0);
    double resid = u - safe_exp(ga(i));
    double w = weight_w(ctx.ptilde.row(i), ctx.prob.row(i), a);
    double base = w * resid;
    rows.row(i).head(q) = base * G.row(i);
    for (int k = 1; k <= K; ++k) {
      double centered = (a == k ? 1.0 : 0.0) - ctx.ptilde(i, k - 1);
      rows.row(i).segment(q + (k - 1) * p, p) = base * centered * ctx.S.row(i);
    }
  }
  return rows;
}

Eigen::MatrixXd score_emee(const ScoreContext& ctx, const Eigen::VectorXd& alpha_beta) {
  check_dim(ctx, alpha_beta, ctx.G.cols() + ctx.S.cols() * ctx.k_arms, "emee", false);
  return score_emee(ctx.G, ctx, alpha_beta);
}

Eigen::MatrixXd score_ece(const ScoreContext& ctx, const Eigen::VectorXd& alpha_phi) {
  if (ctx.k_arms != 1)
    throw_input(errc::invalid_config, "conditional-effect estimators are binary-treatment only");
  const Eigen::Index n = ctx.records(), p = ctx.S.cols(), q = ctx.G.cols();
  check_dim(ctx, alpha_phi, q + p, "ece", false);
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(n, q + p);
  Eigen::VectorXd alpha = alpha_phi.head(q);
  Eigen::VectorXd phi = alpha_phi.tail(p);
  Eigen::VectorXd ga = ctx.G * alpha;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (ctx.avail(i) == 0) continue;
    int a = ctx.arm(i);
    double eff = ctx.S.row(i).dot(phi);
    double pt = ctx.prob(i, 0);
    double u = ctx.y(i) * (a > 0 ? safe_exp(-eff) : 1.0);
    double resid = u - safe_exp(ga(i));
    double kt = weight_ktilde(eff, pt);
    rows.row(i).head(q) = kt * resid * ctx.G.row(i);
    rows.row(i).tail(p) = kt * resid * (a - pt) * ctx.S.row(i);
  }
  return rows;
}

Eigen::MatrixXd score_rows(EstimatorKind k, const ScoreContext& ctx,
                           const Eigen::VectorXd& theta) {
  switch (k) {
    case EstimatorKind::emee_nonp: return score_emee_nonp(ctx, theta);
    case EstimatorKind::dr_emee_nonp: return score_dr_emee_nonp(ctx, theta);
    case EstimatorKind::ece_nonp: return score_ece_nonp(ctx, theta);
    case EstimatorKind::emee: return score_emee(ctx, theta);
    case EstimatorKind::ece: return score_ece(ctx, theta);
    default:
      throw_input(errc::invalid_config, "score_rows does not cover the GEE estimators");
  }
}

// --- sandwich covariance ----------------------------------------------------

Eigen::MatrixXd sandwich_cov(const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& rows,
                             const Eigen::VectorXd& theta, const std::vector<int>& cluster,
                             const SandwichOptions& opts) {
  Eigen::MatrixXd at_theta = rows(theta);
  const Eigen::Index n = at_theta.rows(), d = at_theta.cols();
  if (n == 0) throw_input(errc::empty_dataset, "sandwich over zero records");

  ScoreFn mean_score = [&rows, n](const Eigen::VectorXd& th) {
    return Eigen::VectorXd(rows(th).colwise().mean());
  };
  Eigen::MatrixXd bread_inv = numeric_jacobian(mean_score, theta, opts.jacobian_step);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(bread_inv);
  if (!lu.isInvertible())
    throw_estimation(errc::singular_bread, "mean-score Jacobian is rank deficient");

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(d, d);
  if (opts.meat == MeatMode::per_record) {
    meat = at_theta.transpose() * at_theta;
  } else {
    if (cluster.size() != static_cast<size_t>(n))
      throw_input(errc::invalid_config, "cluster labels do not cover every record");
    int max_c = *std::max_element(cluster.begin(), cluster.end());
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(max_c + 1, d);
    for (Eigen::Index i = 0; i < n; ++i) sums.row(cluster[i]) += at_theta.row(i);
    meat = sums.transpose() * sums;
  }
  meat /= static_cast<double>(n) * static_cast<double>(n);

  Eigen::MatrixXd binv = lu.inverse();
  Eigen::MatrixXd cov = binv * meat * binv.transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.eigenvalues().minCoeff() < -1e-10)
    throw_estimation(errc::non_psd_covariance,
                     "sandwich covariance has eigenvalue " +
                         std::to_string(eig.eigenvalues().minCoeff()));
  if (eig.eigenvalues().minCoeff() < 0) {
    Eigen::VectorXd clamped = eig.eigenvalues().cwiseMax(0.0);
    cov = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  }
  return cov;
}

// --- orchestration ----------------------------------------------------------

namespace {

std::vector<double> sample_arm_proportions(const PanelDataset& data, double clip) {
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
  std::vector<double> p(data.k_arms);
  for (int k = 1; k <= data.k_arms; ++k)
    p[k - 1] = std::clamp(
        static_cast<double>(count[k]) / static_cast<double>(available), clip, 1.0 - clip);
  return p;
}

std::vector<std::string> effect_labels(const std::vector<std::string>& s_labels, int k_arms) {
  if (k_arms == 1) return s_labels;
  std::vector<std::string> out;
  for (int k = 1; k <= k_arms; ++k)
    for (const auto& l : s_labels) out.push_back("arm" + std::to_string(k) + ":" + l);
  return out;
}

// fold index per participant for the optional split-sample nuisance fits
std::vector<int> fold_of_participant(int n) {
  std::vector<int> fold(n);
  for (int g = 0; g < n; ++g) fold[g] = g % 2;
  return fold;
}

}  // namespace

EstimateReport estimate(const PanelDataset& data, const EstimandSpec& spec) {
  return estimate(data, spec, NuisanceOverride{});
}

EstimateReport estimate(const PanelDataset& data, const EstimandSpec& spec,
                        const NuisanceOverride& over) {
  if (data.records.empty()) throw_input(errc::empty_dataset, "no records");
  if (estimator_is_gee(spec.estimator))
    return fit_gee(data, spec.model,
                   spec.estimator == EstimatorKind::gee_exch ? GeeCorr::exchangeable
                                                             : GeeCorr::independence,
                   spec.t_critical);

  const int K = data.k_arms;
  if (estimator_is_conditional(spec.estimator) && K != 1)
    throw_input(errc::invalid_config,
                "conditional-effect estimators are binary-treatment only");

  DesignBundle design = build_design(data, spec.model);
  const Eigen::Index p = design.S.cols();
  if (p == 0) throw_input(errc::invalid_config, "no moderator features");
  const Eigen::Index n = static_cast<Eigen::Index>(data.records.size());

  bool parametric =
      spec.estimator == EstimatorKind::ece || spec.estimator == EstimatorKind::emee;
  bool hurdle_family = spec.estimator == EstimatorKind::ece_nonp ||
                       spec.estimator == EstimatorKind::emee_nonp ||
                       spec.estimator == EstimatorKind::dr_emee_nonp;

  EstimateReport report;
  report.estimator = estimator_name(spec.estimator);

  // every arm must appear among available records before anything is fit
  std::vector<double> sample_prop = sample_arm_proportions(data, spec.nuisance.prob_clip);

  // all-zero data pin the effect at zero with no finite standard error
  bool any_positive = false;
  for (const auto& r : data.records)
    if (r.availability == 1 && r.outcome > 0) any_positive = true;

  std::vector<std::string> labels = effect_labels(design.s_labels, K);
  Eigen::Index dim_effect = p * K;
  Eigen::Index dim = dim_effect;
  if (parametric) {
    dim += design.G.cols();
    std::vector<std::string> full;
    for (const auto& l : design.g_labels) full.push_back("ctrl:" + l);
    full.insert(full.end(), labels.begin(), labels.end());
    labels = full;
  }
  report.labels = labels;
  report.effect_offset = parametric ? static_cast<int>(design.G.cols()) : 0;
  report.effect_dim = static_cast<int>(dim_effect);

  if (!any_positive) {
    report.all_zero_outcomes = true;
    report.estimates = Eigen::VectorXd::Zero(dim);
    report.cov = Eigen::MatrixXd::Constant(dim, dim, kInf);
    report.warnings.push_back("all available outcomes are zero; estimate pinned at 0");
    finish_inference(report, data.record_count(), spec.t_critical);
    return report;
  }

  ScoreContext ctx;
  ctx.S = design.S;
  ctx.y.resize(n);
  ctx.avail.resize(n);
  ctx.arm.resize(n);
  ctx.cluster.resize(n);
  ctx.k_arms = K;
  for (Eigen::Index i = 0; i < n; ++i) {
    const DecisionRecord& r = data.records[i];
    ctx.y(i) = static_cast<double>(r.outcome);
    ctx.avail(i) = r.availability;
    ctx.arm(i) = r.arm;
    ctx.cluster[i] = r.participant;
  }

  if (parametric) {
    ctx.G = design.G;
    if (ctx.G.cols() == 0) throw_input(errc::invalid_config, "no control features");
    Eigen::MatrixXd g_av = ctx.G;
    for (Eigen::Index i = 0; i < n; ++i)
      if (ctx.avail(i) == 0) g_av.row(i).setZero();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(g_av.transpose() * g_av);
    if (!lu.isInvertible())
      throw_estimation(errc::rank_deficient_controls,
                       "control features are collinear on the available records");
  }

  // numerator probabilities: fixed overrides or the availability-weighted
  // sample proportions
  Eigen::RowVectorXd ptilde_row(K);
  if (spec.ptilde.use_fixed) {
    if (spec.ptilde.fixed.size() != static_cast<size_t>(K))
      throw_input(errc::invalid_config, "fixed ptilde needs one probability per arm");
    double total = 0;
    for (int k = 0; k < K; ++k) {
      double v = spec.ptilde.fixed[k];
      if (!(v > 0 && v < 1))
        throw_input(errc::probability_out_of_range, "fixed ptilde outside (0, 1)");
      ptilde_row(k) = v;
      total += v;
    }
    if (total >= 1.0)
      throw_input(errc::probability_out_of_range, "fixed ptilde sums past 1");
  } else {
    for (int k = 0; k < K; ++k) ptilde_row(k) = sample_prop[k];
  }
  ctx.ptilde = ptilde_row.replicate(n, 1);

  // denominator probabilities: an explicit override wins, then stored
  // randomization probabilities, then the configured propensity model
  ctx.prob.resize(n, K);
  std::optional<NuisanceFit> prop_holder;
  if (over.prob) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (int k = 1; k <= K; ++k) ctx.prob(i, k - 1) = over.prob(data.records[i], k);
  } else if (data.has_rand_prob) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (int k = 1; k <= K; ++k) ctx.prob(i, k - 1) = data.records[i].rand_prob[k - 1];
  } else {
    if (spec.nuisance.propensity == PropensityMode::known_prob)
      throw_input(errc::missing_known_probabilities,
                  "data carry no randomization probabilities; configure a propensity model");
    PropensityFit pf = fit_propensity(data, spec.nuisance);
    if (pf.mode == PropensityMode::sample_proportion) {
      for (Eigen::Index i = 0; i < n; ++i)
        for (int k = 1; k <= K; ++k) ctx.prob(i, k - 1) = pf.sample_prop[k - 1];
    } else {
      std::vector<std::string> names;
      for (const auto& t : spec.nuisance.propensity_terms) names.push_back(t.feature);
      Eigen::MatrixXd feat = build_feature_matrix(data, names, spec.nuisance.lag_initial);
      for (Eigen::Index i = 0; i < n; ++i) ctx.prob(i, 0) = pf.predict(feat.row(i), 1);
    }
  }

  // fitted means for the hurdle family
  if (hurdle_family) {
    ctx.mu.resize(n, K + 1);
    if (over.mu) {
      for (Eigen::Index i = 0; i < n; ++i)
        for (int a = 0; a <= K; ++a) ctx.mu(i, a) = over.mu(data.records[i], a);
    } else if (!spec.two_fold) {
      NuisanceFit fit = fit_nuisance(data, spec.nuisance);
      report.warnings.insert(report.warnings.end(), fit.warnings.begin(), fit.warnings.end());
      Eigen::MatrixXd feat =
          build_feature_matrix(data, fit.mean_features, spec.nuisance.lag_initial);
      for (Eigen::Index i = 0; i < n; ++i)
        for (int a = 0; a <= K; ++a) ctx.mu(i, a) = fit.predict_mu(feat.row(i), a);
    } else {
      // split-sample fits: each participant's means come from the fold that
      // excludes them
      std::vector<int> fold = fold_of_participant(data.n());
      std::vector<int> keep0, keep1;
      for (int g = 0; g < data.n(); ++g) (fold[g] == 0 ? keep0 : keep1).push_back(g);
      PanelDataset d0 = subset_participants(data, keep0);
      PanelDataset d1 = subset_participants(data, keep1);
      NuisanceFit f0 = fit_nuisance(d0, spec.nuisance);
      NuisanceFit f1 = fit_nuisance(d1, spec.nuisance);
      report.warnings.insert(report.warnings.end(), f0.warnings.begin(), f0.warnings.end());
      report.warnings.insert(report.warnings.end(), f1.warnings.begin(), f1.warnings.end());
      Eigen::MatrixXd feat =
          build_feature_matrix(data, f0.mean_features, spec.nuisance.lag_initial);
      for (Eigen::Index i = 0; i < n; ++i) {
        const NuisanceFit& other = fold[data.records[i].participant] == 0 ? f1 : f0;
        for (int a = 0; a <= K; ++a) ctx.mu(i, a) = other.predict_mu(feat.row(i), a);
      }
    }
  }

  ScoreFn mean_score = [&ctx, kind = spec.estimator](const Eigen::VectorXd& th) {
    return Eigen::VectorXd(score_rows(kind, ctx, th).colwise().mean());
  };
  SolveDiagnostics diag;
  Eigen::VectorXd theta =
      solve_score(mean_score, Eigen::VectorXd::Zero(dim), spec.solve, &diag);
  report.solver_iterations = diag.iterations;
  report.solver_restarts = diag.restarts_used;
  report.score_norm = diag.score_norm;

  SandwichOptions sw;
  sw.meat = spec.meat;
  sw.jacobian_step = spec.solve.jacobian_step;
  report.cov = sandwich_cov(
      [&ctx, kind = spec.estimator](const Eigen::VectorXd& th) {
        return score_rows(kind, ctx, th);
      },
      theta, ctx.cluster, sw);
  report.estimates = theta;
  finish_inference(report, data.record_count(), spec.t_critical);
  return report;
}

}  // namespace mrtcount
