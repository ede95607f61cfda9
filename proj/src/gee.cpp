#include "mrtcount/gee.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mrtcount/errors.hpp"

namespace mrtcount {

namespace {

constexpr double kEtaClip = 30.0;
constexpr int kMaxIter = 100;
constexpr double kTol = 1e-8;

struct GeeData {
  Eigen::MatrixXd X;  // available records only
  Eigen::VectorXd y;
  std::vector<std::pair<int, int>> spans;  // per cluster [begin, end) into rows
};

Eigen::VectorXd mu_of(const GeeData& d, const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = d.X * beta;
  return eta.unaryExpr(
      [](double e) { return std::exp(std::clamp(e, -kEtaClip, kEtaClip)); });
}

// independence-working-model fit; also the initializer for the exchangeable
// scoring loop
Eigen::VectorXd fit_independence(const GeeData& d) {
  const Eigen::Index dim = d.X.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(dim);
  for (int it = 0; it < kMaxIter; ++it) {
    Eigen::VectorXd mu = mu_of(d, beta);
    Eigen::MatrixXd h = d.X.transpose() * mu.asDiagonal() * d.X;
    Eigen::VectorXd u = d.X.transpose() * (d.y - mu);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(h);
    if (!lu.isInvertible())
      throw_estimation(errc::rank_deficient_controls,
                       "working-model information matrix is singular");
    Eigen::VectorXd step = lu.solve(u);
    beta += step;
    if (step.cwiseAbs().maxCoeff() < kTol * (1.0 + beta.cwiseAbs().maxCoeff())) return beta;
  }
  throw_estimation(errc::no_convergence, "independence working model did not converge");
}

struct Moments {
  double alpha = 0;
  double dispersion = 1;
};

Moments moment_estimates(const GeeData& d, const Eigen::VectorXd& mu, Eigen::Index dim) {
  const Eigen::Index n = d.y.size();
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) r(i) = (d.y(i) - mu(i)) / std::sqrt(mu(i));
  Moments m;
  double denom_phi = static_cast<double>(n) - static_cast<double>(dim);
  if (denom_phi <= 0) return m;
  m.dispersion = r.squaredNorm() / denom_phi;

  double cross = 0, pairs = 0;
  int m_max = 1;
  for (const auto& sp : d.spans) {
    int mi = sp.second - sp.first;
    m_max = std::max(m_max, mi);
    if (mi < 2) continue;
    double s = r.segment(sp.first, mi).sum();
    double ss = r.segment(sp.first, mi).squaredNorm();
    cross += 0.5 * (s * s - ss);
    pairs += 0.5 * mi * (mi - 1);
  }
  double denom = (pairs - static_cast<double>(dim)) * m.dispersion;
  if (denom > 0 && pairs > 0) m.alpha = cross / denom;
  double lo = m_max > 1 ? -1.0 / (m_max - 1) + 1e-6 : 0.0;
  m.alpha = std::clamp(m.alpha, lo, 0.99);
  return m;
}

}  // namespace

EstimateReport fit_gee(const PanelDataset& data, const EffectModelSpec& model, GeeCorr corr,
                       bool t_critical) {
  if (data.records.empty()) throw_input(errc::empty_dataset, "no records");
  const int K = data.k_arms;

  DesignBundle design = build_design(data, model);
  const Eigen::Index p = design.S.cols(), q = design.G.cols();
  if (p == 0) throw_input(errc::invalid_config, "no moderator features");
  if (q == 0) throw_input(errc::invalid_config, "no control features");
  const Eigen::Index dim = q + p * K;

  // every arm must appear among available records
  std::vector<long long> arm_count(K + 1, 0);
  for (const auto& r : data.records)
    if (r.availability == 1) ++arm_count[r.arm];
  for (int k = 0; k <= K; ++k)
    if (arm_count[k] == 0)
      throw_estimation(errc::degenerate_arm,
                       "arm " + std::to_string(k) + " has no available records");

  GeeData d;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(data.records.size()); ++i)
    if (data.records[i].availability == 1) rows.push_back(i);
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  d.X.resize(m, dim);
  d.y.resize(m);
  {
    Eigen::Index at = 0;
    for (int g = 0; g < data.n(); ++g) {
      Eigen::Index begin = at;
      for (int i = data.groups[g].first; i < data.groups[g].second; ++i) {
        const DecisionRecord& r = data.records[i];
        if (r.availability != 1) continue;
        d.X.row(at).head(q) = design.G.row(i);
        for (int k = 1; k <= K; ++k)
          d.X.row(at).segment(q + (k - 1) * p, p) =
              (r.arm == k ? 1.0 : 0.0) * design.S.row(i);
        d.y(at) = static_cast<double>(r.outcome);
        ++at;
      }
      if (at > begin) d.spans.push_back({static_cast<int>(begin), static_cast<int>(at)});
    }
  }

  EstimateReport report;
  report.estimator = corr == GeeCorr::independence ? "gee-ind" : "gee-exch";
  for (const auto& l : design.g_labels) report.labels.push_back("ctrl:" + l);
  if (K == 1) {
    report.labels.insert(report.labels.end(), design.s_labels.begin(), design.s_labels.end());
  } else {
    for (int k = 1; k <= K; ++k)
      for (const auto& l : design.s_labels)
        report.labels.push_back("arm" + std::to_string(k) + ":" + l);
  }
  report.effect_offset = static_cast<int>(q);
  report.effect_dim = static_cast<int>(p * K);

  if (d.y.maxCoeff() <= 0) {
    report.all_zero_outcomes = true;
    report.estimates = Eigen::VectorXd::Zero(dim);
    report.cov =
        Eigen::MatrixXd::Constant(dim, dim, std::numeric_limits<double>::infinity());
    report.warnings.push_back("all available outcomes are zero; estimate pinned at 0");
    finish_inference(report, data.record_count(), t_critical);
    return report;
  }

  {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(d.X.transpose() * d.X);
    if (!lu.isInvertible())
      throw_estimation(errc::rank_deficient_controls,
                       "working-model regressors are collinear on the available records");
  }

  Eigen::VectorXd beta = fit_independence(d);
  double alpha = 0;

  if (corr == GeeCorr::exchangeable) {
    bool converged = false;
    for (int it = 0; it < kMaxIter; ++it) {
      Eigen::VectorXd mu = mu_of(d, beta);
      alpha = moment_estimates(d, mu, dim).alpha;
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
      Eigen::VectorXd u = Eigen::VectorXd::Zero(dim);
      for (const auto& sp : d.spans) {
        int mi = sp.second - sp.first;
        double tail = alpha / ((1.0 - alpha) * (1.0 + (mi - 1) * alpha));
        Eigen::VectorXd root = mu.segment(sp.first, mi).cwiseSqrt();
        // Q = A^{1/2} X over the cluster; exchangeable inverse applied in
        // closed form through Q'Q and the row sum of Q
        Eigen::MatrixXd Q =
            root.asDiagonal() * d.X.middleRows(sp.first, mi);
        Eigen::VectorXd q_sum = Q.colwise().sum();
        Eigen::VectorXd pr(mi);
        for (int t = 0; t < mi; ++t)
          pr(t) = (d.y(sp.first + t) - mu(sp.first + t)) / root(t);
        h += Q.transpose() * Q / (1.0 - alpha) - tail * (q_sum * q_sum.transpose());
        u += Q.transpose() * pr / (1.0 - alpha) - tail * q_sum * pr.sum();
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(h);
      if (!lu.isInvertible())
        throw_estimation(errc::rank_deficient_controls,
                         "working-model information matrix is singular");
      Eigen::VectorXd step = lu.solve(u);
      beta += step;
      if (step.cwiseAbs().maxCoeff() < kTol * (1.0 + beta.cwiseAbs().maxCoeff())) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw_estimation(errc::no_convergence, "exchangeable scoring did not converge");
  }

  // cluster-robust sandwich at the final working correlation
  Eigen::VectorXd mu = mu_of(d, beta);
  Eigen::MatrixXd bread = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd u_total = Eigen::VectorXd::Zero(dim);
  for (const auto& sp : d.spans) {
    int mi = sp.second - sp.first;
    double tail = alpha == 0 ? 0.0 : alpha / ((1.0 - alpha) * (1.0 + (mi - 1) * alpha));
    Eigen::VectorXd root = mu.segment(sp.first, mi).cwiseSqrt();
    Eigen::MatrixXd Q = root.asDiagonal() * d.X.middleRows(sp.first, mi);
    Eigen::VectorXd q_sum = Q.colwise().sum();
    Eigen::VectorXd pr(mi);
    for (int t = 0; t < mi; ++t)
      pr(t) = (d.y(sp.first + t) - mu(sp.first + t)) / root(t);
    bread += Q.transpose() * Q / (1.0 - alpha) - tail * (q_sum * q_sum.transpose());
    Eigen::VectorXd g = Q.transpose() * pr / (1.0 - alpha) - tail * q_sum * pr.sum();
    meat += g * g.transpose();
    u_total += g;
  }
  report.score_norm = (u_total / static_cast<double>(m)).cwiseAbs().maxCoeff();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(bread);
  if (!lu.isInvertible())
    throw_estimation(errc::singular_bread, "sandwich bread is singular");
  Eigen::MatrixXd binv = lu.inverse();
  Eigen::MatrixXd cov = binv * meat * binv.transpose();
  report.cov = 0.5 * (cov + cov.transpose());
  report.estimates = beta;
  finish_inference(report, data.record_count(), t_critical);
  return report;
}

}  // namespace mrtcount
