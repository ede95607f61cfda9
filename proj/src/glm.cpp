#include "mrtcount/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mrtcount/errors.hpp"

namespace mrtcount {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double link_mu(GlmLink link, double eta, const GlmOptions& o) {
  if (link == GlmLink::logit) {
    double p = 1.0 / (1.0 + std::exp(-eta));
    return std::clamp(p, o.mu_clip, 1.0 - o.mu_clip);
  }
  return std::exp(std::clamp(eta, -o.eta_clip, o.eta_clip));
}

double deviance_term(GlmLink link, double y, double mu) {
  if (link == GlmLink::logit) {
    double d = 0;
    if (y > 0) d += y * std::log(y / mu);
    if (y < 1) d += (1 - y) * std::log((1 - y) / (1 - mu));
    return 2 * d;
  }
  double d = -(y - mu);
  if (y > 0) d += y * std::log(y / mu);
  return 2 * d;
}

struct IrlsResult {
  Eigen::VectorXd coef;
  double deviance = kInf;
  double edf = 0;
  int iterations = 0;
  bool converged = false;
};

IrlsResult run_irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& wp, const Eigen::MatrixXd& pen,
                    const GlmOptions& o) {
  const Eigen::Index n = X.rows(), p = X.cols();
  IrlsResult res;
  res.coef = Eigen::VectorXd::Zero(p);

  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  auto deviance_of = [&](const Eigen::VectorXd& e) {
    double dev = 0;
    for (Eigen::Index i = 0; i < n; ++i) dev += wp(i) * deviance_term(o.link, y(i), link_mu(o.link, e(i), o));
    return dev;
  };
  double dev = deviance_of(eta);

  Eigen::MatrixXd xtwx(p, p);
  for (int iter = 1; iter <= o.max_iter; ++iter) {
    Eigen::VectorXd w(n), z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double mu = link_mu(o.link, eta(i), o);
      // canonical links: d(mu)/d(eta) = variance function
      double v = (o.link == GlmLink::logit) ? mu * (1 - mu) : mu;
      v = std::max(v, 1e-12);
      w(i) = wp(i) * v;
      z(i) = eta(i) + (y(i) - mu) / v;
    }
    xtwx.noalias() = X.transpose() * w.asDiagonal() * X;
    Eigen::MatrixXd lhs = xtwx + pen;
    lhs.diagonal().array() += o.ridge;
    Eigen::VectorXd rhs = X.transpose() * (w.asDiagonal() * z);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(lhs);
    if (ldlt.info() != Eigen::Success) return res;
    Eigen::VectorXd coef_new = ldlt.solve(rhs);

    // step halving towards the previous coefficients if deviance worsens
    Eigen::VectorXd coef_old = res.coef;
    double dev_new = kInf;
    for (int h = 0; h <= 20; ++h) {
      Eigen::VectorXd eta_new = X * coef_new;
      dev_new = deviance_of(eta_new);
      if (std::isfinite(dev_new) && dev_new <= dev + 1e-12 * (std::fabs(dev) + 1)) {
        eta = eta_new;
        break;
      }
      coef_new = 0.5 * (coef_new + coef_old);
      if (h == 20) return res;  // no acceptable step
    }
    res.coef = coef_new;
    res.iterations = iter;

    double change = std::fabs(dev - dev_new) / (std::fabs(dev_new) + 0.1);
    dev = dev_new;
    if (change < o.tol) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged) return res;

  // one polish step so deviance-converged coefficients are score-converged too
  {
    Eigen::VectorXd w(n), z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double mu = link_mu(o.link, eta(i), o);
      double v = (o.link == GlmLink::logit) ? mu * (1 - mu) : mu;
      v = std::max(v, 1e-12);
      w(i) = wp(i) * v;
      z(i) = eta(i) + (y(i) - mu) / v;
    }
    xtwx.noalias() = X.transpose() * w.asDiagonal() * X;
    Eigen::MatrixXd lhs = xtwx + pen;
    lhs.diagonal().array() += o.ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(lhs);
    Eigen::VectorXd coef_new = ldlt.solve(X.transpose() * (w.asDiagonal() * z));
    Eigen::VectorXd eta_new = X * coef_new;
    double dev_new = deviance_of(eta_new);
    if (std::isfinite(dev_new) && dev_new <= dev + 1e-10 * (std::fabs(dev) + 1)) {
      res.coef = coef_new;
      eta = eta_new;
      dev = dev_new;
      // edf uses the weights at the accepted coefficients
      for (Eigen::Index i = 0; i < n; ++i) {
        double mu = link_mu(o.link, eta(i), o);
        double v = (o.link == GlmLink::logit) ? mu * (1 - mu) : mu;
        w(i) = wp(i) * std::max(v, 1e-12);
      }
      xtwx.noalias() = X.transpose() * w.asDiagonal() * X;
      lhs = xtwx + pen;
      lhs.diagonal().array() += o.ridge;
      ldlt.compute(lhs);
    }
    res.edf = ldlt.solve(xtwx).trace();
  }
  res.deviance = dev;
  return res;
}

}  // namespace

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 9; ++i) grid.push_back(std::pow(10.0, -4.0 + i));
  return grid;
}

double PenalizedGlmFit::predict(const Eigen::RowVectorXd& row) const {
  double eta = row.dot(coef);
  if (link == GlmLink::logit) {
    double p = 1.0 / (1.0 + std::exp(-eta));
    return std::clamp(p, mu_clip, 1.0 - mu_clip);
  }
  return std::exp(std::clamp(eta, -eta_clip, eta_clip));
}

PenalizedGlmFit fit_penalized_glm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  const Eigen::MatrixXd& penalty, const GlmOptions& opts) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (n == 0) throw_input(errc::empty_dataset, "glm fit on zero rows");
  if (penalty.rows() != p || penalty.cols() != p)
    throw_input(errc::invalid_config, "penalty dimension does not match the design");
  if (opts.weights.size() != 0 && opts.weights.size() != n)
    throw_input(errc::invalid_config, "weight vector length does not match the design");

  Eigen::VectorXd wp = opts.weights.size() ? opts.weights : Eigen::VectorXd::Ones(n);
  if (wp.minCoeff() < 0) throw_input(errc::invalid_config, "negative prior weight");
  double wmean = wp.mean();
  if (wmean <= 0) throw_input(errc::invalid_config, "prior weights sum to zero");
  wp /= wmean;

  bool penalized = penalty.cwiseAbs().maxCoeff() > 0;
  std::vector<double> grid = penalized
                                 ? (opts.lambda_grid.empty() ? default_lambda_grid()
                                                             : opts.lambda_grid)
                                 : std::vector<double>{0.0};

  PenalizedGlmFit best;
  best.link = opts.link;
  best.mu_clip = opts.mu_clip;
  best.eta_clip = opts.eta_clip;
  best.gcv = kInf;
  bool any = false;

  for (double lambda : grid) {
    IrlsResult r = run_irls(X, y, wp, lambda * penalty, opts);
    double gcv = kInf;
    if (r.converged) {
      double denom = static_cast<double>(n) - r.edf;
      if (denom > 1e-8) gcv = static_cast<double>(n) * r.deviance / (denom * denom);
    }
    best.gcv_by_lambda.emplace_back(lambda, gcv);
    if (r.converged && gcv < best.gcv) {
      any = true;
      best.coef = r.coef;
      best.lambda = lambda;
      best.gcv = gcv;
      best.edf = r.edf;
      best.deviance = r.deviance;
      best.iterations = r.iterations;
    }
  }
  if (!any)
    throw_estimation(errc::irls_diverged,
                     "penalized IRLS failed to converge at every lambda on the grid");

  if (opts.link == GlmLink::logit) {
    bool all_zero = (y.array() <= 0).all();
    bool all_one = (y.array() >= 1).all();
    best.degenerate_response = all_zero || all_one;
    if (!best.degenerate_response) {
      Eigen::Index pinned = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        double mu = best.predict(X.row(i));
        if (mu <= opts.mu_clip || mu >= 1.0 - opts.mu_clip) ++pinned;
      }
      if (2 * pinned > n)
        throw_estimation(errc::separation_detected,
                         "fitted probabilities pinned at the clip bounds for " +
                             std::to_string(pinned) + " of " + std::to_string(n) + " rows");
    }
  }
  return best;
}

}  // namespace mrtcount
