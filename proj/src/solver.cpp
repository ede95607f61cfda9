#include "mrtcount/solver.hpp"

#include <cmath>
#include <limits>

#include "mrtcount/errors.hpp"
#include "mrtcount/rng.hpp"

namespace mrtcount {

Eigen::MatrixXd numeric_jacobian(const ScoreFn& f, const Eigen::VectorXd& theta, double scale) {
  Eigen::VectorXd f0 = f(theta);
  Eigen::MatrixXd jac(f0.size(), theta.size());
  Eigen::VectorXd probe = theta;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    double h = scale * (1.0 + std::fabs(theta(j)));
    probe(j) = theta(j) + h;
    jac.col(j) = (f(probe) - f0) / h;
    probe(j) = theta(j);
  }
  return jac;
}

Eigen::MatrixXd numeric_jacobian_central(const ScoreFn& f, const Eigen::VectorXd& theta,
                                         double scale) {
  Eigen::MatrixXd jac(f(theta).size(), theta.size());
  Eigen::VectorXd probe = theta;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    double h = scale * (1.0 + std::fabs(theta(j)));
    probe(j) = theta(j) + h;
    Eigen::VectorXd up = f(probe);
    probe(j) = theta(j) - h;
    Eigen::VectorXd dn = f(probe);
    probe(j) = theta(j);
    jac.col(j) = (up - dn) / (2 * h);
  }
  return jac;
}

namespace {

bool newton_attempt(const ScoreFn& f, Eigen::VectorXd theta, const SolveOptions& o,
                    Eigen::VectorXd* out, SolveDiagnostics* diag) {
  Eigen::VectorXd score = f(theta);
  if (!score.allFinite()) return false;
  double norm = score.norm();
  for (int iter = 1; iter <= o.max_iter; ++iter) {
    if (diag) diag->iterations = iter - 1;
    if (score.lpNorm<Eigen::Infinity>() <= o.tol * (1.0 + theta.lpNorm<Eigen::Infinity>())) {
      *out = theta;
      if (diag) {
        diag->converged = true;
        diag->score_norm = score.lpNorm<Eigen::Infinity>();
      }
      return true;
    }
    Eigen::MatrixXd jac = numeric_jacobian(f, theta, o.jacobian_step);
    if (!jac.allFinite()) return false;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) return false;
    Eigen::VectorXd step = lu.solve(-score);

    bool accepted = false;
    for (int h = 0; h <= o.max_halvings; ++h) {
      Eigen::VectorXd cand = theta + step;
      Eigen::VectorXd cand_score = f(cand);
      double cand_norm = cand_score.allFinite()
                             ? cand_score.norm()
                             : std::numeric_limits<double>::infinity();
      if (cand_norm < norm || cand_norm <= o.tol) {
        theta = cand;
        score = cand_score;
        norm = cand_norm;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) return false;
  }
  // iterations exhausted; accept only if the tolerance is already met
  if (score.lpNorm<Eigen::Infinity>() <= o.tol * (1.0 + theta.lpNorm<Eigen::Infinity>())) {
    *out = theta;
    if (diag) {
      diag->converged = true;
      diag->score_norm = score.lpNorm<Eigen::Infinity>();
    }
    return true;
  }
  return false;
}

}  // namespace

Eigen::VectorXd solve_score(const ScoreFn& f, const Eigen::VectorXd& init,
                            const SolveOptions& opts, SolveDiagnostics* diag) {
  SolveDiagnostics local;
  SolveDiagnostics* d = diag ? diag : &local;
  *d = {};

  Eigen::VectorXd out;
  if (newton_attempt(f, init, opts, &out, d)) return out;

  // deterministic perturbed restarts around the requested start
  for (int r = 1; r <= opts.restarts; ++r) {
    d->restarts_used = r;
    std::mt19937_64 rng = make_rng(opts.restart_seed + static_cast<std::uint64_t>(r));
    std::normal_distribution<double> noise(0.0, 0.5);
    Eigen::VectorXd start = init;
    for (Eigen::Index j = 0; j < start.size(); ++j)
      start(j) += noise(rng) * (1.0 + std::fabs(init(j)));
    if (newton_attempt(f, start, opts, &out, d)) return out;
  }
  throw_estimation(errc::no_convergence,
                   "estimating-equation solver failed after " +
                       std::to_string(opts.restarts) + " perturbed restarts");
}

}  // namespace mrtcount
