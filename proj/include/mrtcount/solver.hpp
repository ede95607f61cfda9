#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

namespace mrtcount {

using ScoreFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct SolveOptions {
  int max_iter = 100;
  int max_halvings = 20;
  // convergence: sup norm of the mean score <= tol * (1 + sup norm of theta)
  double tol = 1e-8;
  int restarts = 5;
  double jacobian_step = 1e-6;
  std::uint64_t restart_seed = 0x5eedb0a7;
};

struct SolveDiagnostics {
  bool converged = false;
  int iterations = 0;
  int restarts_used = 0;
  double score_norm = 0;
};

// forward differences, step 'scale * (1 + |theta_j|)' per coordinate
Eigen::MatrixXd numeric_jacobian(const ScoreFn& f, const Eigen::VectorXd& theta,
                                 double scale = 1e-6);
// central differences; used to cross-check the forward version
Eigen::MatrixXd numeric_jacobian_central(const ScoreFn& f, const Eigen::VectorXd& theta,
                                         double scale = 1e-5);

// Damped Newton on a mean estimating function with numeric Jacobians, step
// halving, and deterministic perturbed restarts. Throws estimation_error
// (NoConvergence) when every restart is exhausted.
Eigen::VectorXd solve_score(const ScoreFn& f, const Eigen::VectorXd& init,
                            const SolveOptions& opts = {}, SolveDiagnostics* diag = nullptr);

}  // namespace mrtcount
