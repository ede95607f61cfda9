#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace mrtcount {

enum class GlmLink { logit, log };

struct GlmOptions {
  GlmLink link = GlmLink::log;
  // scanned when the penalty matrix is nonzero; empty means default grid
  std::vector<double> lambda_grid;
  // prior weights (empty = all ones); normalized to unit mean internally so
  // rescaling every weight by the same constant cannot change the fit
  Eigen::VectorXd weights;
  int max_iter = 100;
  double tol = 1e-8;       // relative deviance change
  double mu_clip = 1e-8;   // logistic fitted-probability clip
  double eta_clip = 30.0;  // log-link linear-predictor clamp
  double ridge = 1e-10;    // keeps the penalized system invertible
};

// nine log-spaced values covering 1e-4 .. 1e4
std::vector<double> default_lambda_grid();

struct PenalizedGlmFit {
  Eigen::VectorXd coef;
  GlmLink link = GlmLink::log;
  double lambda = 0;
  double gcv = 0;
  double edf = 0;
  double deviance = 0;
  int iterations = 0;
  bool degenerate_response = false;  // all-0 or all-1 logistic response
  double mu_clip = 1e-8;
  double eta_clip = 30.0;
  // every (lambda, gcv) pair scanned, in grid order
  std::vector<std::pair<double, double>> gcv_by_lambda;

  double predict(const Eigen::RowVectorXd& design_row) const;
};

// Penalized IRLS with GCV selection of lambda over the grid. `penalty` is a
// PSD matrix on the coefficients (zero rows/columns leave a term unpenalized);
// pass a zero matrix for an unpenalized fit. Throws estimation_error
// (IrlsDiverged) when no grid point converges and (SeparationDetected) when a
// non-degenerate logistic fit pins more than half the fitted probabilities at
// the clip bounds.
PenalizedGlmFit fit_penalized_glm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  const Eigen::MatrixXd& penalty, const GlmOptions& opts = {});

}  // namespace mrtcount
