#pragma once

#include <Eigen/Dense>
#include <vector>

namespace mrtcount {

// Clamped uniform B-spline basis over the training range [lo, hi].
// Evaluation clamps x into the range first, so extrapolation beyond the
// training data is boundary-constant.
struct SplineBasis {
  int degree = 3;
  int n_basis = 10;
  double lo = 0;
  double hi = 1;
  std::vector<double> knots;  // size n_basis + degree + 1

  static SplineBasis fit(const Eigen::VectorXd& x, int n_basis = 10, int degree = 3);
  static SplineBasis over_range(double lo, double hi, int n_basis = 10, int degree = 3);

  Eigen::RowVectorXd eval(double x) const;
  Eigen::MatrixXd eval(const Eigen::VectorXd& x) const;

  // P = D'D with D the difference operator of the given order on coefficients
  Eigen::MatrixXd difference_penalty(int order = 2) const;
};

}  // namespace mrtcount
