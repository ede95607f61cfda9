#include "mrtcount/spline.hpp"

#include <algorithm>
#include <cmath>

#include "mrtcount/errors.hpp"

namespace mrtcount {

SplineBasis SplineBasis::over_range(double lo, double hi, int n_basis, int degree) {
  if (degree < 0 || degree > 15)
    throw_input(errc::invalid_config, "spline degree outside 0..15");
  if (n_basis < degree + 1)
    throw_input(errc::invalid_config, "spline basis needs at least degree+1 functions");
  SplineBasis b;
  b.degree = degree;
  b.n_basis = n_basis;
  if (!(hi > lo)) hi = lo + 1.0;  // degenerate training range
  b.lo = lo;
  b.hi = hi;
  // clamped knot vector: degree+1 copies at each boundary, uniform interior
  int interior = n_basis - degree - 1;
  b.knots.assign(degree + 1, lo);
  for (int j = 1; j <= interior; ++j)
    b.knots.push_back(lo + (hi - lo) * static_cast<double>(j) / (interior + 1));
  for (int j = 0; j <= degree; ++j) b.knots.push_back(hi);
  return b;
}

SplineBasis SplineBasis::fit(const Eigen::VectorXd& x, int n_basis, int degree) {
  if (x.size() == 0) throw_input(errc::empty_dataset, "no values to place spline knots on");
  return over_range(x.minCoeff(), x.maxCoeff(), n_basis, degree);
}

Eigen::RowVectorXd SplineBasis::eval(double x) const {
  x = std::clamp(x, lo, hi);
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(n_basis);

  // locate the knot span [knots[s], knots[s+1]) containing x
  int s = degree;
  int last = n_basis - 1;  // last valid span start
  while (s < last && x >= knots[s + 1]) ++s;

  // Cox-de Boor triangle on the degree+1 active functions
  double work[16];  // degree is capped at 15 in over_range
  work[0] = 1.0;
  for (int d = 1; d <= degree; ++d) {
    double saved = 0.0;
    for (int r = 0; r < d; ++r) {
      double left = knots[s - d + 1 + r];
      double right = knots[s + 1 + r];
      double term = (right > left) ? work[r] / (right - left) : 0.0;
      work[r] = saved + (right - x) * term;
      saved = (x - left) * term;
    }
    work[d] = saved;
  }
  for (int r = 0; r <= degree; ++r) out(s - degree + r) = work[r];
  return out;
}

Eigen::MatrixXd SplineBasis::eval(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd out(x.size(), n_basis);
  for (Eigen::Index i = 0; i < x.size(); ++i) out.row(i) = eval(x(i));
  return out;
}

Eigen::MatrixXd SplineBasis::difference_penalty(int order) const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(n_basis, n_basis);
  for (int o = 0; o < order; ++o) {
    Eigen::Index rows = d.rows() - 1;
    Eigen::MatrixXd next(rows, n_basis);
    for (Eigen::Index i = 0; i < rows; ++i) next.row(i) = d.row(i + 1) - d.row(i);
    d = next;
  }
  return d.transpose() * d;
}

}  // namespace mrtcount
