#pragma once

#include "hft/types.hpp"

namespace hft {

// PCA whitening: y = projection * (x - mean), projection rows are the top
// eigenvectors of the sample covariance scaled by 1/sqrt(eig + eps_reg).
struct WhiteningTransform {
  Vector mean;
  Matrix projection;   // d x D, rows by descending eigenvalue
  Vector eigenvalues;  // d retained eigenvalues, descending
  double eps_reg = 1e-5;

  Index input_dim() const { return mean.size(); }
  Index output_dim() const { return projection.rows(); }
};

// Either an absolute retained dimension or the smallest d reaching a
// cumulative variance fraction, capped at `max_dim`.
struct WhiteningRule {
  Index fixed_dim = 0;  // > 0 selects an absolute d
  double variance_fraction = 0.99;
  Index max_dim = 256;
  double eps_reg = 1e-5;

  static WhiteningRule absolute(Index d, double eps = 1e-5) { return {d, 0.99, 256, eps}; }
};

// samples: D x n, one sample per column. Needs n >= 2.
WhiteningTransform fit_whitening(const Eigen::Ref<const Matrix>& samples, const WhiteningRule& rule = {});

Vector apply_whitening(const WhiteningTransform& w, const Eigen::Ref<const Vector>& x);
Matrix apply_whitening_columns(const WhiteningTransform& w, const Eigen::Ref<const Matrix>& samples);

// Numerical rank of the sample covariance (eigenvalues above 1e-10 * max).
Index covariance_rank(const Eigen::Ref<const Matrix>& samples);

}  // namespace hft
