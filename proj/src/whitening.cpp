#include "hft/whitening.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace hft {

namespace {

struct Spectrum {
  Vector values;   // descending
  Matrix vectors;  // columns match values
  Index rank = 0;
};

Matrix covariance(const Eigen::Ref<const Matrix>& samples, const Vector& mean) {
  const Matrix centered = samples.colwise() - mean;
  return centered * centered.transpose() / static_cast<double>(samples.cols());
}

Spectrum spectrum(const Matrix& cov) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("covariance eigendecomposition failed");
  const Index n = cov.rows();
  Spectrum s;
  s.values = solver.eigenvalues().reverse();
  s.vectors = solver.eigenvectors().rowwise().reverse();
  for (Index c = 0; c < n; ++c) {
    // Sign convention: the largest-magnitude entry of each eigenvector is positive.
    Index arg = 0;
    s.vectors.col(c).cwiseAbs().maxCoeff(&arg);
    if (s.vectors(arg, c) < 0.0) s.vectors.col(c) = -s.vectors.col(c);
  }
  const double top = n > 0 ? std::max(s.values(0), 0.0) : 0.0;
  for (Index i = 0; i < n; ++i)
    if (s.values(i) > 1e-10 * top && s.values(i) > 0.0) ++s.rank;
  return s;
}

}  // namespace

Index covariance_rank(const Eigen::Ref<const Matrix>& samples) {
  const Vector mean = samples.rowwise().mean();
  return spectrum(covariance(samples, mean)).rank;
}

WhiteningTransform fit_whitening(const Eigen::Ref<const Matrix>& samples, const WhiteningRule& rule) {
  if (samples.cols() < 2)
    throw DataError("whitening needs at least 2 samples, got " + std::to_string(samples.cols()));
  if (rule.eps_reg < 0.0) throw ContractError("eps_reg must be non-negative");
  const Index dim = samples.rows();

  WhiteningTransform w;
  w.eps_reg = rule.eps_reg;
  w.mean = samples.rowwise().mean();
  const Spectrum s = spectrum(covariance(samples, w.mean));

  Index keep = 0;
  if (rule.fixed_dim > 0) {
    if (rule.fixed_dim > dim)
      throw ContractError("retained dimension " + std::to_string(rule.fixed_dim) +
                          " exceeds input dimension " + std::to_string(dim));
    if (rule.fixed_dim > s.rank)
      throw DataError("retained dimension " + std::to_string(rule.fixed_dim) +
                      " exceeds covariance rank " + std::to_string(s.rank));
    keep = rule.fixed_dim;
  } else {
    if (s.rank == 0) throw DataError("whitening samples have zero variance (rank 0)");
    const double total = s.values.head(s.rank).sum();
    double acc = 0.0;
    while (keep < s.rank) {
      acc += s.values(keep++);
      if (acc >= rule.variance_fraction * total) break;
    }
    keep = std::min(keep, rule.max_dim);
  }

  w.eigenvalues = s.values.head(keep);
  w.projection.resize(keep, dim);
  for (Index i = 0; i < keep; ++i)
    w.projection.row(i) = s.vectors.col(i).transpose() / std::sqrt(s.values(i) + rule.eps_reg);
  return w;
}

Vector apply_whitening(const WhiteningTransform& w, const Eigen::Ref<const Vector>& x) {
  if (x.size() != w.input_dim())
    throw ContractError("whitening input dimension mismatch: expected " + std::to_string(w.input_dim()) +
                        ", got " + std::to_string(x.size()));
  return w.projection * (x - w.mean);
}

Matrix apply_whitening_columns(const WhiteningTransform& w, const Eigen::Ref<const Matrix>& samples) {
  if (samples.rows() != w.input_dim())
    throw ContractError("whitening input dimension mismatch: expected " + std::to_string(w.input_dim()) +
                        ", got " + std::to_string(samples.rows()));
  return w.projection * (samples.colwise() - w.mean);
}

}  // namespace hft
