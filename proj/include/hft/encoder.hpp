#pragma once

#include "hft/types.hpp"

#include <vector>

namespace hft {

// Filter bank W (F x D): each row is one filter over a D-dimensional input.
// F is even; rows 2j and 2j+1 form pooling pair j.
struct FeatureTransform {
  Matrix weights;

  FeatureTransform() = default;
  explicit FeatureTransform(Matrix w);

  Index filters() const { return weights.rows(); }
  Index input_dim() const { return weights.cols(); }
};

// Fixed non-overlapping pairwise pooling H: output j sums inputs 2j and 2j+1.
struct PoolingMap {
  Index input_dim = 0;

  Index output_dim() const { return input_dim / 2; }

  // H * v for a column vector or for each column of a matrix.
  template <typename Derived>
  Matrix apply(const Eigen::MatrixBase<Derived>& v) const {
    const Index out = output_dim();
    Matrix pooled(out, v.cols());
    for (Index j = 0; j < out; ++j) pooled.row(j) = v.row(2 * j) + v.row(2 * j + 1);
    return pooled;
  }
};

// z = sqrt(H (W x)^2 + eps_sqrt).
struct LayerEncoder {
  FeatureTransform transform;
  PoolingMap pooling;
  double eps_sqrt = 1e-8;

  LayerEncoder() = default;
  LayerEncoder(FeatureTransform t, double eps = 1e-8);

  Index input_dim() const { return transform.input_dim(); }
  Index output_dim() const { return pooling.output_dim(); }
  const Matrix& weights() const { return transform.weights; }
};

// Pooled magnitudes of precomputed filter responses (F x N) -> (F/2 x N).
template <typename Derived>
Matrix pooled_magnitudes(const Eigen::MatrixBase<Derived>& responses, double eps_sqrt) {
  const PoolingMap pool{responses.rows()};
  return (pool.apply(responses.cwiseAbs2()).array() + eps_sqrt).sqrt().matrix();
}

Vector encode(const LayerEncoder& enc, const Eigen::Ref<const Vector>& x);

// Column-wise encode of D x N samples.
Matrix encode_columns(const LayerEncoder& enc, const Eigen::Ref<const Matrix>& samples);

// W^T W x.
Vector reconstruct(const LayerEncoder& enc, const Eigen::Ref<const Vector>& x);

// Row k reshaped to side x side and min-max scaled to [0, 1]; a constant row
// becomes a constant 0.5 image.
std::vector<RowMatrix> filters_as_patches(const FeatureTransform& t, int side);

// Gaussian rows orthonormalized (Gram-Schmidt via QR). Requires F <= D for full
// orthonormality; extra rows are orthonormal within blocks of D.
FeatureTransform random_orthonormal_transform(Index filters, Index input_dim, std::uint64_t seed);

}  // namespace hft
