#include "hft/encoder.hpp"

#include <Eigen/QR>

#include <random>

namespace hft {

FeatureTransform::FeatureTransform(Matrix w) : weights(std::move(w)) {
  if (weights.rows() < 2 || weights.rows() % 2 != 0)
    throw ContractError("feature transform needs an even filter count >= 2, got " +
                        std::to_string(weights.rows()));
  if (!weights.allFinite()) throw ContractError("feature transform has non-finite entries");
}

LayerEncoder::LayerEncoder(FeatureTransform t, double eps)
    : transform(std::move(t)), pooling{transform.filters()}, eps_sqrt(eps) {
  if (eps_sqrt < 0.0) throw ContractError("eps_sqrt must be non-negative");
}

namespace {

void check_input(const LayerEncoder& enc, Index got) {
  if (got != enc.input_dim())
    throw ContractError("encoder input dimension mismatch: expected " +
                        std::to_string(enc.input_dim()) + ", got " + std::to_string(got));
}

}  // namespace

Vector encode(const LayerEncoder& enc, const Eigen::Ref<const Vector>& x) {
  check_input(enc, x.size());
  return pooled_magnitudes(enc.weights() * x, enc.eps_sqrt);
}

Matrix encode_columns(const LayerEncoder& enc, const Eigen::Ref<const Matrix>& samples) {
  check_input(enc, samples.rows());
  return pooled_magnitudes(enc.weights() * samples, enc.eps_sqrt);
}

Vector reconstruct(const LayerEncoder& enc, const Eigen::Ref<const Vector>& x) {
  check_input(enc, x.size());
  return enc.weights().transpose() * (enc.weights() * x);
}

std::vector<RowMatrix> filters_as_patches(const FeatureTransform& t, int side) {
  if (static_cast<Index>(side) * side != t.input_dim())
    throw ContractError("filter side " + std::to_string(side) + " does not match input dimension " +
                        std::to_string(t.input_dim()));
  std::vector<RowMatrix> images;
  images.reserve(static_cast<std::size_t>(t.filters()));
  for (Index k = 0; k < t.filters(); ++k) {
    const auto row = t.weights.row(k);
    const double lo = row.minCoeff();
    const double hi = row.maxCoeff();
    RowMatrix img(side, side);
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c)
        img(r, c) = hi == lo ? 0.5 : (row(r * side + c) - lo) / (hi - lo);
    images.push_back(std::move(img));
  }
  return images;
}

FeatureTransform random_orthonormal_transform(Index filters, Index input_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix w(filters, input_dim);
  for (Index start = 0; start < filters; start += input_dim) {
    const Index block = std::min(input_dim, filters - start);
    Matrix g(input_dim, block);
    for (Index c = 0; c < block; ++c)
      for (Index r = 0; r < input_dim; ++r) g(r, c) = gauss(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(input_dim, block);
    // Fix column signs so the factorization is unique.
    const Matrix& packed = qr.matrixQR();
    for (Index c = 0; c < block; ++c)
      if (packed(c, c) < 0.0) q.col(c) = -q.col(c);
    w.middleRows(start, block) = q.transpose();
  }
  return FeatureTransform(std::move(w));
}

}  // namespace hft
