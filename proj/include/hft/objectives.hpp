#pragma once

#include "hft/encoder.hpp"
#include "hft/patch_data.hpp"

#include <functional>
#include <vector>

namespace hft {

// Samples packed column-wise (D x N) with sequence lengths. Consecutive
// columns inside one sequence form a slowness pair; sequence boundaries never do.
struct SequenceBatch {
  Matrix samples;
  std::vector<Index> lengths;

  SequenceBatch() = default;
  SequenceBatch(Matrix samples, std::vector<Index> lengths);

  static SequenceBatch from(const TrainingSet& set);

  Index dim() const { return samples.rows(); }
  Index size() const { return samples.cols(); }
  Index pair_count() const;
  // pair_start[n] is true when columns n and n+1 form a pair.
  std::vector<bool> pair_mask() const;
};

struct ObjectiveEvaluation {
  double value = 0.0;
  Matrix gradient;  // same shape as W
};

// lambda * sum_pairs sum_j s(z_i[j] - z_{i+1}[j]) + sum_i |x_i - W^T W x_i|^2,
// s(u) = sqrt(u^2 + eps_abs), z = sqrt(H (W x)^2 + eps_sqrt).
struct SlownessObjective {
  SequenceBatch data;
  double lambda = 1.0;
  double eps_sqrt = 1e-8;
  double eps_abs = 1e-8;

  ObjectiveEvaluation evaluate(const Matrix& w) const;
  // Value only, skipping the gradient.
  double value(const Matrix& w) const;
};

// Slowness objective on object patches plus gamma * sum_i |(W - W_old) x_i|^2.
struct AdaptationObjective {
  SlownessObjective base;
  double gamma = 100.0;
  Matrix w_old;

  ObjectiveEvaluation evaluate(const Matrix& w) const;
  double value(const Matrix& w) const;
  // The gamma-weighted regularizer term alone.
  double regularizer(const Matrix& w) const;
};

ObjectiveEvaluation eval_slowness(const SlownessObjective& obj, const FeatureTransform& w);
ObjectiveEvaluation eval_adaptation(const AdaptationObjective& obj, const FeatureTransform& w);

// Central differences (f(W + h e_ij) - f(W - h e_ij)) / 2h for every entry.
Matrix finite_difference_gradient(const std::function<double(const Matrix&)>& f, const Matrix& w,
                                  double h);

}  // namespace hft
