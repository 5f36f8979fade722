#include "hft/objectives.hpp"

#include <cmath>
#include <numeric>

namespace hft {

SequenceBatch::SequenceBatch(Matrix s, std::vector<Index> l) : samples(std::move(s)), lengths(std::move(l)) {
  const Index total = std::accumulate(lengths.begin(), lengths.end(), Index{0});
  if (total != samples.cols())
    throw ContractError("sequence lengths sum to " + std::to_string(total) + " but batch has " +
                        std::to_string(samples.cols()) + " samples");
  for (Index len : lengths)
    if (len <= 0) throw ContractError("sequence lengths must be positive");
}

SequenceBatch SequenceBatch::from(const TrainingSet& set) {
  const Index n = set.total_length();
  const Index d = set.dim();
  Matrix samples(d, n);
  std::vector<Index> lengths;
  Index col = 0;
  for (const auto& seq : set.sequences) {
    if (seq.patches.empty()) continue;
    for (const auto& p : seq.patches) {
      if (p.dim() != d) throw ContractError("training set mixes patch dimensions");
      samples.col(col++) = p.values;
    }
    lengths.push_back(seq.size());
  }
  return SequenceBatch(std::move(samples), std::move(lengths));
}

Index SequenceBatch::pair_count() const {
  Index n = 0;
  for (Index len : lengths) n += len - 1;
  return n;
}

std::vector<bool> SequenceBatch::pair_mask() const {
  std::vector<bool> mask(static_cast<std::size_t>(size()), false);
  Index start = 0;
  for (Index len : lengths) {
    for (Index i = start; i + 1 < start + len; ++i) mask[static_cast<std::size_t>(i)] = true;
    start += len;
  }
  return mask;
}

namespace {

void check_shapes(const SlownessObjective& obj, const Matrix& w) {
  if (obj.data.size() == 0) throw DataError("objective undefined on an empty training set");
  if (w.cols() != obj.data.dim())
    throw ContractError("W has " + std::to_string(w.cols()) + " columns but data dimension is " +
                        std::to_string(obj.data.dim()));
  if (w.rows() < 2 || w.rows() % 2 != 0)
    throw ContractError("W needs an even row count, got " + std::to_string(w.rows()));
}

// Shared core; gradient is filled only when requested.
double slowness_core(const SlownessObjective& obj, const Matrix& w, Matrix* gradient) {
  check_shapes(obj, w);
  const Matrix& x = obj.data.samples;
  const Matrix responses = w * x;  // F x N
  const Matrix z = pooled_magnitudes(responses, obj.eps_sqrt);
  const Index pooled = z.rows();
  const Index n = z.cols();

  double slow = 0.0;
  Matrix dz;
  if (gradient) dz = Matrix::Zero(pooled, n);
  const auto mask = obj.data.pair_mask();
  for (Index i = 0; i + 1 < n; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    for (Index j = 0; j < pooled; ++j) {
      const double u = z(j, i) - z(j, i + 1);
      const double s = std::sqrt(u * u + obj.eps_abs);
      slow += s;
      if (gradient && s > 0.0) {
        const double ds = obj.lambda * u / s;
        dz(j, i) += ds;
        dz(j, i + 1) -= ds;
      }
    }
  }

  const Matrix residual = x - w.transpose() * responses;  // D x N
  const double value = obj.lambda * slow + residual.squaredNorm();

  if (gradient) {
    Matrix dresp(responses.rows(), n);
    for (Index c = 0; c < n; ++c)
      for (Index j = 0; j < pooled; ++j) {
        const double zz = z(j, c);
        const double scale = zz > 0.0 ? dz(j, c) / zz : 0.0;
        dresp(2 * j, c) = scale * responses(2 * j, c);
        dresp(2 * j + 1, c) = scale * responses(2 * j + 1, c);
      }
    // d/dW sum |x - W^T W x|^2 = -2 (W x r^T + W r x^T)
    *gradient = dresp * x.transpose() -
                2.0 * (responses * residual.transpose() + (w * residual) * x.transpose());
  }
  return value;
}

}  // namespace

ObjectiveEvaluation SlownessObjective::evaluate(const Matrix& w) const {
  ObjectiveEvaluation out;
  out.value = slowness_core(*this, w, &out.gradient);
  return out;
}

double SlownessObjective::value(const Matrix& w) const { return slowness_core(*this, w, nullptr); }

double AdaptationObjective::regularizer(const Matrix& w) const {
  if (w.rows() != w_old.rows() || w.cols() != w_old.cols())
    throw ContractError("W and W_old shapes differ");
  return gamma * ((w - w_old) * base.data.samples).squaredNorm();
}

ObjectiveEvaluation AdaptationObjective::evaluate(const Matrix& w) const {
  ObjectiveEvaluation out = base.evaluate(w);
  out.value += regularizer(w);
  const Matrix& x = base.data.samples;
  out.gradient += (2.0 * gamma) * (((w - w_old) * x) * x.transpose());
  return out;
}

double AdaptationObjective::value(const Matrix& w) const { return base.value(w) + regularizer(w); }

ObjectiveEvaluation eval_slowness(const SlownessObjective& obj, const FeatureTransform& w) {
  return obj.evaluate(w.weights);
}

ObjectiveEvaluation eval_adaptation(const AdaptationObjective& obj, const FeatureTransform& w) {
  return obj.evaluate(w.weights);
}

Matrix finite_difference_gradient(const std::function<double(const Matrix&)>& f, const Matrix& w,
                                  double h) {
  if (!(h > 0.0)) throw ContractError("finite-difference step must be positive");
  Matrix grad(w.rows(), w.cols());
  Matrix probe = w;
  for (Index c = 0; c < w.cols(); ++c)
    for (Index r = 0; r < w.rows(); ++r) {
      const double orig = probe(r, c);
      probe(r, c) = orig + h;
      const double up = f(probe);
      probe(r, c) = orig - h;
      const double down = f(probe);
      probe(r, c) = orig;
      grad(r, c) = (up - down) / (2.0 * h);
    }
  return grad;
}

}  // namespace hft
