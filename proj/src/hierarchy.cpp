#include "hft/hierarchy.hpp"

#include <cstdio>

namespace hft {

Index HierarchicalModel::sub_patch_count() const {
  const auto n = static_cast<Index>(sub_patch_offsets(sub_patch_stride).size());
  return n * n;
}

void HierarchicalModel::validate() const {
  if (layer1.input_dim() != 256)
    throw ContractError("layer 1 input dimension must be 256, got " + std::to_string(layer1.input_dim()));
  if (whitening.input_dim() != layer1_feature_dim())
    throw ContractError("whitening input dimension " + std::to_string(whitening.input_dim()) +
                        " != sub-patches x layer-1 outputs " + std::to_string(layer1_feature_dim()));
  if (layer2.input_dim() != whitening.output_dim())
    throw ContractError("layer 2 input dimension " + std::to_string(layer2.input_dim()) +
                        " != whitening output dimension " + std::to_string(whitening.output_dim()));
}

bool HierarchicalModel::operator==(const HierarchicalModel& o) const {
  auto same = [](const auto& a, const auto& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
  };
  return same(layer1.weights(), o.layer1.weights()) && layer1.eps_sqrt == o.layer1.eps_sqrt &&
         same(layer2.weights(), o.layer2.weights()) && layer2.eps_sqrt == o.layer2.eps_sqrt &&
         same(whitening.mean, o.whitening.mean) && same(whitening.projection, o.whitening.projection) &&
         same(whitening.eigenvalues, o.whitening.eigenvalues) && whitening.eps_reg == o.whitening.eps_reg &&
         sub_patch_stride == o.sub_patch_stride && metadata == o.metadata;
}

Vector layer1_concat(const HierarchicalModel& model, const Patch& patch32) {
  if (patch32.side != 32)
    throw ContractError("hierarchical encoding needs a 32x32 patch, got side " + std::to_string(patch32.side));
  const auto subs = sub_patches(patch32, model.sub_patch_stride);
  Matrix cols(256, static_cast<Index>(subs.size()));
  for (std::size_t k = 0; k < subs.size(); ++k) cols.col(static_cast<Index>(k)) = subs[k].values;
  const Matrix z = encode_columns(model.layer1, cols);  // P x K
  return z.reshaped();  // sub-patch k occupies entries [k*P, (k+1)*P)
}

HierFeature encode_hier(const HierarchicalModel& model, const Patch& patch32) {
  HierFeature f;
  f.layer1_part = layer1_concat(model, patch32);
  f.layer2_part = encode(model.layer2, apply_whitening(model.whitening, f.layer1_part));
  f.combined.resize(f.layer1_part.size() + f.layer2_part.size());
  f.combined << f.layer1_part, f.layer2_part;
  return f;
}

std::pair<Matrix, LayerReport> train_layer(const SlownessObjective& objective, const Matrix& init,
                                           const LbfgsConfig& cfg, const std::string& layer) {
  const Index rows = init.rows();
  const Index cols = init.cols();
  Objective<double> f = [&](const Vector& theta, Vector& grad) {
    const Eigen::Map<const Matrix> w(theta.data(), rows, cols);
    ObjectiveEvaluation e = objective.evaluate(w);
    grad = e.gradient.reshaped();
    return e.value;
  };
  OptimizeResult<double> r = minimize<double>(f, init.reshaped(), cfg);

  LayerReport report;
  report.initial_value = r.trace.empty() ? r.value : r.trace.front().first;
  report.final_value = r.value;
  report.iterations = r.iterations;
  report.status = r.status;
  if (r.status == LbfgsStatus::NonFinite)
    throw OptimizationError(layer + ": objective is not finite");
  if (r.status == LbfgsStatus::LineSearchFailed && r.iterations == 0)
    throw OptimizationError(layer + ": line search failed at the first iteration");
  return {Matrix(r.x.reshaped(rows, cols)), report};
}

SequenceBatch layer1_feature_batch(const HierarchicalModel& model, const TrainingSet& train32) {
  std::vector<Index> lengths;
  Matrix samples(model.layer1_feature_dim(), train32.total_length());
  Index col = 0;
  for (const auto& seq : train32.sequences) {
    if (seq.patches.empty()) continue;
    for (const auto& p : seq.patches) samples.col(col++) = layer1_concat(model, p);
    lengths.push_back(seq.size());
  }
  return SequenceBatch(std::move(samples), std::move(lengths));
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

PretrainResult pretrain(const TrainingSet& train16, const TrainingSet& train32, const PretrainConfig& cfg) {
  if (train16.empty()) throw DataError("pretrain: 16x16 training set is empty");
  if (train32.empty()) throw DataError("pretrain: 32x32 training set is empty");
  if (train16.dim() != 256) throw ContractError("pretrain: layer-1 patches must be 16x16");
  if (train32.dim() != 1024) throw ContractError("pretrain: layer-2 patches must be 32x32");

  PretrainResult out;
  HierarchicalModel& model = out.model;
  model.sub_patch_stride = cfg.sub_patch_stride;

  SlownessObjective obj1{SequenceBatch::from(train16), cfg.lambda1, cfg.eps_sqrt, cfg.eps_abs};
  const Matrix init1 = random_orthonormal_transform(cfg.filters1, 256, cfg.seed).weights;
  auto [w1, rep1] = train_layer(obj1, init1, cfg.optimizer, "layer1");
  model.layer1 = LayerEncoder(FeatureTransform(std::move(w1)), cfg.eps_sqrt);
  out.layer1 = rep1;

  const SequenceBatch features = layer1_feature_batch(model, train32);
  model.whitening = fit_whitening(features.samples, cfg.whitening);
  SlownessObjective obj2{SequenceBatch(apply_whitening_columns(model.whitening, features.samples), features.lengths),
                         cfg.lambda2, cfg.eps_sqrt, cfg.eps_abs};
  const Matrix init2 =
      random_orthonormal_transform(cfg.filters2, model.whitening.output_dim(), cfg.seed + 1).weights;
  auto [w2, rep2] = train_layer(obj2, init2, cfg.optimizer, "layer2");
  model.layer2 = LayerEncoder(FeatureTransform(std::move(w2)), cfg.eps_sqrt);
  out.layer2 = rep2;

  model.metadata = {
      {"source", "pretrain"},
      {"lambda1", format_double(cfg.lambda1)},
      {"lambda2", format_double(cfg.lambda2)},
      {"filters1", std::to_string(cfg.filters1)},
      {"filters2", std::to_string(cfg.filters2)},
      {"seed", std::to_string(cfg.seed)},
      {"train16_patches", std::to_string(train16.total_length())},
      {"train32_patches", std::to_string(train32.total_length())},
  };
  model.validate();
  return out;
}

namespace {

std::pair<Matrix, AdaptLayerReport> adapt_layer(const SequenceBatch& data, const LayerEncoder& layer,
                                                const AdaptConfig& cfg, const std::string& tag) {
  AdaptationObjective obj{SlownessObjective{data, cfg.lambda, layer.eps_sqrt, cfg.eps_abs}, cfg.gamma,
                          layer.weights()};
  const Matrix& w_old = layer.weights();
  const Index rows = w_old.rows();
  const Index cols = w_old.cols();
  Objective<double> f = [&](const Vector& theta, Vector& grad) {
    const Eigen::Map<const Matrix> w(theta.data(), rows, cols);
    ObjectiveEvaluation e = obj.evaluate(w);
    grad = e.gradient.reshaped();
    return e.value;
  };
  OptimizeResult<double> r = minimize<double>(f, w_old.reshaped(), cfg.optimizer);
  if (r.status == LbfgsStatus::NonFinite) throw OptimizationError(tag + ": objective is not finite");
  if (r.status == LbfgsStatus::LineSearchFailed && r.iterations == 0 && !r.converged)
    throw OptimizationError(tag + ": line search failed at the first iteration");

  AdaptLayerReport rep;
  rep.objective_before = r.trace.front().first;
  rep.objective_after = r.value;
  rep.iterations = r.iterations;
  rep.status = r.status;
  Matrix w = r.x.reshaped(rows, cols);
  rep.frobenius_change = (w - w_old).norm();
  const double base = w_old.norm();
  rep.relative_change = base > 0.0 ? rep.frobenius_change / base : rep.frobenius_change;
  return {std::move(w), rep};
}

}  // namespace

AdaptResult adapt(const HierarchicalModel& model, const TrainingSet& object16, const TrainingSet& object32,
                  const AdaptConfig& cfg) {
  if (object16.empty() || object32.empty()) throw DataError("adapt: object patch sets must be nonempty");
  if (!(cfg.gamma >= 0.0)) throw ContractError("adapt: gamma must be non-negative");
  if (object16.dim() != 256 || object32.dim() != 1024)
    throw ContractError("adapt: object patches must be 16x16 and 32x32");
  model.validate();

  AdaptResult out;
  out.model = model;

  auto [w1, rep1] = adapt_layer(SequenceBatch::from(object16), model.layer1, cfg, "layer1");
  out.model.layer1 = LayerEncoder(FeatureTransform(std::move(w1)), model.layer1.eps_sqrt);
  out.layer1 = rep1;

  const SequenceBatch features = layer1_feature_batch(out.model, object32);
  const SequenceBatch whitened(apply_whitening_columns(out.model.whitening, features.samples), features.lengths);
  auto [w2, rep2] = adapt_layer(whitened, model.layer2, cfg, "layer2");
  out.model.layer2 = LayerEncoder(FeatureTransform(std::move(w2)), model.layer2.eps_sqrt);
  out.layer2 = rep2;

  // Keep pretraining metadata, replacing any previous adaptation entries.
  auto& meta = out.model.metadata;
  std::erase_if(meta, [](const auto& kv) { return kv.first.starts_with("adapt_"); });
  meta.emplace_back("adapt_lambda", format_double(cfg.lambda));
  meta.emplace_back("adapt_gamma", format_double(cfg.gamma));
  return out;
}

}  // namespace hft
