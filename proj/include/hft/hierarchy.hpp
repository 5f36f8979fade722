#pragma once

#include "hft/encoder.hpp"
#include "hft/lbfgs.hpp"
#include "hft/objectives.hpp"
#include "hft/patch_data.hpp"
#include "hft/whitening.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace hft {

// Two stacked encoders. Layer 1 sees 16x16 sub-patches; their pooled outputs
// are concatenated over the sub-patch grid of a 32x32 patch, whitened, and fed
// to layer 2.
struct HierarchicalModel {
  LayerEncoder layer1;
  WhiteningTransform whitening;
  LayerEncoder layer2;
  int sub_patch_stride = 16;
  std::vector<std::pair<std::string, std::string>> metadata;

  Index sub_patch_count() const;
  Index layer1_feature_dim() const { return sub_patch_count() * layer1.output_dim(); }
  Index feature_dim() const { return layer1_feature_dim() + layer2.output_dim(); }

  // Throws ContractError when layer dimensions do not chain.
  void validate() const;
  bool operator==(const HierarchicalModel& other) const;
};

struct HierFeature {
  Vector layer1_part;
  Vector layer2_part;
  Vector combined;
};

// Layer-1 features of every sub-patch, concatenated.
Vector layer1_concat(const HierarchicalModel& model, const Patch& patch32);
HierFeature encode_hier(const HierarchicalModel& model, const Patch& patch32);

struct PretrainConfig {
  double lambda1 = 5.0;
  double lambda2 = 5.0;
  Index filters1 = 64;
  Index filters2 = 128;
  int sub_patch_stride = 16;
  double eps_sqrt = 1e-8;
  double eps_abs = 1e-8;
  WhiteningRule whitening;
  LbfgsConfig optimizer;
  std::uint64_t seed = 1;
};

struct LayerReport {
  double initial_value = 0.0;
  double final_value = 0.0;
  int iterations = 0;
  LbfgsStatus status = LbfgsStatus::MaxIterations;
};

struct PretrainResult {
  HierarchicalModel model;
  LayerReport layer1;
  LayerReport layer2;
};

// Minimizes the slowness objective for one layer from `init`. Throws
// OptimizationError (tagged with `layer`) when no progress is possible.
std::pair<Matrix, LayerReport> train_layer(const SlownessObjective& objective, const Matrix& init,
                                           const LbfgsConfig& cfg, const std::string& layer);

// Layer-1 inputs of 32x32 sequences: concatenated layer-1 features, one column
// per patch, sequence lengths preserved.
SequenceBatch layer1_feature_batch(const HierarchicalModel& model, const TrainingSet& train32);

PretrainResult pretrain(const TrainingSet& train16, const TrainingSet& train32, const PretrainConfig& cfg);

struct AdaptConfig {
  double lambda = 5.0;
  double gamma = 100.0;
  double eps_abs = 1e-8;
  LbfgsConfig optimizer = [] {
    LbfgsConfig c;
    c.max_iters = 50;
    c.grad_tol = 1e-5;
    return c;
  }();
};

struct AdaptLayerReport {
  double objective_before = 0.0;  // adaptation objective at W_old
  double objective_after = 0.0;
  double frobenius_change = 0.0;  // |W_adp - W_old|_F
  double relative_change = 0.0;   // divided by |W_old|_F
  int iterations = 0;
  LbfgsStatus status = LbfgsStatus::MaxIterations;
};

struct AdaptResult {
  HierarchicalModel model;
  AdaptLayerReport layer1;
  AdaptLayerReport layer2;
};

// Adapts layer 1 on `object16`, then layer 2 on the whitened layer-1 features
// of `object32` (computed with the adapted layer 1). Whitening stays frozen.
AdaptResult adapt(const HierarchicalModel& model, const TrainingSet& object16, const TrainingSet& object32,
                  const AdaptConfig& cfg);

// Binary model file ("HFTM", version 1). Round trips are bit-exact.
std::string serialize_model(const HierarchicalModel& model);
HierarchicalModel deserialize_model(const std::string& bytes);
void save_model(const HierarchicalModel& model, const std::filesystem::path& path);
HierarchicalModel load_model(const std::filesystem::path& path);

}  // namespace hft
