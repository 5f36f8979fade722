#pragma once

#include "hft/hierarchy.hpp"
#include "hft/patch_data.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace hft {

// Target state: centre, scale relative to the initial box, in-plane rotation.
struct TrackState {
  double cx = 0.0;
  double cy = 0.0;
  double scale = 1.0;
  double rotation = 0.0;  // (-pi, pi]
  double base_w = 0.0;
  double base_h = 0.0;

  static TrackState from_box(const Box& box);
  // Axis-aligned bounding box of the rotated, scaled box.
  Box bounding_box() const;
  bool operator==(const TrackState&) const = default;
};

struct ParticleSet {
  std::vector<TrackState> states;
  std::vector<double> weights;  // non-negative, sum to 1

  std::size_t size() const { return states.size(); }
};

struct MotionModel {
  double std_cx = 4.0;
  double std_cy = 4.0;
  double std_scale = 0.02;     // log-scale
  double std_rotation = 0.04;  // radians
};

// Nearest-exemplar Gaussian kernel over unit-normalized features.
class ExemplarLibrary {
public:
  explicit ExemplarLibrary(std::size_t capacity = 10, double sigma = 0.2);

  // Stores a unit-normalized copy; evicts the oldest entry past capacity.
  void add(const Vector& feature);
  void clear() { exemplars_.clear(); }

  // min over exemplars of |unit(feature) - exemplar|.
  double distance(const Vector& feature) const;
  double likelihood(const Vector& feature) const;

  std::size_t size() const { return exemplars_.size(); }
  std::size_t capacity() const { return capacity_; }
  double sigma() const { return sigma_; }
  bool empty() const { return exemplars_.empty(); }
  const std::deque<Vector>& exemplars() const { return exemplars_; }

private:
  std::size_t capacity_;
  double sigma_;
  std::deque<Vector> exemplars_;
};

double likelihood(const ExemplarLibrary& lib, const Vector& feature);

// Unit-norm copy; the zero vector stays zero.
Vector unit_normalized(const Vector& v);

struct TrackerConfig {
  int n_candidates = 600;
  int top_k = 20;
  int update_period = 20;  // M
  int init_frames = 20;    // N_init
  MotionModel motion;
  double sigma = 0.2;
  std::size_t library_capacity = 10;
  AdaptConfig adaptation;
  bool raw_only = false;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
};

// n perturbed copies of `prev` (independent Gaussians per field).
std::vector<TrackState> propagate(const TrackState& prev, const MotionModel& motion, int n, std::uint64_t seed);

// Side-32 normalized patch of the state's rotated box, nearest-neighbour
// resampled. nullopt when less than half the box lies inside the frame.
std::optional<Patch> candidate_patch(const Frame& frame, const TrackState& state);

// Systematic resampling: n indices drawn with one uniform offset.
std::vector<std::size_t> systematic_resample(const std::vector<double>& weights, std::size_t n, std::mt19937_64& rng);

// Normalized weights exp(log_lik - max) / sum. Entries equal to -inf get 0.
std::vector<double> normalize_log_weights(const std::vector<double>& log_lik);

// Scores candidate patches: returns the distance d per patch, and the
// likelihood used for weighting is exp(-d^2 / (2 sigma^2)).
using CandidateScorer = std::function<std::vector<double>(const std::vector<const Patch*>&)>;

struct StepResult {
  TrackState predicted;
  Patch predicted_patch;
  ParticleSet particles;          // candidates with their weights
  std::vector<std::size_t> top;   // coarse top-k candidate indices, best first
  std::size_t predicted_index = 0;
};

// One filtering step: resample, propagate, coarse raw-pixel ranking against
// `reference`, score the top_k with `scorer`, predict the max-weight state.
// Throws TrackingLost when every candidate is rejected.
StepResult step(const Frame& frame, const ParticleSet& prev, const Patch& reference, const CandidateScorer& scorer,
                double sigma, const TrackerConfig& cfg, std::mt19937_64& rng, int frame_index);

struct TrackResult {
  std::vector<Box> boxes;  // one per processed frame
  HierarchicalModel model;
  std::vector<std::string> diagnostics;  // one line per adaptation event
  std::optional<int> lost_frame;
  int adaptation_events = 0;
};

TrackResult run_tracker(const std::vector<Frame>& frames, const Box& init_box, const HierarchicalModel& model,
                        const TrackerConfig& cfg);

// Bootstrap helper shared with `adapt`: tracks the first `frames` frames with
// raw-pixel ranking and returns the predicted 32x32 object patches in order.
struct BootstrapResult {
  std::vector<Box> boxes;
  std::vector<Patch> patches;
};
BootstrapResult bootstrap_track(const std::vector<Frame>& frames, const Box& init_box, int frames_to_track,
                                const TrackerConfig& cfg);

// One patch sequence (for layer 2) and its sub-patch sequences (for layer 1).
std::pair<TrainingSet, TrainingSet> object_training_sets(const std::vector<Patch>& patches, int sub_patch_stride);

// Runs `fn(i)` for i in [0, n) on up to `threads` workers. Each index is
// handled by exactly one worker so per-index outputs are scheduling-independent.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace hft
