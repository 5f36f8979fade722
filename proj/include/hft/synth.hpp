#pragma once

#include "hft/patch_data.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hft {

enum class MotionKind { Translation, Rotation, Scaling, Deformation, Composite };

std::optional<MotionKind> parse_motion_kind(const std::string& name);
const char* to_string(MotionKind kind);

// Absolute target pose in one frame. `shear` is the horizontal row shear
// x' = x + shear * y in target-local coordinates.
struct TargetPose {
  double cx = 0.0;
  double cy = 0.0;
  double scale = 1.0;
  double rotation = 0.0;
  double shear = 0.0;
};

struct MotionScript {
  MotionKind kind = MotionKind::Translation;
  std::vector<TargetPose> schedule;  // one pose per frame

  std::size_t frames() const { return schedule.size(); }
};

struct SceneConfig {
  int width = 160;
  int height = 120;
  int target_w = 32;
  int target_h = 32;
  int margin = 8;  // minimum distance of the target box from frame borders
  std::uint64_t texture_seed = 1;
  std::uint64_t background_seed = 2;
  double texture_smoothing = 1.5;     // Gaussian sigma, pixels
  double background_smoothing = 2.5;
};

struct PatternParams {
  double speed = 2.0;                           // px/frame for translation
  double rotation_rate = 1.5 * 3.14159265358979323846 / 180.0;  // rad/frame
  double scale_amplitude = 0.25;
  double scale_period = 60.0;
  double shear_amplitude = 0.35;
  double shear_period = 40.0;
  double drift = 0.0;  // extra horizontal px/frame for non-translation patterns
};

// Builds the pose schedule for a named pattern. Translations bounce off the
// margins so any frame count stays in view.
MotionScript make_script(MotionKind kind, int frames, const SceneConfig& scene, const PatternParams& params = {});

// Tight axis-aligned box of the transformed target.
Box pose_box(const TargetPose& pose, int target_w, int target_h);

struct SyntheticSequence {
  std::vector<Frame> frames;
  std::vector<Box> ground_truth;
};

// Band-limited noise in [lo, hi]: white Gaussian noise smoothed by a Gaussian.
RowMatrix band_limited_noise(int width, int height, double sigma, std::uint64_t seed, double lo, double hi);

// Renders the script. Throws DataError naming the first frame whose target
// box violates the margin.
SyntheticSequence generate_sequence(const MotionScript& script, const SceneConfig& scene);

// Texture scrolling under a fixed camera at integer velocity (vx, vy); the
// ground-truth box is the frame inset by `margin` on every side. Intended as
// pretraining data: content moves relative to the box.
SyntheticSequence generate_drift_sequence(int width, int height, int vx, int vy, int frames, std::uint64_t seed,
                                          int margin = 8, double smoothing = 1.5);

// A band-limited texture scrolling under a fixed window at `velocity` px/frame.
std::vector<Frame> generate_texture_drift(int width, int height, double vx, double vy, int frames,
                                          std::uint64_t seed, double smoothing = 1.5);

// Numbered frames (frame_0000.pgm, ...) plus gt.csv.
void write_sequence(const SyntheticSequence& seq, const std::filesystem::path& dir);

}  // namespace hft
