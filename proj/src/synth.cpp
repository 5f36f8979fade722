#include "hft/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace hft {

std::optional<MotionKind> parse_motion_kind(const std::string& name) {
  if (name == "translation") return MotionKind::Translation;
  if (name == "rotation") return MotionKind::Rotation;
  if (name == "scaling") return MotionKind::Scaling;
  if (name == "deformation") return MotionKind::Deformation;
  if (name == "composite") return MotionKind::Composite;
  return std::nullopt;
}

const char* to_string(MotionKind kind) {
  switch (kind) {
    case MotionKind::Translation: return "translation";
    case MotionKind::Rotation: return "rotation";
    case MotionKind::Scaling: return "scaling";
    case MotionKind::Deformation: return "deformation";
    case MotionKind::Composite: return "composite";
  }
  return "unknown";
}

Box pose_box(const TargetPose& pose, int target_w, int target_h) {
  const double c = std::cos(pose.rotation);
  const double s = std::sin(pose.rotation);
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  for (double v : {-0.5 * target_h, 0.5 * target_h})
    for (double u : {-0.5 * target_w, 0.5 * target_w}) {
      const double su = (u + pose.shear * v) * pose.scale;
      const double sv = v * pose.scale;
      const double x = pose.cx + c * su - s * sv;
      const double y = pose.cy + s * su + c * sv;
      lo_x = std::min(lo_x, x);
      hi_x = std::max(hi_x, x);
      lo_y = std::min(lo_y, y);
      hi_y = std::max(hi_y, y);
    }
  return {lo_x, lo_y, hi_x - lo_x, hi_y - lo_y};
}

namespace {

bool inside_margin(const Box& b, const SceneConfig& scene) {
  return b.x >= scene.margin && b.y >= scene.margin && b.x + b.w <= scene.width - scene.margin &&
         b.y + b.h <= scene.height - scene.margin;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + radius)];
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace

MotionScript make_script(MotionKind kind, int frames, const SceneConfig& scene, const PatternParams& params) {
  if (frames <= 0) throw ContractError("frame count must be positive");
  MotionScript script;
  script.kind = kind;
  script.schedule.reserve(static_cast<std::size_t>(frames));

  const double mid_x = 0.5 * scene.width;
  const double mid_y = 0.5 * scene.height;
  const double two_pi = 2.0 * std::numbers::pi;

  double vx = 0.0;
  TargetPose pose{mid_x, mid_y, 1.0, 0.0, 0.0};
  switch (kind) {
    case MotionKind::Translation:
      vx = params.speed;
      pose.cx = scene.margin + 0.5 * scene.target_w + 16.0;
      break;
    case MotionKind::Composite:
      vx = 0.5 * params.speed;
      break;
    default:
      vx = params.drift;
      break;
  }

  for (int t = 0; t < frames; ++t) {
    switch (kind) {
      case MotionKind::Rotation:
        pose.rotation = std::remainder(t * params.rotation_rate, two_pi);
        break;
      case MotionKind::Scaling:
        pose.scale = 1.0 + params.scale_amplitude * std::sin(two_pi * t / params.scale_period);
        break;
      case MotionKind::Deformation:
        pose.shear = params.shear_amplitude * std::sin(two_pi * t / params.shear_period);
        break;
      case MotionKind::Composite:
        pose.rotation = std::remainder(t * 0.5 * params.rotation_rate, two_pi);
        pose.scale = 1.0 + 0.5 * params.scale_amplitude * std::sin(two_pi * t / params.scale_period);
        break;
      case MotionKind::Translation:
        break;
    }
    if (t > 0 && vx != 0.0) {
      // Bounce horizontally when the next step would leave the margin.
      TargetPose next = pose;
      next.cx += vx;
      if (!inside_margin(pose_box(next, scene.target_w, scene.target_h), scene)) vx = -vx;
      pose.cx += vx;
    }
    script.schedule.push_back(pose);
  }
  return script;
}

RowMatrix band_limited_noise(int width, int height, double sigma, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  // Noise on a padded canvas so the smoothed field has no border falloff.
  const int pw = width + 2 * radius;
  const int ph = height + 2 * radius;
  RowMatrix noise(ph, pw);
  for (int y = 0; y < ph; ++y)
    for (int x = 0; x < pw; ++x) noise(y, x) = gauss(rng);

  RowMatrix horiz(ph, width);
  for (int y = 0; y < ph; ++y)
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[static_cast<std::size_t>(k + radius)] * noise(y, x + radius + k);
      horiz(y, x) = acc;
    }
  RowMatrix out(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[static_cast<std::size_t>(k + radius)] * horiz(y + radius + k, x);
      out(y, x) = acc;
    }
  const double mn = out.minCoeff();
  const double mx = out.maxCoeff();
  if (mx > mn) out = ((out.array() - mn) / (mx - mn) * (hi - lo) + lo).matrix();
  else out.setConstant(0.5 * (lo + hi));
  return out;
}

SyntheticSequence generate_sequence(const MotionScript& script, const SceneConfig& scene) {
  if (scene.width <= 0 || scene.height <= 0 || scene.target_w <= 0 || scene.target_h <= 0)
    throw ContractError("scene dimensions must be positive");
  const RowMatrix texture =
      band_limited_noise(scene.target_w, scene.target_h, scene.texture_smoothing, scene.texture_seed, 0.05, 0.95);
  const RowMatrix background = band_limited_noise(scene.width, scene.height, scene.background_smoothing,
                                                  scene.background_seed, 0.25, 0.75);

  SyntheticSequence out;
  out.frames.reserve(script.frames());
  out.ground_truth.reserve(script.frames());
  const double half_w = 0.5 * scene.target_w;
  const double half_h = 0.5 * scene.target_h;
  for (std::size_t t = 0; t < script.frames(); ++t) {
    const TargetPose& pose = script.schedule[t];
    if (!(pose.scale > 0.0)) throw DataError("frame " + std::to_string(t) + ": non-positive scale");
    const Box box = pose_box(pose, scene.target_w, scene.target_h);
    if (!inside_margin(box, scene))
      throw DataError("frame " + std::to_string(t) + ": target leaves the frame (margin " +
                      std::to_string(scene.margin) + " px)");

    Frame frame{RowMatrix(background)};
    const double c = std::cos(pose.rotation);
    const double s = std::sin(pose.rotation);
    const int x0 = std::max(0, static_cast<int>(std::floor(box.x)) - 1);
    const int x1 = std::min(scene.width - 1, static_cast<int>(std::ceil(box.x + box.w)) + 1);
    const int y0 = std::max(0, static_cast<int>(std::floor(box.y)) - 1);
    const int y1 = std::min(scene.height - 1, static_cast<int>(std::ceil(box.y + box.h)) + 1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - pose.cx;
        const double dy = y + 0.5 - pose.cy;
        // Undo rotation, scale, then shear.
        const double v = (-s * dx + c * dy) / pose.scale;
        const double u = (c * dx + s * dy) / pose.scale - pose.shear * v;
        const double tu = std::floor(u + half_w);
        const double tv = std::floor(v + half_h);
        if (tu >= 0 && tv >= 0 && tu < scene.target_w && tv < scene.target_h)
          frame.at(x, y) = texture(static_cast<Index>(tv), static_cast<Index>(tu));
      }
    out.frames.push_back(std::move(frame));
    out.ground_truth.push_back(box);
  }
  return out;
}

std::vector<Frame> generate_texture_drift(int width, int height, double vx, double vy, int frames,
                                          std::uint64_t seed, double smoothing) {
  if (frames <= 0 || width <= 0 || height <= 0) throw ContractError("texture drift needs positive sizes");
  const double span_x = std::abs(vx) * (frames - 1);
  const double span_y = std::abs(vy) * (frames - 1);
  const int tw = width + static_cast<int>(std::ceil(span_x)) + 1;
  const int th = height + static_cast<int>(std::ceil(span_y)) + 1;
  const RowMatrix texture = band_limited_noise(tw, th, smoothing, seed, 0.05, 0.95);
  const double ox = vx < 0 ? span_x : 0.0;
  const double oy = vy < 0 ? span_y : 0.0;

  std::vector<Frame> out;
  out.reserve(static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t) {
    // The window moves by +v, so the content appears to move by -v.
    const double sx = ox + vx * t;
    const double sy = oy + vy * t;
    Frame f(width, height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const int tx = std::clamp(static_cast<int>(std::floor(sx + x + 0.5)), 0, tw - 1);
        const int ty = std::clamp(static_cast<int>(std::floor(sy + y + 0.5)), 0, th - 1);
        f.at(x, y) = texture(ty, tx);
      }
    out.push_back(std::move(f));
  }
  return out;
}

SyntheticSequence generate_drift_sequence(int width, int height, int vx, int vy, int frames, std::uint64_t seed,
                                          int margin, double smoothing) {
  if (margin < 0 || 2 * margin >= width || 2 * margin >= height)
    throw ContractError("drift margin leaves no box inside the frame");
  SyntheticSequence out;
  out.frames = generate_texture_drift(width, height, vx, vy, frames, seed, smoothing);
  const Box box{static_cast<double>(margin), static_cast<double>(margin), static_cast<double>(width - 2 * margin),
                static_cast<double>(height - 2 * margin)};
  out.ground_truth.assign(out.frames.size(), box);
  return out;
}

void write_sequence(const SyntheticSequence& seq, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
  char name[32];
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    std::snprintf(name, sizeof name, "frame_%04zu.pgm", t);
    save_frame(seq.frames[t], dir / name);
  }
  save_box_csv(seq.ground_truth, dir / "gt.csv");
}

}  // namespace hft
