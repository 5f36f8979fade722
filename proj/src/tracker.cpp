#include "hft/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <thread>

namespace hft {

TrackState TrackState::from_box(const Box& box) {
  if (!(box.w > 0.0 && box.h > 0.0)) throw ContractError("track box needs positive size");
  return {box.cx(), box.cy(), 1.0, 0.0, box.w, box.h};
}

Box TrackState::bounding_box() const {
  const double hw = 0.5 * base_w * scale;
  const double hh = 0.5 * base_h * scale;
  const double c = std::abs(std::cos(rotation));
  const double s = std::abs(std::sin(rotation));
  const double ex = c * hw + s * hh;
  const double ey = s * hw + c * hh;
  return {cx - ex, cy - ey, 2.0 * ex, 2.0 * ey};
}

// --- exemplar library --------------------------------------------------------

Vector unit_normalized(const Vector& v) {
  const double n = v.norm();
  return n > 0.0 ? Vector(v / n) : Vector(Vector::Zero(v.size()));
}

ExemplarLibrary::ExemplarLibrary(std::size_t capacity, double sigma) : capacity_(capacity), sigma_(sigma) {
  if (capacity_ == 0) throw ContractError("exemplar library capacity must be >= 1");
  if (!(sigma_ > 0.0)) throw ContractError("likelihood bandwidth must be positive");
}

void ExemplarLibrary::add(const Vector& feature) {
  if (!exemplars_.empty() && feature.size() != exemplars_.front().size())
    throw ContractError("exemplar dimension mismatch");
  if (exemplars_.size() == capacity_) exemplars_.pop_front();
  exemplars_.push_back(unit_normalized(feature));
}

double ExemplarLibrary::distance(const Vector& feature) const {
  if (exemplars_.empty()) throw ContractError("exemplar library is empty");
  if (feature.size() != exemplars_.front().size())
    throw ContractError("feature dimension " + std::to_string(feature.size()) + " != exemplar dimension " +
                        std::to_string(exemplars_.front().size()));
  const Vector u = unit_normalized(feature);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : exemplars_) best = std::min(best, (u - e).norm());
  return best;
}

double ExemplarLibrary::likelihood(const Vector& feature) const {
  const double d = distance(feature);
  return std::exp(-d * d / (2.0 * sigma_ * sigma_));
}

double likelihood(const ExemplarLibrary& lib, const Vector& feature) { return lib.likelihood(feature); }

// --- config ------------------------------------------------------------------

void TrackerConfig::validate() const {
  if (n_candidates < 1) throw ContractError("n_candidates must be >= 1");
  if (top_k < 1 || top_k > n_candidates) throw ContractError("top_k must be in [1, n_candidates]");
  if (update_period < 1) throw ContractError("update period M must be >= 1");
  if (init_frames < 1) throw ContractError("init_frames must be >= 1");
  if (!(sigma > 0.0)) throw ContractError("sigma must be positive");
  if (motion.std_cx < 0 || motion.std_cy < 0 || motion.std_scale < 0 || motion.std_rotation < 0)
    throw ContractError("motion standard deviations must be non-negative");
  if (threads < 1) throw ContractError("threads must be >= 1");
}

// --- sampling ----------------------------------------------------------------

namespace {

double wrap_angle(double a) {
  // Map to (-pi, pi].
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

TrackState perturb(const TrackState& s, const MotionModel& m, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  TrackState out = s;
  // Draw order is fixed so results depend only on the generator state.
  const double ncx = gauss(rng), ncy = gauss(rng), nsc = gauss(rng), nrot = gauss(rng);
  out.cx += m.std_cx * ncx;
  out.cy += m.std_cy * ncy;
  out.scale *= std::exp(m.std_scale * nsc);
  out.rotation = wrap_angle(out.rotation + m.std_rotation * nrot);
  return out;
}

}  // namespace

std::vector<TrackState> propagate(const TrackState& prev, const MotionModel& motion, int n, std::uint64_t seed) {
  if (n < 1) throw ContractError("propagate needs n >= 1");
  std::mt19937_64 rng(seed);
  std::vector<TrackState> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(perturb(prev, motion, rng));
  return out;
}

std::vector<std::size_t> systematic_resample(const std::vector<double>& weights, std::size_t n, std::mt19937_64& rng) {
  if (weights.empty()) throw ContractError("cannot resample an empty particle set");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw ContractError("particle weights sum to zero");
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double step = total / static_cast<double>(n);
  double u = uni(rng) * step;
  std::vector<std::size_t> idx;
  idx.reserve(n);
  std::size_t j = 0;
  double cum = weights[0];
  for (std::size_t i = 0; i < n; ++i) {
    while (u > cum && j + 1 < weights.size()) cum += weights[++j];
    idx.push_back(j);
    u += step;
  }
  return idx;
}

std::vector<double> normalize_log_weights(const std::vector<double>& log_lik) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : log_lik) top = std::max(top, v);
  std::vector<double> w(log_lik.size(), 0.0);
  if (!std::isfinite(top)) return w;
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::isfinite(log_lik[i]) ? std::exp(log_lik[i] - top) : 0.0;
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

std::optional<Patch> candidate_patch(const Frame& frame, const TrackState& state) {
  constexpr int side = 32;
  const double w = state.base_w * state.scale;
  const double h = state.base_h * state.scale;
  const double c = std::cos(state.rotation);
  const double s = std::sin(state.rotation);
  Patch p;
  p.side = side;
  p.values.resize(side * side);
  int inside = 0;
  for (int r = 0; r < side; ++r) {
    const double ly = ((r + 0.5) / side - 0.5) * h;
    for (int q = 0; q < side; ++q) {
      const double lx = ((q + 0.5) / side - 0.5) * w;
      const double x = state.cx + c * lx - s * ly;
      const double y = state.cy + s * lx + c * ly;
      const int ix = static_cast<int>(std::floor(x));
      const int iy = static_cast<int>(std::floor(y));
      if (ix >= 0 && iy >= 0 && ix < frame.width() && iy < frame.height()) ++inside;
      p.values[r * side + q] = frame.at(std::clamp(ix, 0, frame.width() - 1), std::clamp(iy, 0, frame.height() - 1));
    }
  }
  if (2 * inside < side * side) return std::nullopt;
  normalize_patch_values(p.values);
  return p;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// --- step --------------------------------------------------------------------

StepResult step(const Frame& frame, const ParticleSet& prev, const Patch& reference, const CandidateScorer& scorer,
                double sigma, const TrackerConfig& cfg, std::mt19937_64& rng, int frame_index) {
  if (prev.states.empty() || prev.states.size() != prev.weights.size())
    throw ContractError("step needs a nonempty, consistent particle set");
  const auto n = static_cast<std::size_t>(cfg.n_candidates);

  // (a) resample and propagate; all randomness is drawn before any parallel work.
  const auto parents = systematic_resample(prev.weights, n, rng);
  std::vector<TrackState> candidates;
  candidates.reserve(n);
  for (std::size_t i = 0; i < n; ++i) candidates.push_back(perturb(prev.states[parents[i]], cfg.motion, rng));

  // (b) coarse raw-pixel ranking
  std::vector<std::optional<Patch>> patches(n);
  std::vector<double> coarse(n, std::numeric_limits<double>::infinity());
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    patches[i] = candidate_patch(frame, candidates[i]);
    if (patches[i]) coarse[i] = (patches[i]->values - reference.values).norm();
  });
  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (patches[i]) order.push_back(i);
  if (order.empty()) throw TrackingLost("all candidates fell outside frame " + std::to_string(frame_index), frame_index);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return coarse[a] < coarse[b]; });
  order.resize(std::min(order.size(), static_cast<std::size_t>(cfg.top_k)));

  // (c) fine scoring of the top_k only
  std::vector<const Patch*> top_patches;
  top_patches.reserve(order.size());
  for (std::size_t i : order) top_patches.push_back(&*patches[i]);
  const std::vector<double> dist = scorer(top_patches);

  // (d) weights proportional to the likelihood
  std::vector<double> log_lik(n, -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < order.size(); ++k) log_lik[order[k]] = -dist[k] * dist[k] / (2.0 * sigma * sigma);
  StepResult out;
  out.particles.states = std::move(candidates);
  out.particles.weights = normalize_log_weights(log_lik);

  // (e) argmax, lowest index on ties
  std::size_t best = order.front();
  for (std::size_t i : order) {
    const double wi = out.particles.weights[i];
    const double wb = out.particles.weights[best];
    if (wi > wb || (wi == wb && i < best)) best = i;
  }
  out.predicted_index = best;
  out.predicted = out.particles.states[best];
  out.predicted_patch = std::move(*patches[best]);
  out.top = std::move(order);
  return out;
}

// --- full loop ---------------------------------------------------------------

std::pair<TrainingSet, TrainingSet> object_training_sets(const std::vector<Patch>& patches, int sub_patch_stride) {
  TrainingSet set32;
  PatchSequence seq;
  seq.sequence_id = "object";
  seq.patches = patches;
  set32.sequences.push_back(std::move(seq));
  TrainingSet set16 = split_sub_patches(set32, sub_patch_stride);
  return {std::move(set16), std::move(set32)};
}

namespace {

std::vector<double> raw_distances(const std::vector<const Patch*>& patches, const Vector& reference_unit) {
  std::vector<double> d;
  d.reserve(patches.size());
  for (const Patch* p : patches) d.push_back((unit_normalized(p->values) - reference_unit).norm());
  return d;
}

class Session {
public:
  Session(const std::vector<Frame>& frames, const Box& init_box, const TrackerConfig& cfg)
      : frames_(frames), cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
    if (frames_.empty()) throw ContractError("tracking needs at least one frame");
    const TrackState init = TrackState::from_box(init_box);
    auto templ = candidate_patch(frames_[0], init);
    if (!templ) throw ContractError("initial box lies outside frame 0");
    particles_.states = {init};
    particles_.weights = {1.0};
    reference_ = *templ;
    boxes_.push_back(init_box);
    patches_.push_back(std::move(*templ));
  }

  std::size_t processed() const { return boxes_.size(); }
  bool done() const { return processed() >= frames_.size(); }

  // Tracks the next frame; `scorer` null means raw-pixel distance to the reference.
  void advance(const CandidateScorer* scorer, double sigma) {
    const int t = static_cast<int>(processed());
    const Vector ref_unit = unit_normalized(reference_.values);
    CandidateScorer raw = [&](const std::vector<const Patch*>& ps) { return raw_distances(ps, ref_unit); };
    StepResult r = step(frames_[static_cast<std::size_t>(t)], particles_, reference_, scorer ? *scorer : raw, sigma,
                        cfg_, rng_, t);
    particles_ = std::move(r.particles);
    reference_ = r.predicted_patch;
    boxes_.push_back(r.predicted.bounding_box());
    patches_.push_back(std::move(r.predicted_patch));
  }

  const std::vector<Box>& boxes() const { return boxes_; }
  const std::vector<Patch>& patches() const { return patches_; }
  std::vector<Box>& boxes() { return boxes_; }

private:
  const std::vector<Frame>& frames_;
  TrackerConfig cfg_;
  std::mt19937_64 rng_;
  ParticleSet particles_;
  Patch reference_;
  std::vector<Box> boxes_;
  std::vector<Patch> patches_;
};

std::string format_event(int frame, const char* kind, const AdaptResult& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "frame=%d event=%s layer1_before=%.9e layer1_after=%.9e layer2_before=%.9e layer2_after=%.9e "
                "layer1_iters=%d layer2_iters=%d status=ok",
                frame, kind, r.layer1.objective_before, r.layer1.objective_after, r.layer2.objective_before,
                r.layer2.objective_after, r.layer1.iterations, r.layer2.iterations);
  return buf;
}

}  // namespace

BootstrapResult bootstrap_track(const std::vector<Frame>& frames, const Box& init_box, int frames_to_track,
                                const TrackerConfig& cfg) {
  Session session(frames, init_box, cfg);
  const auto limit = std::min<std::size_t>(frames.size(), static_cast<std::size_t>(std::max(frames_to_track, 1)));
  while (session.processed() < limit) session.advance(nullptr, cfg.sigma);
  return {session.boxes(), session.patches()};
}

TrackResult run_tracker(const std::vector<Frame>& frames, const Box& init_box, const HierarchicalModel& model,
                        const TrackerConfig& cfg) {
  TrackResult result;
  result.model = model;
  Session session(frames, init_box, cfg);

  ExemplarLibrary library(cfg.library_capacity, cfg.sigma);
  std::deque<Patch> library_patches;
  const HierarchicalModel* current = &result.model;

  auto feature_of = [&](const Patch& p) -> Vector {
    return cfg.raw_only ? Vector(p.values) : encode_hier(*current, p).combined;
  };
  auto rebuild_library = [&] {
    library.clear();
    for (const auto& p : library_patches) library.add(feature_of(p));
  };
  auto remember = [&](const Patch& p) {
    library_patches.push_back(p);
    if (library_patches.size() > cfg.library_capacity) library_patches.pop_front();
  };
  auto run_adaptation = [&](std::size_t first, std::size_t count, int frame, const char* kind) {
    const std::vector<Patch> recent(session.patches().begin() + static_cast<std::ptrdiff_t>(first),
                                    session.patches().begin() + static_cast<std::ptrdiff_t>(first + count));
    auto [set16, set32] = object_training_sets(recent, result.model.sub_patch_stride);
    try {
      AdaptResult r = adapt(result.model, set16, set32, cfg.adaptation);
      result.diagnostics.push_back(format_event(frame, kind, r));
      result.model = std::move(r.model);
    } catch (const Error& e) {
      result.diagnostics.push_back("frame=" + std::to_string(frame) + " event=" + kind +
                                   " status=failed reason=\"" + e.what() + "\"");
    }
    ++result.adaptation_events;
  };

  CandidateScorer learned = [&](const std::vector<const Patch*>& ps) {
    std::vector<double> d(ps.size());
    parallel_for(ps.size(), cfg.threads, [&](std::size_t i) { d[i] = library.distance(feature_of(*ps[i])); });
    return d;
  };

  const auto n_init = static_cast<std::size_t>(cfg.init_frames);
  const auto period = static_cast<std::size_t>(cfg.update_period);
  auto after_frame = [&] {
    const std::size_t count = session.processed();
    if (count == n_init) {
      if (!cfg.raw_only) run_adaptation(0, n_init, static_cast<int>(count), "initial");
      for (const auto& p : session.patches()) remember(p);
      rebuild_library();
    } else if (count > n_init && (count - n_init) % period == 0) {
      if (!cfg.raw_only) run_adaptation(count - period, period, static_cast<int>(count), "update");
      remember(session.patches().back());
      rebuild_library();
    }
  };

  try {
    after_frame();
    while (!session.done()) {
      const bool bootstrapping = session.processed() < n_init;
      session.advance(bootstrapping ? nullptr : &learned, cfg.sigma);
      after_frame();
    }
  } catch (const TrackingLost& lost) {
    result.lost_frame = lost.frame();
  }
  result.boxes = session.boxes();
  return result;
}

}  // namespace hft
