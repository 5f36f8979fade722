#include "hft/metrics.hpp"
#include "hft/synth.hpp"
#include "hft/tracker.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace hft;

namespace {

Frame random_frame(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Frame f(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) f.at(x, y) = u(rng);
  return f;
}

// Small model with the default geometry, built without training.
HierarchicalModel tiny_model() {
  HierarchicalModel m;
  m.layer1 = LayerEncoder(random_orthonormal_transform(8, 256, 1));
  m.whitening.mean = Vector::Zero(16);
  m.whitening.projection = Matrix::Identity(16, 16);
  m.whitening.eigenvalues = Vector::Ones(16);
  m.layer2 = LayerEncoder(random_orthonormal_transform(8, 16, 2));
  return m;
}

TrackerConfig fast_config() {
  TrackerConfig cfg;
  cfg.n_candidates = 100;
  cfg.top_k = 10;
  cfg.init_frames = 4;
  cfg.update_period = 3;
  cfg.adaptation.optimizer.max_iters = 5;
  return cfg;
}

}  // namespace

TEST_CASE("state box conversions") {
  const TrackState s = TrackState::from_box({10, 20, 30, 40});
  CHECK(s.cx == 25.0);
  CHECK(s.cy == 40.0);
  CHECK(s.bounding_box() == Box{10, 20, 30, 40});
  TrackState r = s;
  r.rotation = std::numbers::pi / 2;
  const Box b = r.bounding_box();
  CHECK(b.w == doctest::Approx(40.0));
  CHECK(b.h == doctest::Approx(30.0));
  CHECK_THROWS_AS(TrackState::from_box({0, 0, 0, 5}), ContractError);
}

TEST_CASE("propagate: zero noise copies, determinism, empirical spread") {
  TrackState s = TrackState::from_box({10, 10, 20, 20});
  const auto same = propagate(s, MotionModel{0, 0, 0, 0}, 5, 1);
  for (const auto& x : same) CHECK(x == s);
  CHECK(propagate(s, MotionModel{}, 10, 7) == propagate(s, MotionModel{}, 10, 7));
  const auto many = propagate(s, MotionModel{3.0, 1.0, 0.1, 3.0}, 100000, 3);
  double sum = 0, sq = 0;
  for (const auto& x : many) {
    sum += x.cx;
    sq += x.cx * x.cx;
    CHECK(x.rotation > -std::numbers::pi);
    CHECK(x.rotation <= std::numbers::pi);
  }
  const double mean = sum / many.size();
  const double sd = std::sqrt(sq / many.size() - mean * mean);
  CHECK(std::abs(sd - 3.0) < 0.02 * 3.0);
  CHECK_THROWS_AS(propagate(s, MotionModel{}, 0, 1), ContractError);
}

TEST_CASE("candidate patches") {
  const Frame f = random_frame(64, 64, 1);
  const TrackState s = TrackState::from_box({16, 16, 32, 32});
  const auto p = candidate_patch(f, s);
  REQUIRE(p);
  CHECK(p->side == 32);
  CHECK((p->values - extract_patch(f, 32, 32, 32).values).lpNorm<Eigen::Infinity>() < 1e-12);

  Frame flat(64, 64);
  flat.pixels.setConstant(0.4);
  TrackState big = s;
  big.scale = 2.0;
  const auto z = candidate_patch(flat, big);
  REQUIRE(z);
  CHECK(z->values.isZero(0.0));

  Frame checker(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) checker.at(x, y) = ((x / 4) + (y / 4)) % 2;
  TrackState flipped = s;
  flipped.rotation = std::numbers::pi;
  const auto a = candidate_patch(checker, s), b = candidate_patch(checker, flipped);
  REQUIRE(a);
  REQUIRE(b);
  CHECK((a->values - b->values).lpNorm<Eigen::Infinity>() < 1e-12);

  TrackState outside = s;
  outside.cx = -40;
  CHECK_FALSE(candidate_patch(f, outside).has_value());
}

TEST_CASE("likelihood examples") {
  ExemplarLibrary lib(3, 1.0);
  CHECK_THROWS_AS(lib.likelihood(Vector::Ones(2)), ContractError);
  lib.add(Vector{{1.0, 0.0}});
  CHECK(likelihood(lib, Vector{{5.0, 0.0}}) == 1.0);
  CHECK(likelihood(lib, Vector{{0.0, 2.0}}) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  ExemplarLibrary wide(3, 1e9);
  wide.add(Vector{{1.0, 0.0}});
  CHECK(wide.likelihood(Vector{{-1.0, 0.3}}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(lib.likelihood(Vector::Ones(3)), ContractError);
  for (int k = 0; k < 10; ++k) {
    lib.add(Vector{{1.0, double(k)}});
    CHECK(lib.size() <= lib.capacity());
  }
  CHECK(unit_normalized(Vector::Zero(3)).isZero(0.0));
}

TEST_CASE("resampling and weight normalization") {
  std::mt19937_64 rng(1);
  const auto idx = systematic_resample({0.0, 1.0, 0.0, 3.0}, 8, rng);
  CHECK(idx.size() == 8);
  CHECK(std::count(idx.begin(), idx.end(), 1) == 2);
  CHECK(std::count(idx.begin(), idx.end(), 3) == 6);
  CHECK_THROWS_AS(systematic_resample({0.0, 0.0}, 3, rng), ContractError);
  const double ninf = -std::numeric_limits<double>::infinity();
  const auto w = normalize_log_weights({-1000.0, -1001.0, ninf});
  CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w[2] == 0.0);
  CHECK(w[0] / w[1] == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("step invariants") {
  const Frame f = random_frame(96, 96, 2);
  const TrackState s = TrackState::from_box({32, 32, 32, 32});
  const Patch ref = *candidate_patch(f, s);
  TrackerConfig cfg = fast_config();
  ParticleSet prev{{s}, {1.0}};
  const Vector ref_unit = unit_normalized(ref.values);
  CandidateScorer raw = [&](const std::vector<const Patch*>& ps) {
    std::vector<double> d;
    for (const Patch* p : ps) d.push_back((unit_normalized(p->values) - ref_unit).norm());
    return d;
  };
  std::mt19937_64 rng(3);
  const auto r = step(f, prev, ref, raw, 0.2, cfg, rng, 1);
  double sum = 0;
  int nonzero = 0;
  for (double w : r.particles.weights) {
    sum += w;
    nonzero += w > 0;
  }
  CHECK(std::abs(sum - 1.0) < 1e-9);
  CHECK(nonzero <= cfg.top_k);
  CHECK(std::find(r.top.begin(), r.top.end(), r.predicted_index) != r.top.end());

  // Scaling every likelihood by a constant (shifting d^2) keeps the prediction.
  CandidateScorer shifted = [&](const std::vector<const Patch*>& ps) {
    auto d = raw(ps);
    for (double& v : d) v = std::sqrt(v * v + 0.5);
    return d;
  };
  std::mt19937_64 rng2(3);
  CHECK(step(f, prev, ref, shifted, 0.2, cfg, rng2, 1).predicted == r.predicted);
}

TEST_CASE("static scene with zero motion noise keeps the initial box") {
  const Frame f = random_frame(80, 80, 4);
  const std::vector<Frame> frames(8, f);
  TrackerConfig cfg = fast_config();
  cfg.motion = MotionModel{0, 0, 0, 0};
  const Box init{20, 24, 32, 32};
  const auto r = run_tracker(frames, init, tiny_model(), cfg);
  REQUIRE(r.boxes.size() == 8);
  for (const Box& b : r.boxes) CHECK(b == init);
}

TEST_CASE("short sequences never adapt") {
  const std::vector<Frame> frames(3, random_frame(80, 80, 5));
  const auto model = tiny_model();
  const auto r = run_tracker(frames, {20, 20, 32, 32}, model, fast_config());
  CHECK(r.adaptation_events == 0);
  CHECK(r.diagnostics.empty());
  CHECK(r.model == model);
}

TEST_CASE("adaptation schedule: initial event then every M frames") {
  SceneConfig scene;
  const auto seq = generate_sequence(make_script(MotionKind::Translation, 13, scene), scene);
  const auto r = run_tracker(seq.frames, seq.ground_truth[0], tiny_model(), fast_config());
  // init 4, M 3, 13 frames: events after frames 4, 7, 10, 13.
  REQUIRE(r.diagnostics.size() == 4);
  CHECK(r.adaptation_events == 4);
  CHECK(r.diagnostics[0].rfind("frame=4 event=initial", 0) == 0);
  CHECK(r.diagnostics[3].rfind("frame=13 event=update", 0) == 0);
  for (const auto& line : r.diagnostics) CHECK(line.find("status=ok") != std::string::npos);
  CHECK_FALSE(r.model == tiny_model());
}

TEST_CASE("raw-only mode tracks translation without adapting") {
  SceneConfig scene;
  const auto seq = generate_sequence(make_script(MotionKind::Translation, 30, scene), scene);
  TrackerConfig cfg;
  cfg.raw_only = true;
  const auto r = run_tracker(seq.frames, seq.ground_truth[0], tiny_model(), cfg);
  CHECK(r.diagnostics.empty());
  CHECK(center_error(r.boxes, seq.ground_truth).average <= 3.0);
}

TEST_CASE("results are identical across thread counts") {
  SceneConfig scene;
  const auto seq = generate_sequence(make_script(MotionKind::Rotation, 10, scene), scene);
  TrackerConfig cfg = fast_config();
  cfg.threads = 1;
  const auto a = run_tracker(seq.frames, seq.ground_truth[0], tiny_model(), cfg);
  cfg.threads = 4;
  const auto b = run_tracker(seq.frames, seq.ground_truth[0], tiny_model(), cfg);
  CHECK(a.boxes == b.boxes);
  CHECK(a.diagnostics == b.diagnostics);
  CHECK(a.model == b.model);
}

TEST_CASE("tracking loss reports the frame and keeps earlier boxes") {
  Frame f = random_frame(64, 64, 6);
  std::vector<Frame> frames{f, f, Frame(4, 4)};
  TrackerConfig cfg = fast_config();
  cfg.raw_only = true;
  const auto r = run_tracker(frames, {16, 16, 32, 32}, tiny_model(), cfg);
  REQUIRE(r.lost_frame.has_value());
  CHECK(*r.lost_frame == 2);
  CHECK(r.boxes.size() == 2);
}

TEST_CASE("bootstrap and object training sets") {
  SceneConfig scene;
  const auto seq = generate_sequence(make_script(MotionKind::Translation, 10, scene), scene);
  const auto boot = bootstrap_track(seq.frames, seq.ground_truth[0], 6, fast_config());
  CHECK(boot.boxes.size() == 6);
  CHECK(boot.patches.size() == 6);
  const auto [s16, s32] = object_training_sets(boot.patches, 16);
  CHECK(s32.total_length() == 6);
  CHECK(s16.sequences.size() == 4);
  CHECK(s16.total_length() == 24);
}

TEST_CASE("config validation") {
  TrackerConfig cfg;
  cfg.n_candidates = 10;
  cfg.top_k = 20;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = TrackerConfig{};
  cfg.update_period = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = TrackerConfig{};
  cfg.motion.std_cx = -1;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("parallel_for covers every index once") {
  std::vector<int> hits(37, 0);
  parallel_for(hits.size(), 5, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(4, 2, [](std::size_t i) {
                    if (i == 3) throw DataError("boom");
                  }),
                  DataError);
}
