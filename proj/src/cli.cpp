#include "hft/cli.hpp"

#include "hft/hierarchy.hpp"
#include "hft/metrics.hpp"
#include "hft/synth.hpp"
#include "hft/tracker.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

namespace hft::cli {

namespace fs = std::filesystem;

namespace {

struct Usage : Error {
  using Error::Error;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Box parse_box_flag(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Usage("--init-box: bad number '" + item + "'");
    }
  }
  if (v.size() != 4) throw Usage("--init-box expects x,y,w,h");
  if (!(v[2] > 0 && v[3] > 0)) throw Usage("--init-box needs positive w,h");
  return {v[0], v[1], v[2], v[3]};
}

void require_file(const std::string& path, const char* flag) {
  if (!fs::is_regular_file(path)) throw IoError(std::string(flag) + ": no such file " + path);
}

void require_dir(const std::string& path, const char* flag) {
  if (!fs::is_directory(path)) throw IoError(std::string(flag) + ": no such directory " + path);
}

void require_writable_parent(const std::string& path, const char* flag) {
  const fs::path parent = fs::absolute(fs::path(path)).parent_path();
  if (!fs::is_directory(parent)) throw IoError(std::string(flag) + ": directory does not exist: " + parent.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void check_lambda(double lambda, std::ostream& err) {
  if (!(lambda >= 0.5 && lambda <= 20.0)) throw Usage("--lambda must lie in [0.5, 20]");
  if (lambda < 1.0 || lambda > 10.0) err << "warning: lambda " << lambda << " outside the tuned range [1, 10]\n";
}

void check_gamma(double gamma, std::ostream& err) {
  if (!(gamma >= 0.0 && gamma <= 1e6)) throw Usage("--gamma must lie in [0, 1e6]");
  if (gamma < 90.0 || gamma > 110.0) err << "warning: gamma " << gamma << " outside the tuned range [90, 110]\n";
}

// `--config FILE` holds `key=value` lines, merged before the command-line
// flags so explicit flags win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::vector<std::string> injected;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
      continue;
    }
    std::ifstream in(path);
    if (!in) throw IoError("--config: cannot read " + path);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw Usage("--config: expected key=value, got '" + line + "'");
      auto trim = [](std::string s) {
        s.erase(0, s.find_first_not_of(" \t"));
        s.erase(s.find_last_not_of(" \t") + 1);
        return s;
      };
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      injected.push_back("--" + key);
      if (value != "true") injected.push_back(value);
    }
  }
  if (!injected.empty() && !out.empty()) out.insert(out.begin() + 1, injected.begin(), injected.end());
  return out;
}

int default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

// --- subcommands -------------------------------------------------------------

struct SynthArgs {
  std::string pattern;
  int frames = 0;
  std::string out;
  std::uint64_t seed = 1;
  int width = 160;
  int height = 120;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const bool drift = a.pattern == "drift";
  const auto kind = parse_motion_kind(a.pattern);
  if (!kind && !drift) throw Usage("--pattern must be translation|rotation|scaling|deformation|composite|drift");
  if (a.frames < 1) throw Usage("--frames must be >= 1");
  if (a.width < 48 || a.height < 48) throw Usage("--width/--height must be >= 48");
  require_writable_parent(a.out, "--out");

  std::mt19937_64 gen(a.seed);
  SyntheticSequence seq;
  if (drift) {
    // One of the eight unit compass directions.
    const double angle = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(gen);
    const int vx = static_cast<int>(std::lround(std::cos(angle)));
    const int vy = static_cast<int>(std::lround(std::sin(angle)));
    seq = generate_drift_sequence(a.width, a.height, vx, vy, a.frames, gen());
  } else {
    SceneConfig scene;
    scene.width = a.width;
    scene.height = a.height;
    scene.texture_seed = gen();
    scene.background_seed = gen();
    seq = generate_sequence(make_script(*kind, a.frames, scene), scene);
  }
  write_sequence(seq, a.out);
  out << seq.frames.size() << " frames written to " << a.out << "\n";
  return kOk;
}

struct PretrainArgs {
  std::vector<std::string> data;
  std::string out;
  double lambda = 5.0;
  double lambda2 = -1.0;
  int f1 = 64;
  int f2 = 128;
  std::uint64_t seed = 1;
  int max_iters = 100;
  int sample_stride = 16;
};

int cmd_pretrain(const PretrainArgs& a, std::ostream& out, std::ostream& err) {
  check_lambda(a.lambda, err);
  if (a.lambda2 >= 0.0) check_lambda(a.lambda2, err);
  if (a.f1 < 2 || a.f1 % 2 || a.f2 < 2 || a.f2 % 2) throw Usage("--f1/--f2 must be even and >= 2");
  if (a.sample_stride < 1) throw Usage("--sample-stride must be >= 1");
  for (const auto& d : a.data) require_dir(d, "--data");
  require_writable_parent(a.out, "--out");

  std::vector<LabeledSequence> seqs;
  for (const auto& d : a.data) seqs.push_back(load_sequence_dir(d));
  const SampledTrainingSet s16 = sample_training_set(seqs, 16, a.sample_stride);
  const SampledTrainingSet s32 = sample_training_set(seqs, 32, a.sample_stride);
  if (s16.skipped + s32.skipped > 0)
    err << "warning: skipped " << s16.skipped + s32.skipped << " sequence(s) with boxes smaller than the patch\n";
  if (s16.set.empty() || s32.set.empty()) throw DataError("no training patches could be sampled");

  PretrainConfig cfg;
  cfg.lambda1 = a.lambda;
  cfg.lambda2 = a.lambda2 >= 0.0 ? a.lambda2 : a.lambda;
  cfg.filters1 = a.f1;
  cfg.filters2 = a.f2;
  cfg.seed = a.seed;
  cfg.optimizer.max_iters = a.max_iters;
  const PretrainResult r = pretrain(s16.set, s32.set, cfg);
  save_model(r.model, a.out);
  out << "layer1 objective " << fmt("%.6e", r.layer1.initial_value) << " -> " << fmt("%.6e", r.layer1.final_value)
      << " (" << r.layer1.iterations << " iterations, " << to_string(r.layer1.status) << ")\n";
  out << "layer2 objective " << fmt("%.6e", r.layer2.initial_value) << " -> " << fmt("%.6e", r.layer2.final_value)
      << " (" << r.layer2.iterations << " iterations, " << to_string(r.layer2.status) << ")\n";
  out << "whitening retained " << r.model.whitening.output_dim() << " of " << r.model.whitening.input_dim()
      << " dimensions\n";
  return kOk;
}

struct TrackingArgs {
  std::string model;
  std::string frames;
  std::string init_box;
  std::string out;
  std::string log;
  double lambda = 5.0;
  double gamma = 100.0;
  double sigma = 0.2;
  int particles = 600;
  int topk = 20;
  int update_every = 20;
  int init_frames = 20;
  int adapt_iters = 50;
  bool raw_only = false;
  std::uint64_t seed = 1;
  int threads = 1;
};

TrackerConfig tracker_config(const TrackingArgs& a) {
  TrackerConfig cfg;
  cfg.n_candidates = a.particles;
  cfg.top_k = a.topk;
  cfg.update_period = a.update_every;
  cfg.init_frames = a.init_frames;
  cfg.sigma = a.sigma;
  cfg.raw_only = a.raw_only;
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  cfg.adaptation.lambda = a.lambda;
  cfg.adaptation.gamma = a.gamma;
  cfg.adaptation.optimizer.max_iters = a.adapt_iters;
  try {
    cfg.validate();
  } catch (const ContractError& e) {
    throw Usage(e.what());
  }
  return cfg;
}

int cmd_adapt(const TrackingArgs& a, std::ostream& out, std::ostream& err) {
  check_lambda(a.lambda, err);
  check_gamma(a.gamma, err);
  require_file(a.model, "--model");
  require_dir(a.frames, "--frames");
  require_writable_parent(a.out, "--out");
  const Box init = parse_box_flag(a.init_box);
  const TrackerConfig cfg = tracker_config(a);

  const HierarchicalModel model = load_model(a.model);
  const std::vector<Frame> frames = load_frames_dir(a.frames);
  if (frames.empty()) throw DataError("--frames: no .pgm files in " + a.frames);
  const BootstrapResult boot = bootstrap_track(frames, init, cfg.init_frames, cfg);
  auto [set16, set32] = object_training_sets(boot.patches, model.sub_patch_stride);
  const AdaptResult r = adapt(model, set16, set32, cfg.adaptation);
  save_model(r.model, a.out);
  out << "bootstrapped " << boot.patches.size() << " frames\n";
  out << "layer1 |W-W_old|_F=" << fmt("%.6e", r.layer1.frobenius_change)
      << " relative=" << fmt("%.6e", r.layer1.relative_change) << " objective " << fmt("%.6e", r.layer1.objective_before)
      << " -> " << fmt("%.6e", r.layer1.objective_after) << "\n";
  out << "layer2 |W-W_old|_F=" << fmt("%.6e", r.layer2.frobenius_change)
      << " relative=" << fmt("%.6e", r.layer2.relative_change) << " objective " << fmt("%.6e", r.layer2.objective_before)
      << " -> " << fmt("%.6e", r.layer2.objective_after) << "\n";
  return kOk;
}

int cmd_track(const TrackingArgs& a, std::ostream& out, std::ostream& err) {
  check_lambda(a.lambda, err);
  check_gamma(a.gamma, err);
  require_file(a.model, "--model");
  require_dir(a.frames, "--frames");
  require_writable_parent(a.out, "--out");
  const std::string log_path = a.log.empty() ? a.out + ".log" : a.log;
  require_writable_parent(log_path, "--log");
  const Box init = parse_box_flag(a.init_box);
  const TrackerConfig cfg = tracker_config(a);

  const HierarchicalModel model = load_model(a.model);
  const std::vector<Frame> frames = load_frames_dir(a.frames);
  if (frames.empty()) throw DataError("--frames: no .pgm files in " + a.frames);
  const TrackResult r = run_tracker(frames, init, model, cfg);
  save_box_csv(r.boxes, a.out);
  std::string log;
  for (const auto& line : r.diagnostics) log += line + "\n";
  write_text(log_path, log);
  out << r.boxes.size() << " boxes written to " << a.out << " (" << r.adaptation_events << " adaptation events)\n";
  if (r.lost_frame) {
    err << "tracking lost at frame " << *r.lost_frame << "\n";
    return kTrackingLost;
  }
  return kOk;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path, std::ostream& out) {
  require_file(pred_path, "--pred");
  require_file(gt_path, "--gt");
  const auto pred = load_box_csv(pred_path);
  const auto gt = load_box_csv(gt_path);
  const MetricTrace ace = center_error(pred, gt);
  const MetricTrace aor = overlap_rate(pred, gt);
  out << "ACE=" << fmt("%.4f", ace.average) << " AOR=" << fmt("%.4f", aor.average) << "\n";
  return kOk;
}

void add_tracking_flags(CLI::App* sub, TrackingArgs& a, bool track) {
  sub->add_option("--model", a.model, "input model (.hftm)")->required();
  sub->add_option("--frames", a.frames, "directory of PGM frames")->required();
  sub->add_option("--init-box", a.init_box, "initial box x,y,w,h")->required();
  sub->add_option("--out", a.out, track ? "output boxes CSV" : "output model (.hftm)")->required();
  sub->add_option("--lambda", a.lambda, "slowness weight")->capture_default_str();
  sub->add_option("--gamma", a.gamma, "adaptation weight")->capture_default_str();
  sub->add_option("--init-frames", a.init_frames, "bootstrap frame count")->capture_default_str();
  sub->add_option("--particles", a.particles, "candidates per frame")->capture_default_str();
  sub->add_option("--topk", a.topk, "candidates re-ranked with learned features")->capture_default_str();
  sub->add_option("--sigma", a.sigma, "likelihood bandwidth")->capture_default_str();
  sub->add_option("--adapt-iters", a.adapt_iters, "L-BFGS iterations per adaptation")->capture_default_str();
  sub->add_option("--seed", a.seed, "random seed")->capture_default_str();
  sub->add_option("--threads", a.threads, "worker threads");
  if (track) {
    sub->add_option("--update-every", a.update_every, "adaptation period M")->capture_default_str();
    sub->add_option("--log", a.log, "diagnostics log (default: <out>.log)");
    sub->add_flag("--raw-only", a.raw_only, "rank with raw pixels only");
  }
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical slow-feature learning and particle-filter tracking", "hft"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic sequence with ground truth");
  s->add_option("--pattern", synth.pattern, "translation|rotation|scaling|deformation|composite|drift")->required();
  s->add_option("--frames", synth.frames, "frame count")->required();
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--seed", synth.seed, "random seed")->capture_default_str();
  s->add_option("--width", synth.width, "frame width")->capture_default_str();
  s->add_option("--height", synth.height, "frame height")->capture_default_str();
  int synth_threads = 0;
  s->add_option("--threads", synth_threads, "worker threads (unused)");

  PretrainArgs pre;
  int pre_threads = 0;
  auto* p = app.add_subcommand("pretrain", "learn the two-layer model from tracked sequences");
  p->add_option("--data", pre.data, "sequence directories (frames + gt.csv)")
      ->required()
      ->expected(1, -1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  p->add_option("--out", pre.out, "output model (.hftm)")->required();
  p->add_option("--lambda", pre.lambda, "slowness weight")->capture_default_str();
  p->add_option("--lambda2", pre.lambda2, "layer-2 slowness weight (default: --lambda)");
  p->add_option("--f1", pre.f1, "layer-1 filter count")->capture_default_str();
  p->add_option("--f2", pre.f2, "layer-2 filter count")->capture_default_str();
  p->add_option("--seed", pre.seed, "random seed")->capture_default_str();
  p->add_option("--max-iters", pre.max_iters, "L-BFGS iterations per layer")->capture_default_str();
  p->add_option("--sample-stride", pre.sample_stride, "patch grid stride")->capture_default_str();
  p->add_option("--threads", pre_threads, "worker threads");

  TrackingArgs adapt_args;
  adapt_args.threads = default_threads();
  auto* a = app.add_subcommand("adapt", "adapt a model to a target from bootstrap tracking");
  add_tracking_flags(a, adapt_args, false);

  TrackingArgs track_args;
  track_args.threads = default_threads();
  auto* t = app.add_subcommand("track", "track a target through a frame sequence");
  add_tracking_flags(t, track_args, true);

  std::string pred_path, gt_path;
  auto* e = app.add_subcommand("eval", "score predicted boxes against ground truth");
  e->add_option("--pred", pred_path, "predicted boxes CSV")->required();
  e->add_option("--gt", gt_path, "ground-truth boxes CSV")->required();

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);

    if (s->parsed()) return cmd_synth(synth, out);
    if (p->parsed()) return cmd_pretrain(pre, out, err);
    if (a->parsed()) return cmd_adapt(adapt_args, out, err);
    if (t->parsed()) return cmd_track(track_args, out, err);
    if (e->parsed()) return cmd_eval(pred_path, gt_path, out);
    return kUsage;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kUsage;
  } catch (const Usage& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kUsage;
  } catch (const IoError& ex) {
    err << "io error: " << ex.what() << "\n";
    return kUsage;
  } catch (const OptimizationError& ex) {
    err << "optimization error: " << ex.what() << "\n";
    return kOptimization;
  } catch (const TrackingLost& ex) {
    err << "tracking lost: " << ex.what() << "\n";
    return kTrackingLost;
  } catch (const Error& ex) {
    // Data, format and contract errors all mean the inputs are unusable.
    err << "data error: " << ex.what() << "\n";
    return kData;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace hft::cli
