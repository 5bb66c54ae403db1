#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "geoscore/consistency_score.hpp"
#include "geoscore/dpo_objective.hpp"
#include "geoscore/epipolar.hpp"
#include "geoscore/interchange_io.hpp"
#include "geoscore/motion_salience.hpp"
#include "geoscore/preference_curation.hpp"
#include "geoscore/prompt_scripting.hpp"
#include "geoscore/reports.hpp"
#include "geoscore/synthetic_oracle.hpp"

namespace fs = std::filesystem;
using namespace geoscore;

namespace {

enum Exit { kOk = 0, kUsage = 2, kIoExit = 3, kValidation = 4, kNumeric = 5 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingFile:
    case ErrorCode::kIo: return kIoExit;
    case ErrorCode::kInvalidInput:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kParse:
    case ErrorCode::kNonRotation:
    case ErrorCode::kNonFiniteDepth: return kValidation;
    case ErrorCode::kDegenerateGeometry:
    case ErrorCode::kDegenerateScene:
    case ErrorCode::kTrainingDiverged: return kNumeric;
  }
  return kValidation;
}

// Writes to `path`, or stdout when it is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  const fs::path p(path);
  if (p.has_parent_path()) io::make_dirs(p.parent_path());
  io::write_file(p, text);
}

template <typename F>
auto as_usage(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

PerceptualMetric parse_perceptual(const std::string& spec) {
  if (spec == "ssim") return PerceptualMetric::structural();
  const std::string prefix = "external:";
  if (spec.rfind(prefix, 0) == 0 && spec.size() > prefix.size()) {
    const fs::path table = spec.substr(prefix.size());
    std::istringstream in(io::read_file(table));
    try {
      return PerceptualMetric::precomputed(parse_perceptual_table(in));
    } catch (const Error& e) {
      fail(e.code(), table.string() + ": " + e.what());
    }
  }
  throw UsageError("--perceptual must be 'ssim' or 'external:FILE', got '" + spec + "'");
}

// ---- score ----

struct ScoreArgs {
  std::string scene;
  int frames = kDefaultFrameCount;
  int downsample = 1;
  std::string perceptual = "ssim";
  std::string out;
  int jobs = 1;
  bool leave_one_out = false;
};

int cmd_score(const ScoreArgs& a) {
  if (a.frames < 2) throw UsageError("--frames must be >= 2");
  if (a.downsample < 1) throw UsageError("--downsample must be >= 1");
  if (a.jobs < 1) throw UsageError("--jobs must be >= 1");
  ScoreOptions opts;
  opts.frames = a.frames;
  opts.downsample = a.downsample;
  opts.jobs = a.jobs;
  opts.leave_one_out = a.leave_one_out;
  opts.metric = parse_perceptual(a.perceptual);

  const SceneSequence seq = io::read_scene(a.scene);
  const auto start = std::chrono::steady_clock::now();
  const ConsistencyReport report = score(seq, opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  emit(a.out, io::dump(io::to_json(report)));
  std::fprintf(stderr, "scored %d frames in %.4f s (%.1f frames/s)\n", report.t_used, secs,
               secs > 0.0 ? report.t_used / secs : 0.0);
  return kOk;
}

// ---- pairs ----

struct PairsArgs {
  std::string manifest;
  double margin = 0.05;
  double winner_cap = 0.8;
  double static_threshold = kStaticThreshold;
  int frames = kDefaultFrameCount;
  int jobs = 1;
  std::string out;
};

fs::path drops_path(const std::string& out) {
  fs::path p(out);
  p.replace_extension(".drops.json");
  return p;
}

int cmd_pairs(const PairsArgs& a) {
  if (a.jobs < 1) throw UsageError("--jobs must be >= 1");
  if (a.frames < 2) throw UsageError("--frames must be >= 2");
  const fs::path mpath(a.manifest);
  const std::string text = io::read_file(mpath);
  io::Manifest manifest = as_usage([&] { return io::parse_manifest(text, mpath.parent_path(), mpath.string()); });

  // Candidates without scores are scored from their scene directories.
  std::vector<Candidate*> pending;
  for (auto& g : manifest.groups) {
    for (auto& mc : g) {
      if (!mc.scored) pending.push_back(&mc.candidate);
    }
  }
  std::vector<std::exception_ptr> errors(pending.size());
  auto work = [&](std::size_t i) {
    try {
      Candidate& c = *pending[i];
      fs::path ref(c.scene_ref);
      if (ref.is_relative()) ref = manifest.base_dir / ref;
      const SceneSequence seq = io::read_scene(ref);
      ScoreOptions opts;
      opts.frames = std::min<int>(a.frames, static_cast<int>(seq.size()));
      c.e_recon = score(seq, opts).e_recon;
      c.alpha = motion_stats(seq.poses).alpha;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  {
    const std::size_t jobs = std::min<std::size_t>(static_cast<std::size_t>(a.jobs), std::max<std::size_t>(1, pending.size()));
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        for (std::size_t i = w; i < pending.size(); i += jobs) work(i);
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<std::vector<Candidate>> groups;
  for (const auto& g : manifest.groups) {
    std::vector<Candidate> group;
    for (const auto& mc : g) group.push_back(mc.candidate);
    groups.push_back(std::move(group));
  }
  const CurationConfig config{a.margin, a.winner_cap, a.static_threshold};
  const CurationReport report = curate(groups, config);
  const std::string drops = io::dump(io::drop_report(report));
  if (a.out.empty() || a.out == "-") {
    std::cout << io::pairs_jsonl(report);
    std::cerr << drops;
  } else {
    emit(a.out, io::pairs_jsonl(report));
    emit(drops_path(a.out).string(), drops);
  }
  std::fprintf(stderr, "%zu groups, %zu pairs\n", report.groups.size(), report.pairs.size());
  return kOk;
}

// ---- synth ----

struct SynthArgs {
  std::string traj = "dolly";
  std::vector<std::string> corrupt;
  std::uint64_t seed = 0;
  int width = 96;
  int height = 96;
  int frames = 10;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  if (a.frames < 2) throw UsageError("--frames must be >= 2");
  if (a.width < 16 || a.height < 16) throw UsageError("--width and --height must be >= 16");
  const auto traj = as_usage([&] { return oracle::parse_trajectory(a.traj); });
  std::vector<oracle::Corruptor> corruptors;
  for (std::size_t i = 0; i < a.corrupt.size(); ++i) {
    const std::string& spec = a.corrupt[i];
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw UsageError("--corrupt expects kind:magnitude, got '" + spec + "'");
    oracle::Corruptor c;
    c.kind = as_usage([&] { return oracle::parse_corruption(spec.substr(0, colon)); });
    try {
      std::size_t used = 0;
      const std::string mag = spec.substr(colon + 1);
      c.magnitude = std::stod(mag, &used);
      if (used != mag.size()) throw std::invalid_argument(mag);
    } catch (const std::exception&) {
      throw UsageError("--corrupt magnitude in '" + spec + "' is not a number");
    }
    if (!(c.magnitude >= 0.0)) throw UsageError("--corrupt magnitude must be >= 0");
    c.seed = a.seed * 1000003ULL + i + 1;
    corruptors.push_back(c);
  }

  auto scene = oracle::make_room_scene(a.seed, traj, a.width, a.height, a.frames);
  SceneSequence seq = oracle::render_scene(scene);
  for (const auto& c : corruptors) seq = oracle::corrupt(seq, c);
  io::write_scene(seq, a.out);
  std::fprintf(stderr, "wrote %zu frames to %s\n", seq.size(), a.out.c_str());
  return kOk;
}

// ---- prompts ----

struct PromptArgs {
  int n = 1;
  std::uint64_t seed = 0;
  std::string vocab;
  std::string out;
};

int cmd_prompts(const PromptArgs& a) {
  if (a.n < 1) throw UsageError("--n must be >= 1");
  const MotionVocabulary vocab = a.vocab.empty() ? MotionVocabulary::standard() : io::read_vocabulary(a.vocab);
  std::string text;
  for (const auto& p : batch_prompts(vocab, a.n, a.seed)) text += io::to_json(p).dump() + "\n";
  emit(a.out, text);
  return kOk;
}

// ---- epipolar ----

struct EpipolarArgs {
  std::string scene;
  int frames = kDefaultFrameCount;
  std::string out;
};

int cmd_epipolar(const EpipolarArgs& a) {
  if (a.frames < 2) throw UsageError("--frames must be >= 2");
  const SceneSequence seq = io::read_scene(a.scene);
  EpipolarOptions opts;
  opts.frames = a.frames;
  emit(a.out, io::dump(io::to_json(epipolar_score(seq, opts))));
  return kOk;
}

// ---- dpo-demo ----

struct DpoArgs {
  int pairs = 64;
  int dim = 4;
  int steps = 500;
  double lr = 1e-2;
  double beta = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_dpo_demo(const DpoArgs& a) {
  if (a.pairs < 1 || a.dim < 1 || a.steps < 0) throw UsageError("--pairs, --dim must be >= 1 and --steps >= 0");
  if (!(a.lr > 0.0) || !(a.beta > 0.0)) throw UsageError("--lr and --beta must be positive");
  const auto sched = dpo::NoiseSchedule::cosine();
  const auto cohort = dpo::separable_cohort(a.pairs, a.dim, a.seed, sched);
  const auto trace = dpo::toy_align(cohort, sched, {a.beta, a.steps, a.lr});
  if (!a.out.empty()) emit(a.out, io::dump(io::to_json(trace)));
  const auto& last = trace.steps.back();
  std::printf("initial loss %.6f\nfinal loss %.6f\nfinal mean margin %.6f\npositive pairs %.1f%%\n",
              trace.steps.front().loss, last.loss, last.mean_margin, 100.0 * last.positive_fraction);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometric consistency scoring, preference curation and DPO utilities"};
  app.require_subcommand(1);

  ScoreArgs score_args;
  auto* score_cmd = app.add_subcommand("score", "Score the 3D consistency of a scene directory");
  score_cmd->add_option("scene", score_args.scene, "Scene directory")->required();
  score_cmd->add_option("--frames", score_args.frames, "Sampled frame count T")->capture_default_str();
  score_cmd->add_option("--downsample", score_args.downsample, "Back-projection pixel stride")->capture_default_str();
  score_cmd->add_option("--perceptual", score_args.perceptual, "ssim | external:FILE")->capture_default_str();
  score_cmd->add_option("--out", score_args.out, "Report path (default stdout)");
  score_cmd->add_option("--jobs", score_args.jobs, "Worker threads")->capture_default_str();
  score_cmd->add_flag("--leave-one-out", score_args.leave_one_out, "Exclude each frame's own points");

  PairsArgs pairs_args;
  auto* pairs_cmd = app.add_subcommand("pairs", "Build preference pairs from a candidate manifest");
  pairs_cmd->add_option("--groups", pairs_args.manifest, "Manifest JSON")->required();
  pairs_cmd->add_option("--margin", pairs_args.margin, "Minimum score margin")->capture_default_str();
  pairs_cmd->add_option("--winner-cap", pairs_args.winner_cap, "Maximum winner score")->capture_default_str();
  pairs_cmd->add_option("--static-threshold", pairs_args.static_threshold, "Motion score threshold")
      ->capture_default_str();
  pairs_cmd->add_option("--frames", pairs_args.frames, "T for scoring unscored candidates")->capture_default_str();
  pairs_cmd->add_option("--jobs", pairs_args.jobs, "Worker threads for scoring")->capture_default_str();
  pairs_cmd->add_option("--out", pairs_args.out, "Pairs JSONL (drop report goes next to it)");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Render a synthetic scene with exact depth and poses");
  synth_cmd->add_option("--traj", synth_args.traj, "orbit | dolly | lateral | static")->capture_default_str();
  synth_cmd->add_option("--corrupt", synth_args.corrupt, "kind:magnitude, repeatable");
  synth_cmd->add_option("--seed", synth_args.seed, "Scene seed")->capture_default_str();
  synth_cmd->add_option("--width", synth_args.width)->capture_default_str();
  synth_cmd->add_option("--height", synth_args.height)->capture_default_str();
  synth_cmd->add_option("--frames", synth_args.frames)->capture_default_str();
  synth_cmd->add_option("--out", synth_args.out, "Output scene directory")->required();

  PromptArgs prompt_args;
  auto* prompt_cmd = app.add_subcommand("prompts", "Generate scripted camera-motion prompts");
  prompt_cmd->add_option("--n", prompt_args.n, "Number of prompts")->capture_default_str();
  prompt_cmd->add_option("--seed", prompt_args.seed, "Base seed")->capture_default_str();
  prompt_cmd->add_option("--vocab", prompt_args.vocab, "Vocabulary JSON (default built-in)");
  prompt_cmd->add_option("--out", prompt_args.out, "JSONL path (default stdout)");

  EpipolarArgs epi_args;
  auto* epi_cmd = app.add_subcommand("epipolar", "Mean Sampson error over consecutive sampled frames");
  epi_cmd->add_option("scene", epi_args.scene, "Scene directory")->required();
  epi_cmd->add_option("--frames", epi_args.frames, "Sampled frame count")->capture_default_str();
  epi_cmd->add_option("--out", epi_args.out, "Report path (default stdout)");

  DpoArgs dpo_args;
  auto* dpo_cmd = app.add_subcommand("dpo-demo", "Align a linear velocity model on a separable cohort");
  dpo_cmd->add_option("--pairs", dpo_args.pairs)->capture_default_str();
  dpo_cmd->add_option("--dim", dpo_args.dim)->capture_default_str();
  dpo_cmd->add_option("--steps", dpo_args.steps)->capture_default_str();
  dpo_cmd->add_option("--lr", dpo_args.lr)->capture_default_str();
  dpo_cmd->add_option("--beta", dpo_args.beta)->capture_default_str();
  dpo_cmd->add_option("--seed", dpo_args.seed)->capture_default_str();
  dpo_cmd->add_option("--out", dpo_args.out, "Trace JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*score_cmd) return cmd_score(score_args);
    if (*pairs_cmd) return cmd_pairs(pairs_args);
    if (*synth_cmd) return cmd_synth(synth_args);
    if (*prompt_cmd) return cmd_prompts(prompt_args);
    if (*epi_cmd) return cmd_epipolar(epi_args);
    if (*dpo_cmd) return cmd_dpo_demo(dpo_args);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  }
  return kUsage;
}
