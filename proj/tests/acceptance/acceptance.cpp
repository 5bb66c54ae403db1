// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Exit status is nonzero when any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "geoscore/consistency_score.hpp"
#include "geoscore/dpo_objective.hpp"
#include "geoscore/epipolar.hpp"
#include "geoscore/interchange_io.hpp"
#include "geoscore/motion_salience.hpp"
#include "geoscore/preference_curation.hpp"
#include "geoscore/prompt_scripting.hpp"
#include "geoscore/synthetic_oracle.hpp"

using namespace geoscore;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const oracle::Trajectory kMixed[] = {oracle::Trajectory::kOrbit, oracle::Trajectory::kDolly,
                                     oracle::Trajectory::kLateral, oracle::Trajectory::kStatic};
const oracle::Trajectory kMoving[] = {oracle::Trajectory::kOrbit, oracle::Trajectory::kDolly,
                                      oracle::Trajectory::kLateral};

std::vector<SceneSequence> mixed_scenes(int n, std::uint64_t base, int size) {
  std::vector<SceneSequence> out;
  for (int s = 0; s < n; ++s) {
    out.push_back(oracle::render_scene(
        oracle::make_room_scene(base + static_cast<std::uint64_t>(s), kMixed[s % 4], size, size, 10)));
  }
  return out;
}

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "geoscore_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// ---- criteria ----

Outcome geometry_round_trip() {
  const auto scenes = mixed_scenes(20, 100, 96);
  const auto t0 = Clock::now();
  double worst_psnr = 1e9, worst_cov = 1.0;
  bool ok = true;
  for (const auto& seq : scenes) {
    const auto r = score(seq);
    for (const auto& f : r.per_frame) {
      worst_psnr = std::min(worst_psnr, psnr_from_mse(f.mse));
      ok = ok && psnr_from_mse(f.mse) >= 30.0;
    }
    worst_cov = std::min(worst_cov, r.coverage_mean);
    ok = ok && r.coverage_mean >= 0.9;
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 60.0;
  return {ok, fmt("20 scenes 96x96x10, min frame PSNR %.2f dB (>= 30), min coverage_mean %.4f (>= 0.9), %.2f s (< 60)",
                  worst_psnr, worst_cov, secs)};
}

Outcome score_monotonicity() {
  std::vector<SceneSequence> scenes;
  for (int s = 0; s < 20; ++s) {
    scenes.push_back(oracle::render_scene(oracle::make_room_scene(2000 + static_cast<std::uint64_t>(s), kMoving[s % 3])));
  }
  bool ok = true;
  std::string detail;
  for (auto kind : oracle::kAllCorruptions) {
    int rising = 0;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      double prev = -1.0;
      bool strict = true;
      for (double m : oracle::magnitude_ladder(kind)) {
        const double e = score(oracle::corrupt(scenes[s], {kind, m, 2000 + s})).e_recon;
        strict = strict && e > prev;
        prev = e;
      }
      rising += strict;
    }
    ok = ok && rising >= 19;
    detail += fmt("%s %d/20 ", std::string(oracle::to_string(kind)).c_str(), rising);
  }
  return {ok, detail + "(need >= 19/20 each)"};
}

Outcome frozen_frame_false_positive() {
  int sampson_ok = 0, score_ok = 0;
  double worst_ratio = 0.0;
  for (int s = 0; s < 10; ++s) {
    const auto seed = static_cast<std::uint64_t>(300 + s);
    const auto clean = oracle::render_scene(oracle::make_room_scene(seed, kMoving[s % 3]));
    const auto frozen = oracle::corrupt(clean, {oracle::CorruptionKind::kFrozenFrame, 1.0, seed});
    const auto k = static_cast<std::size_t>(oracle::frozen_anchor(static_cast<int>(clean.size())));
    const double dup = pair_sampson(frozen.frames[k], frozen.frames[k + 1]).sampson;
    const double clean_sampson = epipolar_score(clean).mean_sampson;
    worst_ratio = std::max(worst_ratio, clean_sampson > 0 ? dup / clean_sampson : (dup > 0 ? 1e9 : 0.0));
    sampson_ok += dup <= clean_sampson;
    score_ok += score(frozen).e_recon > score(clean).e_recon;
  }
  return {sampson_ok == 10 && score_ok == 10,
          fmt("duplicated-pair Sampson <= clean mean on %d/10, e_recon(frozen) > e_recon(clean) on %d/10", sampson_ok,
              score_ok)};
}

Outcome planted_cohort() {
  Rng rng(77);
  std::vector<std::vector<Candidate>> groups;
  std::map<std::string, std::optional<DropReason>> planted;
  auto add = [&](const std::string& id, std::vector<double> scores, std::vector<double> alphas,
                 std::optional<DropReason> reason) {
    std::vector<Candidate> g;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      g.push_back({id, static_cast<std::int64_t>(i), id + "/" + std::to_string(i), scores[i], alphas[i]});
    }
    groups.push_back(g);
    planted[id] = reason;
  };
  auto moving = [] { return std::vector<double>{1.0 + kMotionEpsilon, 1.05, 1.2}; };
  for (int i = 0; i < 20; ++i) {
    add("static_" + std::to_string(i), {0.1, 0.4, 0.7}, {kMotionEpsilon, kMotionEpsilon, 1.01},
        DropReason::kStaticMotion);
  }
  for (int i = 0; i < 20; ++i) {
    const double w = rng.uniform(0.05, 0.7);
    add("lowmargin_" + std::to_string(i), {w, w + rng.uniform(0.0, 0.05), w + 0.05}, moving(),
        DropReason::kMarginTooSmall);
  }
  for (int i = 0; i < 20; ++i) {
    const double w = rng.uniform(0.8001, 1.5);
    add("poor_" + std::to_string(i), {w + 0.3, w, w + rng.uniform(0.051, 0.6)}, moving(), DropReason::kWinnerTooPoor);
  }
  for (int i = 0; i < 40; ++i) {
    const double w = rng.uniform(0.0, 0.8);
    add("clean_" + std::to_string(i), {w + rng.uniform(0.051, 0.5), w, w + 0.01}, moving(), std::nullopt);
  }
  CurationConfig config;  // margin 0.05, cap 0.8, static threshold 0.001
  const auto report = curate(groups, config);
  int matching = 0;
  for (const auto& g : report.groups) matching += g.reason == planted.at(g.context_id);
  const bool ok = report.pairs.size() == 40 && matching == 100 && config.margin_min == 0.05 &&
                  config.winner_cap == 0.8 && config.static_threshold == 0.001 && kMotionLambda == 0.1;
  return {ok, fmt("%zu pairs (40), drops static %zu / margin %zu / winner %zu (20 each), %d/100 reasons match the plant",
                  report.pairs.size(), report.drops.at(DropReason::kStaticMotion),
                  report.drops.at(DropReason::kMarginTooSmall), report.drops.at(DropReason::kWinnerTooPoor), matching)};
}

Outcome motion_identities() {
  bool ok = true;
  double worst_tbar = 0.0, static_alpha = 0.0;
  for (int s = 0; s < 20; ++s) {
    const auto scene = oracle::make_room_scene(static_cast<std::uint64_t>(400 + s), kMixed[s % 4], 16, 16, 10);
    std::vector<CameraPose> poses;
    for (int i = 0; i < scene.frame_count; ++i) poses.push_back(oracle::trajectory_pose(scene, i));
    const auto m = motion_stats(poses);
    if (scene.trajectory == oracle::Trajectory::kStatic) {
      static_alpha = std::max(static_alpha, m.alpha);
      ok = ok && m.alpha == kMotionEpsilon && m.alpha <= 1e-6 && is_static(m);
    } else {
      worst_tbar = std::max(worst_tbar, std::abs(m.t_bar - 1.0));
      ok = ok && std::abs(m.t_bar - 1.0) <= 1e-12 && !is_static(m);
    }
  }
  Rng rng(5);
  for (int n = 0; n < 1000; ++n) {
    std::vector<CameraPose> poses(2 + rng.below(40));
    for (auto& p : poses) {
      p.R = axis_angle(Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()), rng.uniform(0.0, 3.1));
      p.t = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * std::pow(10.0, rng.uniform(-4.0, 4.0));
    }
    const double dev = std::abs(motion_stats(poses).t_bar - 1.0);
    worst_tbar = std::max(worst_tbar, dev);
    ok = ok && dev <= 1e-12;
  }
  return {ok, fmt("static alpha max %.3g (= eps <= 1e-6, filtered), moving |t_bar - 1| max %.3g (<= 1e-12) over 1015 "
                  "trajectories",
                  static_alpha, worst_tbar)};
}

Outcome dpo_correctness() {
  const auto zero = dpo::dpo_loss({0.3, 0.3, 0.3, 0.3}, 1.0);
  const double log2_err = std::abs(zero.loss - std::numbers::ln2);

  Rng rng(11);
  double worst_fd = 0.0;
  const double h = 1e-6;
  for (int n = 0; n < 1000; ++n) {
    const dpo::EnergyQuad q{rng.uniform(0.0, 4.0), rng.uniform(0.0, 4.0), rng.uniform(0.0, 4.0),
                            rng.uniform(0.0, 4.0)};
    const double beta = rng.uniform(0.1, 2.0);
    const auto lv = dpo::dpo_loss(q, beta);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}); };
    auto p = q, m = q;
    p.e_theta_w += h;
    m.e_theta_w -= h;
    worst_fd = std::max(worst_fd, rel(lv.grad_e_theta_w, (dpo::dpo_loss(p, beta).loss - dpo::dpo_loss(m, beta).loss) / (2 * h)));
    p = q;
    m = q;
    p.e_theta_l += h;
    m.e_theta_l -= h;
    worst_fd = std::max(worst_fd, rel(lv.grad_e_theta_l, (dpo::dpo_loss(p, beta).loss - dpo::dpo_loss(m, beta).loss) / (2 * h)));
  }

  const auto sched = dpo::NoiseSchedule::cosine();
  const auto cohort = dpo::separable_cohort(64, 4, 0, sched);
  const auto trace = dpo::toy_align(cohort, sched, {1.0, 500, 1e-2});
  const double positive = trace.steps.back().positive_fraction;

  const bool ok = log2_err <= 1e-12 && worst_fd < 1e-5 && positive >= 0.9;
  return {ok, fmt("|loss - log 2| %.2g (<= 1e-12), worst FD rel err %.2g (< 1e-5), toy_align positive margins %.1f%% "
                  "after 500 steps (>= 90%%)",
                  log2_err, worst_fd, 100.0 * positive)};
}

Outcome prompt_fidelity() {
  const auto vocab = MotionVocabulary::standard();
  const auto pool = vocab.pool();
  const std::set<std::string> table(pool.begin(), pool.end());
  int bad = 0;
  std::map<std::size_t, int> hist;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const auto p = generate_prompt(vocab, s);
    const auto again = generate_prompt(vocab, s);
    bool good = p.full_text == again.full_text && p.full_text.rfind(std::string(kStaticScenePrefix), 0) == 0 &&
                p.segments.size() >= 2 && p.segments.size() <= 3 &&
                std::set<std::string>(p.segments.begin(), p.segments.end()).size() == p.segments.size();
    for (const auto& seg : p.segments) good = good && table.count(seg) == 1;
    bad += !good;
    ++hist[p.segments.size()];
  }
  return {bad == 0 && table.size() == pool.size(),
          fmt("%d/10000 prompts violate prefix/count/vocabulary/determinism; %d with 2 segments, %d with 3; %zu phrases",
              bad, hist[2], hist[3], table.size())};
}

Outcome interchange() {
  bool ok = true;
  int identical = 0;
  const auto scenes = mixed_scenes(20, 100, 96);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const fs::path dir = work_dir() / ("rt_" + std::to_string(i));
    io::write_scene(scenes[i], dir);
    identical += io::read_scene(dir) == scenes[i];
  }
  ok = identical == 20;

  auto code_of = [](const std::function<void()>& f) -> std::optional<ErrorCode> {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return std::nullopt;
  };
  const SceneSequence& seq = scenes[0];
  auto fresh = [&](const std::string& name) {
    const fs::path d = work_dir() / name;
    io::write_scene(seq, d);
    return d;
  };
  int planted_ok = 0;
  {
    const auto d = fresh("reflect");
    auto poses = io::parse_json_file(d / "poses.json");
    for (std::size_t j = 6; j < 9; ++j) poses["poses"][1]["R"][j] = -poses["poses"][1]["R"][j].get<double>();
    io::write_file(d / "poses.json", io::dump(poses));
    planted_ok += code_of([&] { io::read_scene(d); }) == ErrorCode::kNonRotation;
  }
  {
    const auto d = fresh("missing");
    fs::remove(d / "frames" / "0004.ppm");
    planted_ok += code_of([&] { io::read_scene(d); }) == ErrorCode::kMissingFile;
  }
  {
    const auto d = fresh("size");
    io::write_pfm(DepthMap(10, 10, 1.0f), d / "depth" / "0002.pfm");
    planted_ok += code_of([&] { io::read_scene(d); }) == ErrorCode::kDimensionMismatch;
  }
  {
    const auto d = fresh("nan");
    DepthMap depth = seq.depths[3];
    depth(1, 1) = std::nanf("");
    io::write_pfm(depth, d / "depth" / "0003.pfm");
    planted_ok += code_of([&] { io::read_scene(d); }) == ErrorCode::kNonFiniteDepth;
  }
  ok = ok && planted_ok == 4;
  return {ok, fmt("write/read identical on %d/20 scenes; %d/4 planted violations gave their error code", identical,
                  planted_ok)};
}

Outcome scaling(const std::string& cli) {
  auto scene = oracle::make_room_scene(9, oracle::Trajectory::kOrbit, 96, 96, 48);
  scene.step = 0.01;
  const fs::path dir = work_dir() / "scaling_scene";
  io::write_scene(oracle::render_scene(scene), dir);
  const fs::path err = work_dir() / "scaling_stderr.txt";

  std::vector<double> medians;
  std::string detail;
  for (int t : {5, 10, 20, 40}) {
    std::vector<double> times;
    for (int rep = 0; rep < 5; ++rep) {
      const std::string cmd = "\"" + cli + "\" score \"" + dir.string() + "\" --frames " + std::to_string(t) +
                              " --out \"" + (work_dir() / "scaling.json").string() + "\" 2>\"" + err.string() + "\"";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "score subcommand failed at T=" + std::to_string(t)};
      const std::string line = io::read_file(err);
      const auto pos = line.find(" in ");
      if (pos == std::string::npos) return {false, "no timing line from the score subcommand"};
      times.push_back(std::stod(line.substr(pos + 4)));
    }
    std::sort(times.begin(), times.end());
    medians.push_back(times[2]);
    detail += fmt("T=%d %.4f s  ", t, times[2]);
  }
  bool ok = true;
  for (std::size_t i = 1; i < medians.size(); ++i) ok = ok && medians[i] > medians[i - 1];
  return {ok, detail + "(median of 5, strictly increasing)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : GEOSCORE_CLI_PATH;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"geometry round-trip", geometry_round_trip},
      {"score monotonicity", score_monotonicity},
      {"frozen-frame false positive", frozen_frame_false_positive},
      {"curation filter fidelity", planted_cohort},
      {"motion-score identities", motion_identities},
      {"DPO correctness", dpo_correctness},
      {"prompt script fidelity", prompt_fidelity},
      {"interchange round-trip", interchange},
      {"scaling report", [&] { return scaling(cli); }},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %-28s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(work_dir());
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
