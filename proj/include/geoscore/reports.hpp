#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
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

// JSON views of the library's reports and of the curation manifest.

namespace geoscore::io {

using nlohmann::json;

inline json to_json(const ConsistencyReport& r) {
  json frames = json::array();
  for (const auto& f : r.per_frame) {
    frames.push_back({{"frame_index", f.frame_index},
                      {"mse", f.mse},
                      {"perceptual", f.perceptual},
                      {"coverage_fraction", f.coverage_fraction}});
  }
  return {{"scene_id", r.scene_id},
          {"e_recon", r.e_recon},
          {"t_used", r.t_used},
          {"coverage_mean", r.coverage_mean},
          {"per_frame", frames}};
}

inline json to_json(const MotionStats& m) {
  return {{"delta_t", m.delta_t}, {"delta_theta", m.delta_theta}, {"s_trans", m.s_trans},
          {"t_bar", m.t_bar},     {"r_bar", m.r_bar},             {"alpha", m.alpha}};
}

inline json to_json(const EpipolarReport& r) {
  json pairs = json::array();
  for (const auto& p : r.pairs) {
    pairs.push_back({{"frame_i", p.frame_i},
                     {"frame_j", p.frame_j},
                     {"matches", p.matches},
                     {"inliers", p.inliers},
                     {"sampson", p.sampson}});
  }
  return {{"mean_sampson", r.mean_sampson}, {"pairs", pairs}};
}

inline json to_json(const dpo::AlignmentTrace& t) {
  json steps = json::array();
  for (const auto& s : t.steps) {
    steps.push_back({{"step", s.step},
                     {"loss", s.loss},
                     {"mean_margin", s.mean_margin},
                     {"positive_fraction", s.positive_fraction}});
  }
  return {{"steps", steps}, {"final_margins", t.final_margins}};
}

inline json to_json(const PromptScript& p) {
  return {{"seed", p.seed},
          {"segments", p.segments},
          {"connectors", p.connectors},
          {"motion", p.motion},
          {"text", p.full_text}};
}

inline json to_json(const PreferencePair& p) {
  return {{"context_id", p.context_id},       {"winner", p.winner.scene_ref},  {"loser", p.loser.scene_ref},
          {"winner_seed", p.winner.seed},     {"loser_seed", p.loser.seed},    {"winner_score", p.winner.e_recon},
          {"loser_score", p.loser.e_recon},   {"margin", p.margin}};
}

/// Summary of a curation run: per-reason drop counts and the per-group
/// outcome, in context_id order.
inline json drop_report(const CurationReport& r) {
  json drops = json::object();
  for (const auto& [reason, count] : r.drops) drops[std::string(to_string(reason))] = count;
  json groups = json::array();
  for (const auto& g : r.groups) {
    json o = {{"context_id", g.context_id}, {"candidates", g.candidates}, {"moving", g.moving}};
    o["outcome"] = g.pair ? "pair" : std::string(to_string(*g.reason));
    groups.push_back(std::move(o));
  }
  return {{"groups_total", r.groups.size()},
          {"pairs", r.pairs.size()},
          {"yield", r.yield ? json(*r.yield) : json(nullptr)},
          {"drops", drops},
          {"groups", groups}};
}

/// One JSON object per line.
inline std::string pairs_jsonl(const CurationReport& r) {
  std::string out;
  for (const auto& p : r.pairs) out += to_json(p).dump() + "\n";
  return out;
}

// ---- curation manifest ----
//
// {"groups": [{"context_id": "...",
//              "candidates": [{"seed": 0, "scene_ref": "dir", "e_recon": 0.1, "alpha": 0.4}, ...]}]}
//
// e_recon and alpha are optional; a candidate missing either is scored from
// its scene_ref, resolved relative to the manifest's directory.

struct ManifestCandidate {
  Candidate candidate;
  bool scored = false;
};

struct Manifest {
  std::vector<std::vector<ManifestCandidate>> groups;
  std::filesystem::path base_dir;
};

inline Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir,
                               const std::string& what) {
  Manifest m;
  m.base_dir = base_dir;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return m;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, what + ": " + e.what());
  }
  const auto groups = json_field<std::vector<json>>(root, "groups", what);
  std::set<std::string> seen;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const std::string gw = what + ": group " + std::to_string(gi);
    const auto ctx = json_field<std::string>(groups[gi], "context_id", gw);
    require(seen.insert(ctx).second, ErrorCode::kInvalidInput, what + ": duplicate context_id '" + ctx + "'");
    const auto cands = json_field<std::vector<json>>(groups[gi], "candidates", gw);
    if (cands.empty()) fail(ErrorCode::kParse, gw + ": no candidates");
    std::vector<ManifestCandidate> group;
    for (std::size_t ci = 0; ci < cands.size(); ++ci) {
      const std::string cw = gw + " candidate " + std::to_string(ci);
      ManifestCandidate mc;
      mc.candidate.context_id = ctx;
      mc.candidate.seed = json_field<std::int64_t>(cands[ci], "seed", cw);
      if (cands[ci].contains("scene_ref")) mc.candidate.scene_ref = json_field<std::string>(cands[ci], "scene_ref", cw);
      const bool has_e = cands[ci].contains("e_recon");
      const bool has_a = cands[ci].contains("alpha");
      if (has_e) mc.candidate.e_recon = json_field<double>(cands[ci], "e_recon", cw);
      if (has_a) mc.candidate.alpha = json_field<double>(cands[ci], "alpha", cw);
      mc.scored = has_e && has_a;
      if (!mc.scored && mc.candidate.scene_ref.empty()) {
        fail(ErrorCode::kParse, cw + ": needs either e_recon and alpha or a scene_ref to score");
      }
      group.push_back(std::move(mc));
    }
    m.groups.push_back(std::move(group));
  }
  return m;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path), path.parent_path(), path.string());
}

inline json to_json(const Manifest& m) {
  json groups = json::array();
  for (const auto& g : m.groups) {
    json cands = json::array();
    for (const auto& mc : g) {
      json c = {{"seed", mc.candidate.seed}};
      if (!mc.candidate.scene_ref.empty()) c["scene_ref"] = mc.candidate.scene_ref;
      if (mc.scored) {
        c["e_recon"] = mc.candidate.e_recon;
        c["alpha"] = mc.candidate.alpha;
      }
      cands.push_back(std::move(c));
    }
    groups.push_back({{"context_id", g.front().candidate.context_id}, {"candidates", cands}});
  }
  return {{"groups", groups}};
}

// ---- motion vocabulary ----

inline json to_json(const MotionVocabulary& v) {
  return {{"translations", v.translations}, {"rotations", v.rotations}, {"complex_paths", v.complex_paths}};
}

inline MotionVocabulary parse_vocabulary(const std::string& text, const std::string& what) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, what + ": " + e.what());
  }
  MotionVocabulary v;
  v.translations = json_field<std::vector<std::string>>(root, "translations", what);
  v.rotations = json_field<std::vector<std::string>>(root, "rotations", what);
  v.complex_paths = json_field<std::vector<std::string>>(root, "complex_paths", what);
  return v;
}

inline MotionVocabulary read_vocabulary(const std::filesystem::path& path) {
  return parse_vocabulary(read_file(path), path.string());
}

}  // namespace geoscore::io
