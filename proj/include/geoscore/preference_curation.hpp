#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "geoscore/error.hpp"
#include "geoscore/motion_salience.hpp"

namespace geoscore {

/// One generated sample of a conditioning context, already scored.
struct Candidate {
  std::string context_id;
  std::int64_t seed = 0;
  std::string scene_ref;
  double e_recon = 0.0;
  double alpha = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct PreferencePair {
  std::string context_id;
  Candidate winner;
  Candidate loser;
  double margin = 0.0;
};

enum class DropReason { kStaticMotion, kMarginTooSmall, kWinnerTooPoor };

inline constexpr std::array<DropReason, 3> kAllDropReasons = {
    DropReason::kStaticMotion, DropReason::kMarginTooSmall, DropReason::kWinnerTooPoor};

inline std::string_view to_string(DropReason r) {
  switch (r) {
    case DropReason::kStaticMotion: return "static_motion";
    case DropReason::kMarginTooSmall: return "margin_too_small";
    case DropReason::kWinnerTooPoor: return "winner_too_poor";
  }
  return "static_motion";
}

struct CurationConfig {
  double margin_min = 0.05;
  double winner_cap = 0.8;
  double static_threshold = kStaticThreshold;
};

/// Absorbs decimal representation error in score differences, so a margin
/// that is nominally equal to margin_min counts as not exceeding it.
inline constexpr double kMarginSlack = 1e-12;
inline constexpr double kScoreTieTolerance = 1e-12;

struct GroupOutcome {
  std::string context_id;
  std::size_t candidates = 0;
  std::size_t moving = 0;
  std::optional<PreferencePair> pair;
  std::optional<DropReason> reason;
};

namespace detail {

// Strict "better" order: lower score, then lower seed, then scene_ref.
inline bool better(const Candidate& a, const Candidate& b) {
  if (std::abs(a.e_recon - b.e_recon) > kScoreTieTolerance) return a.e_recon < b.e_recon;
  return std::tie(a.seed, a.scene_ref) < std::tie(b.seed, b.scene_ref);
}

}  // namespace detail

/// Best-versus-worst pair of one group after the motion, margin and
/// winner-quality filters, in that order.
inline GroupOutcome build_pairs(const std::vector<Candidate>& group, const CurationConfig& config = {}) {
  require(!group.empty(), ErrorCode::kInvalidInput, "candidate group is empty");
  const std::string& ctx = group.front().context_id;
  for (const auto& c : group) {
    require(c.context_id == ctx, ErrorCode::kInvalidInput,
            "group mixes context ids '" + ctx + "' and '" + c.context_id + "'");
    require(std::isfinite(c.e_recon) && c.e_recon >= 0.0 && std::isfinite(c.alpha), ErrorCode::kInvalidInput,
            "candidate seed " + std::to_string(c.seed) + " of '" + ctx + "' is not scored");
  }

  GroupOutcome out;
  out.context_id = ctx;
  out.candidates = group.size();

  std::vector<Candidate> moving;
  for (const auto& c : group) {
    if (c.alpha >= config.static_threshold) moving.push_back(c);
  }
  out.moving = moving.size();
  if (moving.size() < 2) {
    out.reason = DropReason::kStaticMotion;
    return out;
  }

  const Candidate* best = &moving.front();
  const Candidate* worst = &moving.front();
  for (const auto& c : moving) {
    if (detail::better(c, *best)) best = &c;
    if (detail::better(*worst, c)) worst = &c;
  }
  const Candidate& winner = *best;
  const Candidate& loser = *worst;
  const double margin = loser.e_recon - winner.e_recon;
  if (!(margin > config.margin_min + kMarginSlack)) {
    out.reason = DropReason::kMarginTooSmall;
    return out;
  }
  if (winner.e_recon > config.winner_cap) {
    out.reason = DropReason::kWinnerTooPoor;
    return out;
  }
  out.pair = PreferencePair{ctx, winner, loser, margin};
  return out;
}

struct CurationReport {
  std::vector<GroupOutcome> groups;  // sorted by context_id
  std::vector<PreferencePair> pairs;
  std::map<DropReason, std::size_t> drops;
  std::optional<double> yield;  // pairs / groups; empty when there are no groups
};

inline CurationReport curate(const std::vector<std::vector<Candidate>>& groups, const CurationConfig& config = {}) {
  CurationReport report;
  for (auto r : kAllDropReasons) report.drops[r] = 0;

  std::set<std::string> seen;
  for (const auto& g : groups) {
    auto outcome = build_pairs(g, config);
    require(seen.insert(outcome.context_id).second, ErrorCode::kInvalidInput,
            "duplicate context id '" + outcome.context_id + "'");
    report.groups.push_back(std::move(outcome));
  }
  std::sort(report.groups.begin(), report.groups.end(),
            [](const GroupOutcome& a, const GroupOutcome& b) { return a.context_id < b.context_id; });
  for (const auto& g : report.groups) {
    if (g.pair) report.pairs.push_back(*g.pair);
    if (g.reason) ++report.drops[*g.reason];
  }
  if (!groups.empty()) {
    report.yield = static_cast<double>(report.pairs.size()) / static_cast<double>(groups.size());
  }
  return report;
}

}  // namespace geoscore
