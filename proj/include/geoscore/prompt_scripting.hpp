#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "geoscore/error.hpp"
#include "geoscore/random.hpp"

namespace geoscore {

inline constexpr std::string_view kStaticScenePrefix =
    "A realistic continuation of the reference scene. Everything must remain completely static: "
    "no moving people, no shifting objects, and no dynamic elements. Only the camera is allowed to move.";

inline constexpr std::string_view kCameraMotionLead = "Camera motion: ";

/// Camera-motion primitives grouped by category.
struct MotionVocabulary {
  std::vector<std::string> translations;
  std::vector<std::string> rotations;
  std::vector<std::string> complex_paths;

  static MotionVocabulary standard() {
    return {
        {"push forward into the scene", "pull back away from the scene", "slide sideways across the room",
         "move laterally along the furniture line", "drift across the space", "glide toward the room center",
         "shift through the foreground", "move diagonally through the space"},
        {"pan across the room", "pan toward the main subject", "scan across the shelves",
         "tilt upward toward the ceiling", "tilt downward toward the floor", "roll gently to one side",
         "look around the environment"},
        {"orbit around the scene", "arc around the center of the room", "circle around the main object",
         "swing around the room", "pivot around the viewpoint"},
    };
  }

  /// Translations, then rotations, then complex paths.
  std::vector<std::string> pool() const {
    std::vector<std::string> all;
    all.reserve(translations.size() + rotations.size() + complex_paths.size());
    all.insert(all.end(), translations.begin(), translations.end());
    all.insert(all.end(), rotations.begin(), rotations.end());
    all.insert(all.end(), complex_paths.begin(), complex_paths.end());
    return all;
  }
};

struct PromptScript {
  std::vector<std::string> segments;
  std::vector<std::string> connectors;  // connectors[i] joins segments[i] and segments[i + 1]
  std::string motion;                   // joined motion description
  std::string full_text;
  std::uint64_t seed = 0;
};

/// Joins segments with connectors alternating "then" / "followed by".
inline std::pair<std::string, std::vector<std::string>> join_segments(const std::vector<std::string>& segments) {
  std::string text;
  std::vector<std::string> connectors;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i > 0) {
      connectors.emplace_back(i % 2 == 1 ? "then" : "followed by");
      text += ", " + connectors.back() + " ";
    }
    text += segments[i];
  }
  return {text, connectors};
}

/// Draws 2 or 3 distinct primitives from the whole vocabulary and assembles
/// the prompt; a pure function of (vocabulary, seed).
inline PromptScript generate_prompt(const MotionVocabulary& vocab, std::uint64_t seed) {
  require(!vocab.translations.empty() && !vocab.rotations.empty() && !vocab.complex_paths.empty(),
          ErrorCode::kInvalidInput, "motion vocabulary categories must be non-empty");
  Rng rng(seed);
  const std::size_t n = 2 + static_cast<std::size_t>(rng.below(2));
  std::vector<std::string> pool = vocab.pool();
  require(pool.size() >= n, ErrorCode::kInvalidInput,
          "motion vocabulary has " + std::to_string(pool.size()) + " primitives, need " + std::to_string(n));

  PromptScript p;
  p.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
    p.segments.push_back(pool[i]);
  }
  auto [motion, connectors] = join_segments(p.segments);
  p.motion = std::move(motion);
  p.connectors = std::move(connectors);
  p.full_text = std::string(kStaticScenePrefix) + " " + std::string(kCameraMotionLead) + p.motion + ".";
  return p;
}

inline std::vector<PromptScript> batch_prompts(const MotionVocabulary& vocab, int n, std::uint64_t base_seed) {
  require(n >= 1, ErrorCode::kInvalidInput, "prompt count must be >= 1");
  std::vector<PromptScript> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(generate_prompt(vocab, base_seed + static_cast<std::uint64_t>(i)));
  return out;
}

}  // namespace geoscore
