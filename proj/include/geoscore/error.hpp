#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geoscore {

enum class ErrorCode {
  kInvalidInput,
  kDimensionMismatch,
  kMissingFile,
  kIo,
  kParse,
  kNonRotation,
  kNonFiniteDepth,
  kDegenerateGeometry,
  kDegenerateScene,
  kTrainingDiverged,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid_input";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kMissingFile: return "missing_file";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kNonRotation: return "non_rotation";
    case ErrorCode::kNonFiniteDepth: return "non_finite_depth";
    case ErrorCode::kDegenerateGeometry: return "degenerate_geometry";
    case ErrorCode::kDegenerateScene: return "degenerate_scene";
    case ErrorCode::kTrainingDiverged: return "training_diverged";
  }
  return "unknown";
}

// Every failure raised by the library carries one of the codes above so that
// callers (the CLI in particular) can map it onto a stable exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace geoscore
