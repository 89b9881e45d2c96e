#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cutaneous {

enum class ErrorCode {
  kInvalidArgument,
  kNoAssembly,
  kSingular,
  kUnreachable,
  kResolutionTooCoarse,
  kOutOfRange,
  kWorkspaceExceeded,
  kAmbiguous,
  kNoFeasibleLowerTarget,
  kEmptyInput,
  kMalformedMessage,
  kIllegalTransition,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNoAssembly: return "NoAssembly";
    case ErrorCode::kSingular: return "Singular";
    case ErrorCode::kUnreachable: return "Unreachable";
    case ErrorCode::kResolutionTooCoarse: return "ResolutionTooCoarse";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kWorkspaceExceeded: return "WorkspaceExceeded";
    case ErrorCode::kAmbiguous: return "Ambiguous";
    case ErrorCode::kNoFeasibleLowerTarget: return "NoFeasibleLowerTarget";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kMalformedMessage: return "MalformedMessage";
    case ErrorCode::kIllegalTransition: return "IllegalTransition";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cutaneous
