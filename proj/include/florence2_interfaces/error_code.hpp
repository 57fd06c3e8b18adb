#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace florence2_interfaces {

// Every failure that crosses a module or process boundary carries one of these.
// The textual names are part of the wire contract (error_message prefixes,
// client output), so never renumber or rename them.
enum class ErrorCode {
  kUnknownTask,
  kNoImageAvailable,
  kMissingTextInput,
  kAmbiguousImageSource,
  kSchemaMismatch,
  kWrongOutputKind,
  kParseError,
  kGpuUnavailable,
  kModelNotFound,
  kOutOfMemory,
  kInferenceFailure,
  kUnsupportedEncoding,
  kMalformedImage,
  kBusy,
  kCanceled,
  kStreamEmpty,
  kNodeNotProcessing,
  kTimeout,
  kNodeUnreachable,
  kInvalidConfig,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownTask: return "UNKNOWN_TASK";
    case ErrorCode::kNoImageAvailable: return "NO_IMAGE_AVAILABLE";
    case ErrorCode::kMissingTextInput: return "MISSING_TEXT_INPUT";
    case ErrorCode::kAmbiguousImageSource: return "AMBIGUOUS_IMAGE_SOURCE";
    case ErrorCode::kSchemaMismatch: return "SCHEMA_MISMATCH";
    case ErrorCode::kWrongOutputKind: return "WRONG_OUTPUT_KIND";
    case ErrorCode::kParseError: return "PARSE_ERROR";
    case ErrorCode::kGpuUnavailable: return "GPU_UNAVAILABLE";
    case ErrorCode::kModelNotFound: return "MODEL_NOT_FOUND";
    case ErrorCode::kOutOfMemory: return "OUT_OF_MEMORY";
    case ErrorCode::kInferenceFailure: return "INFERENCE_FAILURE";
    case ErrorCode::kUnsupportedEncoding: return "UNSUPPORTED_ENCODING";
    case ErrorCode::kMalformedImage: return "MALFORMED_IMAGE";
    case ErrorCode::kBusy: return "BUSY";
    case ErrorCode::kCanceled: return "CANCELED";
    case ErrorCode::kStreamEmpty: return "STREAM_EMPTY";
    case ErrorCode::kNodeNotProcessing: return "NODE_NOT_PROCESSING";
    case ErrorCode::kTimeout: return "TIMEOUT";
    case ErrorCode::kNodeUnreachable: return "NODE_UNREACHABLE";
    case ErrorCode::kInvalidConfig: return "INVALID_CONFIG";
  }
  return "UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(format(code, detail)), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  static std::string format(ErrorCode code, const std::string& detail) {
    std::string out(to_string(code));
    if (!detail.empty()) {
      out += ": ";
      out += detail;
    }
    return out;
  }

  ErrorCode code_;
};

}  // namespace florence2_interfaces
