#pragma once

#include <concepts>
#include <optional>
#include <string_view>

#include "florence2_interfaces/error_code.hpp"
#include "florence2_interfaces/execute_task.hpp"
#include "florence2_interfaces/task_spec.hpp"

namespace florence2_interfaces {

/// Anything that can answer "which task is this token?".
template <typename R>
concept TaskLookup = requires(const R& registry, std::string_view token) {
  { registry.lookup(token) } -> std::convertible_to<std::optional<TaskSpec>>;
};

enum class RejectionReason { kUnknownTask, kNoImageAvailable, kMissingTextInput, kAmbiguousImageSource };

inline ErrorCode to_error_code(RejectionReason reason) {
  switch (reason) {
    case RejectionReason::kUnknownTask: return ErrorCode::kUnknownTask;
    case RejectionReason::kNoImageAvailable: return ErrorCode::kNoImageAvailable;
    case RejectionReason::kMissingTextInput: return ErrorCode::kMissingTextInput;
    case RejectionReason::kAmbiguousImageSource: return ErrorCode::kAmbiguousImageSource;
  }
  return ErrorCode::kUnknownTask;
}

struct ValidationResult {
  std::optional<RejectionReason> rejection;

  bool ok() const { return !rejection.has_value(); }
  explicit operator bool() const { return ok(); }
};

/// Total over every field combination. Checks run in order: task, image source, text.
///
/// Exactly one image source must resolve: the embedded image, or the cached
/// frame when use_latest_image is set. Both resolving, or neither being asked
/// for, is AMBIGUOUS_IMAGE_SOURCE; asking for the cache while it is empty is
/// NO_IMAGE_AVAILABLE.
template <TaskLookup Registry>
ValidationResult validate_request(const ExecuteTaskRequest& request, const Registry& registry,
                                  bool cache_populated) {
  if (request.task_token.empty()) return {RejectionReason::kUnknownTask};
  std::optional<TaskSpec> spec = registry.lookup(request.task_token);
  if (!spec) return {RejectionReason::kUnknownTask};

  const bool embedded = request.image.has_value();
  const bool cached = request.use_latest_image && cache_populated;
  if (embedded && cached) return {RejectionReason::kAmbiguousImageSource};
  if (!embedded) {
    if (!request.use_latest_image) return {RejectionReason::kAmbiguousImageSource};
    if (!cached) return {RejectionReason::kNoImageAvailable};
  }

  if (spec->requires_text_input && request.text_input.empty()) {
    return {RejectionReason::kMissingTextInput};
  }
  return {};
}

}  // namespace florence2_interfaces
