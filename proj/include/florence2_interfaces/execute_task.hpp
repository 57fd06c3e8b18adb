#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "florence2_interfaces/detection_set.hpp"
#include "florence2_interfaces/raster_image.hpp"

namespace florence2_interfaces {

/// Shared request shape for the ExecuteTask service and the ExecuteTask action goal.
struct ExecuteTaskRequest {
  std::string task_token;
  std::string text_input;
  std::optional<RasterImage> image;
  bool use_latest_image = false;

  friend bool operator==(const ExecuteTaskRequest&, const ExecuteTaskRequest&) = default;
};

/// Shared response shape for the service response and the action result.
struct ExecuteTaskResponse {
  bool success = false;
  std::string error_message;
  std::string results_json;
  std::optional<DetectionSet> detections;
  double inference_time = 0.0;

  static ExecuteTaskResponse failure(std::string message) {
    ExecuteTaskResponse response;
    response.error_message = std::move(message);
    return response;
  }

  friend bool operator==(const ExecuteTaskResponse&, const ExecuteTaskResponse&) = default;
};

enum class FeedbackStage { kReceived = 0, kPreprocessing = 1, kInferenceRunning = 2, kPostprocessing = 3 };

constexpr std::string_view to_string(FeedbackStage stage) {
  switch (stage) {
    case FeedbackStage::kReceived: return "RECEIVED";
    case FeedbackStage::kPreprocessing: return "PREPROCESSING";
    case FeedbackStage::kInferenceRunning: return "INFERENCE_RUNNING";
    case FeedbackStage::kPostprocessing: return "POSTPROCESSING";
  }
  return "";
}

struct ActionFeedback {
  FeedbackStage stage = FeedbackStage::kReceived;
  double elapsed = 0.0;

  friend bool operator==(const ActionFeedback&, const ActionFeedback&) = default;
};

/// Terminal goal state, as reported by an action server alongside the result.
enum class GoalStatus { kSucceeded, kAborted, kCanceled };

constexpr std::string_view to_string(GoalStatus status) {
  switch (status) {
    case GoalStatus::kSucceeded: return "SUCCEEDED";
    case GoalStatus::kAborted: return "ABORTED";
    case GoalStatus::kCanceled: return "CANCELED";
  }
  return "";
}

struct ActionResult {
  GoalStatus status = GoalStatus::kAborted;
  ExecuteTaskResponse response;
};

}  // namespace florence2_interfaces
