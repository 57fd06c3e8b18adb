#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "florence2_interfaces/error_code.hpp"
#include "florence2_interfaces/execute_task.hpp"

// Field-for-field encodings of the ExecuteTask contract. Image payloads are
// carried as JSON binary values, so these trees must go over the wire as CBOR.

namespace florence2_interfaces {

inline nlohmann::json encode(const Stamp& stamp) {
  return {{"sec", stamp.sec}, {"nanosec", stamp.nanosec}};
}

inline Stamp decode_stamp(const nlohmann::json& j) {
  return {j.at("sec").get<std::int64_t>(), j.at("nanosec").get<std::uint32_t>()};
}

inline nlohmann::json encode(const RasterImage& image) {
  return {{"width", image.width},
          {"height", image.height},
          {"format", to_string(image.format)},
          {"data", nlohmann::json::binary(image.data)},
          {"stamp", encode(image.stamp)},
          {"frame_id", image.frame_id},
          {"source_bgr", image.source_bgr}};
}

inline RasterImage decode_image(const nlohmann::json& j) {
  RasterImage image;
  image.width = j.at("width").get<std::uint32_t>();
  image.height = j.at("height").get<std::uint32_t>();
  const auto format = j.at("format").get<std::string>();
  if (format == "rgb8") {
    image.format = PixelFormat::kRgb8;
  } else if (format == "mono8") {
    image.format = PixelFormat::kMono8;
  } else {
    throw Error(ErrorCode::kUnsupportedEncoding, format);
  }
  image.data = j.at("data").get_binary();
  image.stamp = decode_stamp(j.at("stamp"));
  image.frame_id = j.value("frame_id", "");
  image.source_bgr = j.value("source_bgr", false);
  return image;
}

inline nlohmann::json encode(const DetectionSet& set) {
  nlohmann::json detections = nlohmann::json::array();
  for (const auto& d : set.detections) {
    detections.push_back({{"center_x", d.center_x},
                          {"center_y", d.center_y},
                          {"size_x", d.size_x},
                          {"size_y", d.size_y},
                          {"label", d.label},
                          {"score", d.score}});
  }
  return {{"detections", detections}, {"source_stamp", encode(set.source_stamp)},
          {"frame_id", set.frame_id}};
}

inline DetectionSet decode_detection_set(const nlohmann::json& j) {
  DetectionSet set;
  for (const auto& d : j.at("detections")) {
    set.detections.push_back({d.at("center_x").get<double>(), d.at("center_y").get<double>(),
                              d.at("size_x").get<double>(), d.at("size_y").get<double>(),
                              d.at("label").get<std::string>(), d.at("score").get<double>()});
  }
  set.source_stamp = decode_stamp(j.at("source_stamp"));
  set.frame_id = j.value("frame_id", "");
  return set;
}

inline nlohmann::json encode(const ExecuteTaskRequest& request) {
  nlohmann::json j = {{"task_token", request.task_token},
                      {"text_input", request.text_input},
                      {"use_latest_image", request.use_latest_image},
                      {"image", nullptr}};
  if (request.image) j["image"] = encode(*request.image);
  return j;
}

inline ExecuteTaskRequest decode_request(const nlohmann::json& j) {
  ExecuteTaskRequest request;
  request.task_token = j.at("task_token").get<std::string>();
  request.text_input = j.value("text_input", "");
  request.use_latest_image = j.value("use_latest_image", false);
  if (j.contains("image") && !j["image"].is_null()) request.image = decode_image(j["image"]);
  return request;
}

inline nlohmann::json encode(const ExecuteTaskResponse& response) {
  nlohmann::json j = {{"success", response.success},
                      {"error_message", response.error_message},
                      {"results_json", response.results_json},
                      {"inference_time", response.inference_time},
                      {"detections", nullptr}};
  if (response.detections) j["detections"] = encode(*response.detections);
  return j;
}

inline ExecuteTaskResponse decode_response(const nlohmann::json& j) {
  ExecuteTaskResponse response;
  response.success = j.at("success").get<bool>();
  response.error_message = j.at("error_message").get<std::string>();
  response.results_json = j.at("results_json").get<std::string>();
  response.inference_time = j.at("inference_time").get<double>();
  if (!j.at("detections").is_null()) response.detections = decode_detection_set(j["detections"]);
  return response;
}

inline nlohmann::json encode(const ActionFeedback& feedback) {
  return {{"stage", to_string(feedback.stage)}, {"elapsed", feedback.elapsed}};
}

inline ActionFeedback decode_feedback(const nlohmann::json& j) {
  const auto name = j.at("stage").get<std::string>();
  for (int s = 0; s <= static_cast<int>(FeedbackStage::kPostprocessing); ++s) {
    if (to_string(static_cast<FeedbackStage>(s)) == name) {
      return {static_cast<FeedbackStage>(s), j.at("elapsed").get<double>()};
    }
  }
  throw Error(ErrorCode::kParseError, "unknown feedback stage " + name);
}

inline nlohmann::json encode(const ActionResult& result) {
  return {{"status", to_string(result.status)}, {"response", encode(result.response)}};
}

inline ActionResult decode_action_result(const nlohmann::json& j) {
  ActionResult result;
  const auto status = j.at("status").get<std::string>();
  if (status == "SUCCEEDED") {
    result.status = GoalStatus::kSucceeded;
  } else if (status == "CANCELED") {
    result.status = GoalStatus::kCanceled;
  } else {
    result.status = GoalStatus::kAborted;
  }
  result.response = decode_response(j.at("response"));
  return result;
}

inline std::string to_wire(const nlohmann::json& j) {
  auto bytes = nlohmann::json::to_cbor(j);
  return {bytes.begin(), bytes.end()};
}

inline nlohmann::json from_wire(const std::string& body) {
  try {
    return nlohmann::json::from_cbor(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
}

}  // namespace florence2_interfaces
