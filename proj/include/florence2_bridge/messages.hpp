#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "florence2_interfaces/codec.hpp"
#include "florence2_interfaces/detection_set.hpp"
#include "florence2_interfaces/execute_task.hpp"
#include "florence2_interfaces/raster_image.hpp"

/// Field-for-field mirrors of the standard middleware messages the node
/// speaks: sensor_msgs/Image, std_msgs/String and vision_msgs/Detection2DArray.
namespace florence2_bridge::msg {

using florence2_interfaces::Stamp;

struct Header {
  Stamp stamp;
  std::string frame_id;
  bool operator==(const Header&) const = default;
};

struct Image {
  static constexpr const char* kTypeName = "sensor_msgs/msg/Image";
  Header header;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::string encoding;
  std::uint8_t is_bigendian = 0;
  std::uint32_t step = 0;
  std::vector<std::uint8_t> data;
  bool operator==(const Image&) const = default;
};

struct String {
  static constexpr const char* kTypeName = "std_msgs/msg/String";
  std::string data;
  bool operator==(const String&) const = default;
};

struct ObjectHypothesis {
  std::string class_id;
  double score = 0.0;
  bool operator==(const ObjectHypothesis&) const = default;
};

struct BoundingBox2D {
  double center_x = 0.0;
  double center_y = 0.0;
  double theta = 0.0;
  double size_x = 0.0;
  double size_y = 0.0;
  bool operator==(const BoundingBox2D&) const = default;
};

struct Detection2D {
  Header header;
  std::vector<ObjectHypothesis> results;
  BoundingBox2D bbox;
  std::string id;
  bool operator==(const Detection2D&) const = default;
};

struct Detection2DArray {
  static constexpr const char* kTypeName = "vision_msgs/msg/Detection2DArray";
  Header header;
  std::vector<Detection2D> detections;
  bool operator==(const Detection2DArray&) const = default;
};

struct ExecuteTaskService {
  static constexpr const char* kTypeName = "florence2_interfaces/srv/ExecuteTask";
  using Request = florence2_interfaces::ExecuteTaskRequest;
  using Response = florence2_interfaces::ExecuteTaskResponse;
};

struct ExecuteTaskAction {
  static constexpr const char* kTypeName = "florence2_interfaces/action/ExecuteTask";
  using Goal = florence2_interfaces::ExecuteTaskRequest;
  using Feedback = florence2_interfaces::ActionFeedback;
  using Result = florence2_interfaces::ActionResult;
};

inline Detection2DArray to_message(const florence2_interfaces::DetectionSet& set) {
  Detection2DArray out;
  out.header = {set.source_stamp, set.frame_id};
  for (const auto& d : set.detections) {
    Detection2D det;
    det.header = out.header;
    det.results.push_back({d.label, d.score});
    det.bbox.center_x = d.center_x;
    det.bbox.center_y = d.center_y;
    det.bbox.size_x = d.size_x;
    det.bbox.size_y = d.size_y;
    out.detections.push_back(std::move(det));
  }
  return out;
}

inline florence2_interfaces::DetectionSet from_message(const Detection2DArray& array) {
  florence2_interfaces::DetectionSet set;
  set.source_stamp = array.header.stamp;
  set.frame_id = array.header.frame_id;
  for (const auto& det : array.detections) {
    florence2_interfaces::Detection d;
    d.center_x = det.bbox.center_x;
    d.center_y = det.bbox.center_y;
    d.size_x = det.bbox.size_x;
    d.size_y = det.bbox.size_y;
    if (!det.results.empty()) {
      d.label = det.results.front().class_id;
      d.score = det.results.front().score;
    }
    set.detections.push_back(std::move(d));
  }
  return set;
}

// JSON mapping used on the wire (CBOR) by the gateway.

inline void to_json(nlohmann::json& j, const Header& h) {
  j = {{"stamp", florence2_interfaces::encode(h.stamp)}, {"frame_id", h.frame_id}};
}
inline void from_json(const nlohmann::json& j, Header& h) {
  h.stamp = florence2_interfaces::decode_stamp(j.at("stamp"));
  h.frame_id = j.at("frame_id").get<std::string>();
}

inline void to_json(nlohmann::json& j, const Image& m) {
  j = {{"header", m.header},     {"height", m.height},
       {"width", m.width},       {"encoding", m.encoding},
       {"is_bigendian", m.is_bigendian}, {"step", m.step},
       {"data", nlohmann::json::binary(m.data)}};
}
inline void from_json(const nlohmann::json& j, Image& m) {
  m.header = j.at("header").get<Header>();
  m.height = j.at("height").get<std::uint32_t>();
  m.width = j.at("width").get<std::uint32_t>();
  m.encoding = j.at("encoding").get<std::string>();
  m.is_bigendian = j.at("is_bigendian").get<std::uint8_t>();
  m.step = j.at("step").get<std::uint32_t>();
  const auto& data = j.at("data");
  if (data.is_binary()) {
    m.data.assign(data.get_binary().begin(), data.get_binary().end());
  } else {
    m.data = data.get<std::vector<std::uint8_t>>();
  }
}

inline void to_json(nlohmann::json& j, const String& m) { j = {{"data", m.data}}; }
inline void from_json(const nlohmann::json& j, String& m) { m.data = j.at("data").get<std::string>(); }

inline void to_json(nlohmann::json& j, const Detection2DArray& m) {
  j = {{"header", m.header}, {"detections", nlohmann::json::array()}};
  for (const auto& d : m.detections) {
    nlohmann::json results = nlohmann::json::array();
    for (const auto& r : d.results) results.push_back({{"class_id", r.class_id}, {"score", r.score}});
    j["detections"].push_back({{"header", d.header},
                               {"results", results},
                               {"bbox",
                                {{"center", {{"x", d.bbox.center_x}, {"y", d.bbox.center_y}, {"theta", d.bbox.theta}}},
                                 {"size_x", d.bbox.size_x},
                                 {"size_y", d.bbox.size_y}}},
                               {"id", d.id}});
  }
}
inline void from_json(const nlohmann::json& j, Detection2DArray& m) {
  m.header = j.at("header").get<Header>();
  m.detections.clear();
  for (const auto& d : j.at("detections")) {
    Detection2D det;
    det.header = d.at("header").get<Header>();
    for (const auto& r : d.at("results")) {
      det.results.push_back({r.at("class_id").get<std::string>(), r.at("score").get<double>()});
    }
    const auto& bbox = d.at("bbox");
    det.bbox.center_x = bbox.at("center").at("x").get<double>();
    det.bbox.center_y = bbox.at("center").at("y").get<double>();
    det.bbox.theta = bbox.at("center").at("theta").get<double>();
    det.bbox.size_x = bbox.at("size_x").get<double>();
    det.bbox.size_y = bbox.at("size_y").get<double>();
    det.id = d.at("id").get<std::string>();
    m.detections.push_back(std::move(det));
  }
}

}  // namespace florence2_bridge::msg
