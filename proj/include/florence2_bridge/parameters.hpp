#pragma once

#include <charconv>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "florence2_bridge/backend.hpp"
#include "florence2_bridge/engine.hpp"

namespace florence2_bridge {

/// Declared node parameters. Names match the params file and `-p key:=value`
/// overrides.
struct NodeParameters {
  std::string node_name = "florence2_node";
  std::string image_topic = "/camera/image_raw";
  std::string model = "microsoft/Florence-2-base";
  std::string model_revision;
  std::string model_cache;
  bool allow_network = false;
  std::string continuous_task;
  std::string continuous_text;
  std::string continuous_drop_policy = "LATEST_WINS";
  std::string device = "auto";
  std::string precision = "auto";
  bool publish_annotated = true;
  int max_new_tokens = 1024;
  int num_beams = 3;
  bool do_sample = false;
  int queue_depth = 8;
  int annotation_line_width = 2;
  double annotation_font_scale = 0.5;
  int mock_latency_ms = 0;
  std::string tasks_file;

  using Field = std::variant<std::string NodeParameters::*, bool NodeParameters::*, int NodeParameters::*,
                             double NodeParameters::*>;

  static const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table = {
        {"node_name", &NodeParameters::node_name},
        {"image_topic", &NodeParameters::image_topic},
        {"model", &NodeParameters::model},
        {"model_revision", &NodeParameters::model_revision},
        {"model_cache", &NodeParameters::model_cache},
        {"allow_network", &NodeParameters::allow_network},
        {"continuous_task", &NodeParameters::continuous_task},
        {"continuous_text", &NodeParameters::continuous_text},
        {"continuous_drop_policy", &NodeParameters::continuous_drop_policy},
        {"device", &NodeParameters::device},
        {"precision", &NodeParameters::precision},
        {"publish_annotated", &NodeParameters::publish_annotated},
        {"max_new_tokens", &NodeParameters::max_new_tokens},
        {"num_beams", &NodeParameters::num_beams},
        {"do_sample", &NodeParameters::do_sample},
        {"queue_depth", &NodeParameters::queue_depth},
        {"annotation_line_width", &NodeParameters::annotation_line_width},
        {"annotation_font_scale", &NodeParameters::annotation_font_scale},
        {"mock_latency_ms", &NodeParameters::mock_latency_ms},
        {"tasks_file", &NodeParameters::tasks_file},
    };
    return table;
  }

  /// Sets one parameter from its textual form; type errors and unknown names
  /// throw INVALID_CONFIG.
  void set(const std::string& key, const std::string& value) {
    for (const auto& [name, field] : fields()) {
      if (name != key) continue;
      std::visit([&](auto member) { assign(this->*member, key, value); }, field);
      return;
    }
    throw Error(ErrorCode::kInvalidConfig, "unknown parameter '" + key + "'");
  }

  /// "key:=value" as accepted on the command line.
  void apply_override(const std::string& assignment) {
    const auto pos = assignment.find(":=");
    if (pos == std::string::npos || pos == 0) {
      throw Error(ErrorCode::kInvalidConfig, "expected key:=value, got '" + assignment + "'");
    }
    set(assignment.substr(0, pos), assignment.substr(pos + 2));
  }

  /// Accepts either a flat mapping or the `<node>: ros__parameters: {...}`
  /// nesting used by launch parameter files.
  void load_yaml(const YAML::Node& root) {
    YAML::Node params = root;
    if (root.IsMap() && root[node_name] && root[node_name]["ros__parameters"]) {
      params = root[node_name]["ros__parameters"];
    } else if (root.IsMap() && root["/**"] && root["/**"]["ros__parameters"]) {
      params = root["/**"]["ros__parameters"];
    }
    if (!params.IsMap()) throw Error(ErrorCode::kInvalidConfig, "parameter file must be a mapping");
    for (const auto& entry : params) {
      const auto key = entry.first.as<std::string>();
      if (!entry.second.IsScalar() && !entry.second.IsNull()) {
        throw Error(ErrorCode::kInvalidConfig, "parameter '" + key + "' must be a scalar");
      }
      set(key, entry.second.IsNull() ? "" : entry.second.as<std::string>());
    }
  }

  void load_file(const std::filesystem::path& path) {
    try {
      load_yaml(YAML::LoadFile(path.string()));
    } catch (const YAML::Exception& e) {
      throw Error(ErrorCode::kInvalidConfig, path.string() + ": " + e.what());
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, field] : fields()) {
      std::visit([&, key = name](auto member) { j[key] = this->*member; }, field);
    }
    return j;
  }

  BackendConfig backend_config() const {
    BackendConfig c;
    c.model_id = model;
    c.model_revision = model_revision;
    c.device_policy = DevicePolicy::parse(device);
    c.precision_policy = parse_precision_policy(precision);
    c.generation = {max_new_tokens, num_beams, do_sample};
    if (!model_cache.empty()) c.cache_root = model_cache;
    c.allow_network = allow_network;
    c.mock_latency = std::chrono::milliseconds(mock_latency_ms);
    return c;
  }

  EngineConfig engine_config() const {
    EngineConfig c;
    if (!continuous_task.empty()) c.continuous_task = continuous_task;
    c.continuous_text = continuous_text;
    c.publish_annotated = publish_annotated;
    c.queue_depth = static_cast<std::size_t>(queue_depth);
    c.annotation.line_width = annotation_line_width;
    c.annotation.font_scale = annotation_font_scale;
    return c;
  }

  void validate() const {
    if (node_name.empty()) throw Error(ErrorCode::kInvalidConfig, "node_name must not be empty");
    if (image_topic.empty()) throw Error(ErrorCode::kInvalidConfig, "image_topic must not be empty");
    if (continuous_drop_policy != "LATEST_WINS") {
      throw Error(ErrorCode::kInvalidConfig, "continuous_drop_policy must be LATEST_WINS");
    }
    if (queue_depth < 1) throw Error(ErrorCode::kInvalidConfig, "queue_depth must be >= 1");
    if (annotation_line_width < 1) throw Error(ErrorCode::kInvalidConfig, "annotation_line_width must be >= 1");
    if (!(annotation_font_scale > 0)) throw Error(ErrorCode::kInvalidConfig, "annotation_font_scale must be > 0");
    if (mock_latency_ms < 0) throw Error(ErrorCode::kInvalidConfig, "mock_latency_ms must be >= 0");
    backend_config().validate();
  }

 private:
  static void assign(std::string& out, const std::string&, const std::string& value) { out = value; }

  static void assign(bool& out, const std::string& key, const std::string& value) {
    if (value == "true" || value == "True" || value == "1") {
      out = true;
    } else if (value == "false" || value == "False" || value == "0") {
      out = false;
    } else {
      throw Error(ErrorCode::kInvalidConfig, "parameter '" + key + "' expects a bool, got '" + value + "'");
    }
  }

  static void assign(int& out, const std::string& key, const std::string& value) {
    int parsed = 0;
    auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
    if (ec != std::errc() || end != value.data() + value.size()) {
      throw Error(ErrorCode::kInvalidConfig, "parameter '" + key + "' expects an integer, got '" + value + "'");
    }
    out = parsed;
  }

  static void assign(double& out, const std::string& key, const std::string& value) {
    try {
      std::size_t used = 0;
      out = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidConfig, "parameter '" + key + "' expects a number, got '" + value + "'");
    }
  }
};

}  // namespace florence2_bridge
