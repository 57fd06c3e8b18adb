#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "florence2_bridge/default_tasks.inc"
#include "florence2_interfaces/error_code.hpp"
#include "florence2_interfaces/task_spec.hpp"

namespace florence2_bridge {

using florence2_interfaces::Error;
using florence2_interfaces::ErrorCode;
using florence2_interfaces::OutputKind;
using florence2_interfaces::TaskSpec;

/// Immutable set of prompt-token tasks, loaded from a declarative task file.
class TaskRegistry {
 public:
  TaskRegistry() = default;

  explicit TaskRegistry(const std::vector<TaskSpec>& specs) {
    static const std::regex token_shape("<[A-Z0-9_]+>");
    for (const auto& spec : specs) {
      if (!std::regex_match(spec.token, token_shape)) {
        throw Error(ErrorCode::kInvalidConfig, "malformed task token '" + spec.token + "'");
      }
      if (!tasks_.emplace(spec.token, spec).second) {
        throw Error(ErrorCode::kInvalidConfig, "duplicate task token " + spec.token);
      }
    }
  }

  static TaskRegistry from_json(std::string_view text) {
    nlohmann::json root;
    try {
      root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kInvalidConfig, std::string("task file: ") + e.what());
    }
    if (!root.is_array()) throw Error(ErrorCode::kInvalidConfig, "task file must hold an array");
    std::vector<TaskSpec> specs;
    for (std::size_t i = 0; i < root.size(); ++i) {
      const auto& record = root[i];
      const std::string where = "task file record " + std::to_string(i);
      try {
        TaskSpec spec;
        spec.token = record.at("token").get<std::string>();
        spec.requires_text_input = record.at("requires_text_input").get<bool>();
        auto kind = florence2_interfaces::output_kind_from_string(
            record.at("output_kind").get<std::string>());
        if (!kind) throw Error(ErrorCode::kInvalidConfig, where + ": unknown output_kind");
        spec.output_kind = *kind;
        spec.description = record.value("description", "");
        specs.push_back(std::move(spec));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kInvalidConfig, where + ": " + e.what());
      }
    }
    return TaskRegistry(specs);
  }

  static TaskRegistry from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kInvalidConfig, "cannot open task file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json(buffer.str());
  }

  /// The standard token set shipped in data/tasks.json.
  static const TaskRegistry& builtin() {
    static const TaskRegistry registry = from_json(kDefaultTasksJson);
    return registry;
  }

  std::optional<TaskSpec> lookup(std::string_view token) const noexcept {
    auto it = tasks_.find(token);
    if (it == tasks_.end()) return std::nullopt;
    return it->second;
  }

  /// Lexicographic by token.
  std::vector<TaskSpec> list_tasks() const {
    std::vector<TaskSpec> out;
    out.reserve(tasks_.size());
    for (const auto& [token, spec] : tasks_) out.push_back(spec);
    return out;
  }

  std::size_t size() const { return tasks_.size(); }

  nlohmann::json to_json() const {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [token, spec] : tasks_) {
      out.push_back({{"token", spec.token},
                     {"requires_text_input", spec.requires_text_input},
                     {"output_kind", florence2_interfaces::to_string(spec.output_kind)},
                     {"description", spec.description}});
    }
    return out;
  }

 private:
  std::map<std::string, TaskSpec, std::less<>> tasks_;
};

struct Prompt {
  std::string text;
  std::optional<std::string> warning;
};

/// Text-conditioned tasks append the text directly after the token, as the
/// upstream processor does; other tasks send the bare token.
inline Prompt build_prompt(const TaskSpec& spec, std::string_view text_input) {
  if (spec.requires_text_input) {
    if (text_input.empty()) {
      throw Error(ErrorCode::kMissingTextInput, spec.token + " needs text_input");
    }
    return {spec.token + std::string(text_input), std::nullopt};
  }
  if (!text_input.empty()) {
    return {spec.token, "text_input discarded: " + spec.token + " takes no text"};
  }
  return {spec.token, std::nullopt};
}

}  // namespace florence2_bridge
