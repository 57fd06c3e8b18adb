#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "florence2_interfaces/error_code.hpp"
#include "florence2_interfaces/raster_image.hpp"
#include "florence2_interfaces/task_output.hpp"

namespace florence2_interfaces {

inline constexpr std::string_view kSchemaVersion = "1.0";

/// Canonical, JSON-serializable result for any task.
struct ResultDocument {
  std::string task;
  std::string model;
  Stamp stamp;
  double inference_time_s = 0.0;
  TaskOutput output;

  friend bool operator==(const ResultDocument&, const ResultDocument&) = default;
};

/// Parse failure carrying the JSON pointer of the offending location.
class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& detail)
      : Error(ErrorCode::kParseError, "at '" + path + "': " + detail), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

namespace detail {

inline const std::vector<std::string>& required_document_fields() {
  static const std::vector<std::string> fields = {"inference_time_s", "model",  "output",
                                                  "schema_version",   "stamp", "task"};
  return fields;
}

inline std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ", ";
    out += item;
  }
  return out;
}

// Walks a (possibly truncated) document so a parse failure can be reported in
// terms of fields rather than byte offsets.
class TruncationTracker : public nlohmann::json_sax<nlohmann::json> {
 public:
  bool null() override { return value(); }
  bool boolean(bool) override { return value(); }
  bool number_integer(number_integer_t) override { return value(); }
  bool number_unsigned(number_unsigned_t) override { return value(); }
  bool number_float(number_float_t, const string_t&) override { return value(); }
  bool string(string_t&) override { return value(); }
  bool binary(binary_t&) override { return value(); }

  bool start_object(std::size_t) override {
    stack_.push_back({true, current_path(), {}, 0});
    return true;
  }
  bool key(string_t& name) override {
    stack_.back().key = name;
    return true;
  }
  bool end_object() override { return close(); }
  bool start_array(std::size_t) override {
    stack_.push_back({false, current_path(), {}, 0});
    return true;
  }
  bool end_array() override { return close(); }

  bool parse_error(std::size_t position, const std::string&,
                   const nlohmann::detail::exception& ex) override {
    position_ = position;
    message_ = ex.what();
    return false;
  }

  SchemaError diagnose(std::size_t input_size) const {
    if (stack_.empty()) {
      return SchemaError("/", "document is not a JSON object (" + message_ + ")");
    }
    std::vector<std::string> missing;
    for (const auto& field : required_document_fields()) {
      if (!completed_.count(field)) missing.push_back(field);
    }
    const bool truncated = position_ >= input_size;
    std::string detail = truncated ? "truncated input" : "malformed input at byte " +
                                                             std::to_string(position_);
    const std::string where = stack_.back().path.empty() ? "/" : stack_.back().path;
    if (!missing.empty()) {
      detail += "; missing field(s): " + join(missing);
      return SchemaError("/" + missing.front(), detail);
    }
    detail += "; " + std::string(stack_.back().is_object ? "object" : "array") +
              " not terminated";
    return SchemaError(where, detail);
  }

 private:
  struct Frame {
    bool is_object;
    std::string path;
    std::string key;
    std::size_t index;
  };

  std::string current_path() const {
    if (stack_.empty()) return "";
    const auto& top = stack_.back();
    return top.path + "/" + (top.is_object ? top.key : std::to_string(top.index));
  }

  bool value() {
    if (stack_.size() == 1 && stack_.back().is_object) completed_.insert(stack_.back().key);
    if (!stack_.empty() && !stack_.back().is_object) ++stack_.back().index;
    return true;
  }

  bool close() {
    stack_.pop_back();
    return value();
  }

  std::vector<Frame> stack_;
  std::set<std::string> completed_;
  std::size_t position_ = 0;
  std::string message_;
};

inline const nlohmann::json& require(const nlohmann::json& object, const std::string& path,
                                     const char* field) {
  auto it = object.find(field);
  if (it == object.end()) throw SchemaError(path + "/" + field, "missing required field");
  return *it;
}

inline double as_number(const nlohmann::json& value, const std::string& path) {
  if (!value.is_number()) throw SchemaError(path, "expected a number");
  double number = value.get<double>();
  if (!std::isfinite(number)) throw SchemaError(path, "expected a finite number");
  return number;
}

inline std::vector<std::string> as_strings(const nlohmann::json& value, const std::string& path) {
  if (!value.is_array()) throw SchemaError(path, "expected an array of strings");
  std::vector<std::string> out;
  out.reserve(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!value[i].is_string()) throw SchemaError(path + "/" + std::to_string(i), "expected a string");
    out.push_back(value[i].get<std::string>());
  }
  return out;
}

template <std::size_t N>
std::vector<std::array<double, N>> as_fixed_rows(const nlohmann::json& value,
                                                 const std::string& path) {
  if (!value.is_array()) throw SchemaError(path, "expected an array");
  std::vector<std::array<double, N>> out;
  out.reserve(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    const std::string row_path = path + "/" + std::to_string(i);
    const auto& row = value[i];
    if (!row.is_array() || row.size() != N) {
      throw SchemaError(row_path, "expected an array of " + std::to_string(N) + " numbers");
    }
    std::array<double, N> parsed{};
    for (std::size_t j = 0; j < N; ++j) parsed[j] = as_number(row[j], row_path + "/" + std::to_string(j));
    out.push_back(parsed);
  }
  return out;
}

inline std::vector<Polygon> as_polygons(const nlohmann::json& value, const std::string& path) {
  if (!value.is_array()) throw SchemaError(path, "expected an array");
  std::vector<Polygon> out;
  for (std::size_t i = 0; i < value.size(); ++i) {
    const std::string row_path = path + "/" + std::to_string(i);
    const auto& row = value[i];
    if (!row.is_array()) throw SchemaError(row_path, "expected an array of numbers");
    Polygon polygon;
    for (std::size_t j = 0; j < row.size(); ++j) {
      polygon.push_back(as_number(row[j], row_path + "/" + std::to_string(j)));
    }
    out.push_back(std::move(polygon));
  }
  return out;
}

}  // namespace detail

inline nlohmann::json output_to_json(const TaskOutput& output) {
  struct Visitor {
    nlohmann::json operator()(const TextOutput& o) const { return {{"text", o.text}}; }
    nlohmann::json operator()(const BoxesLabelsOutput& o) const {
      return {{"bboxes", o.bboxes}, {"labels", o.labels}};
    }
    nlohmann::json operator()(const QuadBoxesTextOutput& o) const {
      return {{"quad_boxes", o.quad_boxes}, {"labels", o.labels}};
    }
    nlohmann::json operator()(const PolygonsLabelsOutput& o) const {
      nlohmann::json polygons = nlohmann::json::array();
      for (const auto& p : o.polygons) polygons.push_back(p);
      return {{"polygons", polygons}, {"labels", o.labels}};
    }
    nlohmann::json operator()(const RegionTextPairsOutput& o) const {
      return {{"bboxes", o.bboxes}, {"texts", o.texts}};
    }
  };
  return std::visit(Visitor{}, output);
}

/// The output kind is identified by the subtree's exact key set.
inline TaskOutput output_from_json(const nlohmann::json& value, const std::string& path = "/output") {
  using detail::as_fixed_rows;
  using detail::as_strings;
  if (!value.is_object()) throw SchemaError(path, "expected an object");
  std::set<std::string> keys;
  for (const auto& item : value.items()) keys.insert(item.key());

  TaskOutput out;
  if (keys == std::set<std::string>{"text"}) {
    if (!value["text"].is_string()) throw SchemaError(path + "/text", "expected a string");
    out = TextOutput{value["text"].get<std::string>()};
  } else if (keys == std::set<std::string>{"bboxes", "labels"}) {
    out = BoxesLabelsOutput{as_fixed_rows<4>(value["bboxes"], path + "/bboxes"),
                            as_strings(value["labels"], path + "/labels")};
  } else if (keys == std::set<std::string>{"quad_boxes", "labels"}) {
    out = QuadBoxesTextOutput{as_fixed_rows<8>(value["quad_boxes"], path + "/quad_boxes"),
                              as_strings(value["labels"], path + "/labels")};
  } else if (keys == std::set<std::string>{"polygons", "labels"}) {
    out = PolygonsLabelsOutput{detail::as_polygons(value["polygons"], path + "/polygons"),
                               as_strings(value["labels"], path + "/labels")};
  } else if (keys == std::set<std::string>{"bboxes", "texts"}) {
    out = RegionTextPairsOutput{as_fixed_rows<4>(value["bboxes"], path + "/bboxes"),
                                as_strings(value["texts"], path + "/texts")};
  } else {
    throw SchemaError(path, "key set {" + detail::join({keys.begin(), keys.end()}) +
                                "} matches no output kind");
  }
  if (auto problem = consistency_error(out); !problem.empty()) throw SchemaError(path, problem);
  return out;
}

inline nlohmann::json to_json(const ResultDocument& doc) {
  return {{"schema_version", kSchemaVersion},
          {"task", doc.task},
          {"model", doc.model},
          {"stamp", {{"sec", doc.stamp.sec}, {"nanosec", doc.stamp.nanosec}}},
          {"inference_time_s", doc.inference_time_s},
          {"output", output_to_json(doc.output)}};
}

inline ResultDocument from_json(const nlohmann::json& root) {
  using detail::require;
  if (!root.is_object()) throw SchemaError("/", "expected an object");
  for (const auto& item : root.items()) {
    const auto& fields = detail::required_document_fields();
    if (std::find(fields.begin(), fields.end(), item.key()) == fields.end()) {
      throw SchemaError("/" + item.key(), "unexpected field");
    }
  }
  const auto& version = require(root, "", "schema_version");
  if (!version.is_string() || version.get<std::string>().rfind("1.", 0) != 0) {
    throw SchemaError("/schema_version", "unsupported schema version");
  }

  ResultDocument doc;
  const auto& task = require(root, "", "task");
  if (!task.is_string() || task.get<std::string>().empty()) {
    throw SchemaError("/task", "expected a non-empty string");
  }
  doc.task = task.get<std::string>();
  const auto& model = require(root, "", "model");
  if (!model.is_string()) throw SchemaError("/model", "expected a string");
  doc.model = model.get<std::string>();

  const auto& stamp = require(root, "", "stamp");
  if (!stamp.is_object()) throw SchemaError("/stamp", "expected an object");
  const auto& sec = require(stamp, "/stamp", "sec");
  const auto& nanosec = require(stamp, "/stamp", "nanosec");
  if (!sec.is_number_integer()) throw SchemaError("/stamp/sec", "expected an integer");
  if (!nanosec.is_number_unsigned() || nanosec.get<std::uint64_t>() >= 1'000'000'000ULL) {
    throw SchemaError("/stamp/nanosec", "expected an integer in [0, 1e9)");
  }
  doc.stamp = {sec.get<std::int64_t>(), nanosec.get<std::uint32_t>()};

  doc.inference_time_s = detail::as_number(require(root, "", "inference_time_s"), "/inference_time_s");
  if (doc.inference_time_s < 0) throw SchemaError("/inference_time_s", "must be >= 0");

  doc.output = output_from_json(require(root, "", "output"));
  return doc;
}

/// Compact JSON with lexicographically ordered keys; byte-stable for a given document.
inline std::string serialize_result(const ResultDocument& doc) { return to_json(doc).dump(); }

inline ResultDocument parse_result(std::string_view text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    detail::TruncationTracker tracker;
    nlohmann::json::sax_parse(text, &tracker);
    throw tracker.diagnose(text.size());
  }
  return from_json(root);
}

/// Check a parsed document against the kind its task is registered with.
inline void require_kind(const ResultDocument& doc, OutputKind expected) {
  if (kind_of(doc.output) != expected) {
    throw SchemaError("/output", "task " + doc.task + " expects " + std::string(to_string(expected)) +
                                     " but document carries " +
                                     std::string(to_string(kind_of(doc.output))));
  }
}

}  // namespace florence2_interfaces
