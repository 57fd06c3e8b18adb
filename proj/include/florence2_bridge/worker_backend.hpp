#pragma once

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "florence2_bridge/backend.hpp"
#include "florence2_bridge/subprocess.hpp"

#ifndef FLORENCE2_WORKER_SCRIPT
#define FLORENCE2_WORKER_SCRIPT "florence2_worker.py"
#endif

namespace florence2_bridge {

struct ResolvedModel {
  std::filesystem::path path;
  std::string revision;
};

/// FLORENCE2_MODEL_CACHE, else the Hugging Face hub cache.
inline std::filesystem::path default_cache_root() {
  if (const char* root = std::getenv("FLORENCE2_MODEL_CACHE"); root && *root) return root;
  if (const char* hub = std::getenv("HF_HUB_CACHE"); hub && *hub) return hub;
  if (const char* home = std::getenv("HF_HOME"); home && *home) {
    return std::filesystem::path(home) / "hub";
  }
  const char* user_home = std::getenv("HOME");
  return std::filesystem::path(user_home ? user_home : "/") / ".cache" / "huggingface" / "hub";
}

/// Looks for model files locally: an explicit directory, `<root>/<org>/<name>`,
/// or the hub layout `<root>/models--<org>--<name>/snapshots/<revision>`.
inline std::optional<ResolvedModel> resolve_model(const std::string& model_id,
                                                  const std::string& revision,
                                                  const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::error_code ec;
  auto has_config = [&](const fs::path& dir) { return fs::is_regular_file(dir / "config.json", ec); };

  if (fs::path direct(model_id); direct.is_absolute() && has_config(direct)) {
    return ResolvedModel{direct, revision.empty() ? "local" : revision};
  }
  if (has_config(root / model_id)) return ResolvedModel{root / model_id, revision.empty() ? "local" : revision};

  std::string hub_name = "models--" + model_id;
  for (auto pos = hub_name.find('/'); pos != std::string::npos; pos = hub_name.find('/')) {
    hub_name.replace(pos, 1, "--");
  }
  const fs::path snapshots = root / hub_name / "snapshots";
  if (!revision.empty()) {
    if (has_config(snapshots / revision)) return ResolvedModel{snapshots / revision, revision};
    return std::nullopt;
  }
  if (!fs::is_directory(snapshots, ec)) return std::nullopt;
  std::optional<ResolvedModel> newest;
  fs::file_time_type newest_time{};
  for (const auto& entry : fs::directory_iterator(snapshots, ec)) {
    if (!has_config(entry.path())) continue;
    auto t = entry.last_write_time(ec);
    if (!newest || t > newest_time) {
      newest = ResolvedModel{entry.path(), entry.path().filename().string()};
      newest_time = t;
    }
  }
  return newest;
}

/// Converts the upstream post-processor's dictionary (keyed by task token) into
/// the bridge's typed output for the task's kind.
inline TaskOutput from_upstream(const TaskSpec& spec, const nlohmann::json& parsed) {
  using namespace florence2_interfaces;
  const nlohmann::json& body = parsed.contains(spec.token) ? parsed.at(spec.token) : parsed;
  auto strings = [](const nlohmann::json& j, const char* key) {
    std::vector<std::string> out;
    if (j.contains(key)) {
      for (const auto& s : j.at(key)) out.push_back(s.get<std::string>());
    }
    return out;
  };
  auto boxes = [](const nlohmann::json& j, const char* key) {
    std::vector<CornerBox> out;
    if (j.contains(key)) {
      for (const auto& b : j.at(key)) out.push_back(b.get<CornerBox>());
    }
    return out;
  };
  try {
    switch (spec.output_kind) {
      case OutputKind::kText:
        if (body.is_string()) return TextOutput{body.get<std::string>()};
        return TextOutput{body.at("text").get<std::string>()};
      case OutputKind::kBoxesLabels: {
        BoxesLabelsOutput out{boxes(body, "bboxes"), strings(body, "labels")};
        // Open-vocabulary detection names its labels "bboxes_labels".
        if (out.labels.empty() && body.contains("bboxes_labels")) out.labels = strings(body, "bboxes_labels");
        // Region proposals come without labels.
        if (out.labels.empty()) out.labels.assign(out.bboxes.size(), "");
        return out;
      }
      case OutputKind::kQuadBoxesText: {
        QuadBoxesTextOutput out;
        for (const auto& q : body.at("quad_boxes")) out.quad_boxes.push_back(q.get<QuadBox>());
        out.labels = strings(body, "labels");
        return out;
      }
      case OutputKind::kPolygonsLabels: {
        // Upstream nests polygons per instance; each polygon becomes its own
        // entry carrying the instance label.
        PolygonsLabelsOutput out;
        auto labels = strings(body, "labels");
        const auto& instances = body.at("polygons");
        for (std::size_t i = 0; i < instances.size(); ++i) {
          const std::string label = i < labels.size() ? labels[i] : "";
          for (const auto& polygon : instances[i]) {
            Polygon flat = polygon.get<Polygon>();
            if (flat.size() >= 6 && flat.size() % 2 == 0) {
              out.polygons.push_back(std::move(flat));
              out.labels.push_back(label);
            }
          }
        }
        return out;
      }
      case OutputKind::kRegionTextPairs: {
        RegionTextPairsOutput out{boxes(body, "bboxes"), strings(body, "labels")};
        if (out.texts.empty()) out.texts = strings(body, "texts");
        return out;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInferenceFailure, std::string("unexpected upstream output: ") + e.what());
  }
  throw Error(ErrorCode::kInferenceFailure, "unknown output kind");
}

inline ErrorCode worker_error_code(const std::string& name) {
  if (name == "MODEL_NOT_FOUND") return ErrorCode::kModelNotFound;
  if (name == "OUT_OF_MEMORY") return ErrorCode::kOutOfMemory;
  if (name == "GPU_UNAVAILABLE") return ErrorCode::kGpuUnavailable;
  return ErrorCode::kInferenceFailure;
}

/// Runs the upstream Florence-2 runtime (transformers + torch) in a Python
/// worker process, talking JSON lines over its stdin/stdout. Image bytes follow
/// the request line raw.
class WorkerBackend : public Backend {
 public:
  struct Options {
    std::string python = "python3";
    std::filesystem::path script = FLORENCE2_WORKER_SCRIPT;
    std::chrono::seconds load_timeout{600};
    std::chrono::seconds infer_timeout{600};
  };

  static Options default_options() {
    Options options;
    if (const char* py = std::getenv("FLORENCE2_PYTHON"); py && *py) options.python = py;
    if (const char* script = std::getenv("FLORENCE2_WORKER_SCRIPT"); script && *script) {
      options.script = script;
    }
    return options;
  }

  WorkerBackend(const BackendConfig& config, Device device, Precision precision,
                Options options = default_options())
      : Backend(device, precision), config_(config), options_(std::move(options)) {
    std::signal(SIGPIPE, SIG_IGN);
    const auto root = config.cache_root.value_or(default_cache_root());
    auto resolved = resolve_model(config.model_id, config.model_revision, root);
    nlohmann::json request = {{"op", "load"},
                              {"model_id", config.model_id},
                              {"revision", config.model_revision},
                              {"device", device.to_string()},
                              {"dtype", precision == Precision::kReduced ? "float16" : "float32"},
                              {"allow_network", config.allow_network}};
    if (resolved) {
      request["model_path"] = resolved->path.string();
      label_ = config.model_id + "@" + resolved->revision;
    } else if (!config.allow_network) {
      throw Error(ErrorCode::kModelNotFound,
                  config.model_id + " not found under " + root.string() +
                      " (set FLORENCE2_MODEL_CACHE or enable allow_network)");
    } else {
      label_ = config.model_id + "@" + (config.model_revision.empty() ? "main" : config.model_revision);
    }

    std::error_code ec;
    if (!std::filesystem::is_regular_file(options_.script, ec)) {
      throw Error(ErrorCode::kInferenceFailure, "worker script missing: " + options_.script.string());
    }
    worker_.emplace(Subprocess::spawn({options_.python, options_.script.string()}));
    auto reply = exchange(request, {}, options_.load_timeout);
    if (reply.contains("model")) label_ = reply["model"].get<std::string>();
    spdlog::info("loaded {} on {} ({})", label_, device.to_string(), to_string(precision));
  }

  std::string model_label() const override { return label_; }

 protected:
  BackendResult do_infer(std::string_view prompt, const RasterImage& image, const TaskSpec& spec) override {
    nlohmann::json request = {{"op", "infer"},
                              {"prompt", prompt},
                              {"task", spec.token},
                              {"width", image.width},
                              {"height", image.height},
                              {"channels", florence2_interfaces::channels(image.format)},
                              {"nbytes", image.data.size()},
                              {"max_new_tokens", config_.generation.max_new_tokens},
                              {"num_beams", config_.generation.num_beams},
                              {"do_sample", config_.generation.sampling_enabled}};
    const auto start = std::chrono::steady_clock::now();
    auto reply = exchange(request,
                          std::string_view(reinterpret_cast<const char*>(image.data.data()), image.data.size()),
                          options_.infer_timeout);
    BackendResult result;
    result.inference_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.raw_text = reply.value("raw_text", "");
    result.parsed_output = from_upstream(spec, reply.at("parsed"));
    return result;
  }

 private:
  nlohmann::json exchange(const nlohmann::json& request, std::string_view payload,
                          std::chrono::seconds timeout) {
    try {
      worker_->write_all(request.dump() + "\n");
      if (!payload.empty()) worker_->write_all(payload);
      auto line = worker_->read_line(timeout);
      if (!line) throw Error(ErrorCode::kInferenceFailure, "worker timed out");
      auto reply = nlohmann::json::parse(*line);
      if (!reply.value("ok", false)) {
        throw Error(worker_error_code(reply.value("error", "")), reply.value("detail", ""));
      }
      return reply;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInferenceFailure, std::string("worker protocol: ") + e.what());
    } catch (const std::system_error& e) {
      throw Error(ErrorCode::kInferenceFailure, std::string("worker pipe: ") + e.what());
    }
  }

  BackendConfig config_;
  Options options_;
  std::optional<Subprocess> worker_;
  std::string label_;
};

}  // namespace florence2_bridge
