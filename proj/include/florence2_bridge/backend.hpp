#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "florence2_bridge/device.hpp"
#include "florence2_interfaces/raster_image.hpp"
#include "florence2_interfaces/task_output.hpp"
#include "florence2_interfaces/task_spec.hpp"

namespace florence2_bridge {

using florence2_interfaces::RasterImage;
using florence2_interfaces::TaskOutput;
using florence2_interfaces::TaskSpec;

/// Decoding settings for the blocking generate call. Held fixed across devices
/// so throughput numbers stay comparable.
struct GenerationParams {
  int max_new_tokens = 1024;
  int num_beams = 3;
  bool sampling_enabled = false;

  void validate() const {
    if (max_new_tokens < 1) throw Error(ErrorCode::kInvalidConfig, "max_new_tokens must be >= 1");
    if (num_beams < 1) throw Error(ErrorCode::kInvalidConfig, "num_beams must be >= 1");
  }
};

inline constexpr std::string_view kMockModelId = "mock";

struct BackendConfig {
  std::string model_id = "microsoft/Florence-2-base";
  /// Recorded in every result document; an empty value means "whatever
  /// snapshot the local cache resolves to".
  std::string model_revision;
  DevicePolicy device_policy;
  PrecisionPolicy precision_policy = PrecisionPolicy::kAuto;
  GenerationParams generation;
  /// Overrides FLORENCE2_MODEL_CACHE / the Hugging Face hub cache.
  std::optional<std::filesystem::path> cache_root;
  /// Model download is opt-in; by default only the local cache is consulted.
  bool allow_network = false;
  /// Fixed latency injected by the mock backend.
  std::chrono::milliseconds mock_latency{0};

  void validate() const {
    if (model_id.empty()) throw Error(ErrorCode::kInvalidConfig, "model_id must not be empty");
    if (device_policy.mode == DevicePolicy::Mode::kGpu && device_policy.gpu_index < 0) {
      throw Error(ErrorCode::kInvalidConfig, "GPU index must be >= 0");
    }
    generation.validate();
  }
};

struct BackendResult {
  std::string raw_text;
  TaskOutput parsed_output;
  /// Seconds, > 0.
  double inference_time = 0.0;
};

namespace detail {

inline double clamp_coord(double v, double limit) { return std::clamp(v, 0.0, limit); }

inline void clamp_box(std::array<double, 4>& box, double width, double height) {
  if (box[0] > box[2]) std::swap(box[0], box[2]);
  if (box[1] > box[3]) std::swap(box[1], box[3]);
  box[0] = clamp_coord(box[0], width);
  box[2] = clamp_coord(box[2], width);
  box[1] = clamp_coord(box[1], height);
  box[3] = clamp_coord(box[3], height);
}

template <typename Points>
void clamp_points(Points& points, double width, double height) {
  for (std::size_t i = 0; i + 1 < points.size(); i += 2) {
    points[i] = clamp_coord(points[i], width);
    points[i + 1] = clamp_coord(points[i + 1], height);
  }
}

}  // namespace detail

/// Orders corners and clamps every coordinate into [0,width]x[0,height].
inline void clamp_to_image(TaskOutput& output, double width, double height) {
  struct Visitor {
    double w, h;
    void operator()(florence2_interfaces::TextOutput&) const {}
    void operator()(florence2_interfaces::BoxesLabelsOutput& o) const {
      for (auto& b : o.bboxes) detail::clamp_box(b, w, h);
    }
    void operator()(florence2_interfaces::QuadBoxesTextOutput& o) const {
      for (auto& q : o.quad_boxes) detail::clamp_points(q, w, h);
    }
    void operator()(florence2_interfaces::PolygonsLabelsOutput& o) const {
      for (auto& p : o.polygons) detail::clamp_points(p, w, h);
    }
    void operator()(florence2_interfaces::RegionTextPairsOutput& o) const {
      for (auto& b : o.bboxes) detail::clamp_box(b, w, h);
    }
  };
  std::visit(Visitor{width, height}, output);
}

/// A loaded model handle.
///
/// infer() is not reentrant: an overlapping call fails with INFERENCE_FAILURE
/// and bumps reentrancy_violations(). Results are checked against the task's
/// output kind and clamped into the image before they are returned.
class Backend {
 public:
  virtual ~Backend() = default;

  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  BackendResult infer(std::string_view prompt, const RasterImage& image, const TaskSpec& spec) {
    if (image.empty()) throw Error(ErrorCode::kInferenceFailure, "empty image");
    if (active_.fetch_add(1) != 0) {
      active_.fetch_sub(1);
      violations_.fetch_add(1);
      throw Error(ErrorCode::kInferenceFailure, "concurrent infer() on one backend handle");
    }
    struct Release {
      std::atomic<int>& counter;
      ~Release() { counter.fetch_sub(1); }
    } release{active_};

    BackendResult result = do_infer(prompt, image, spec);
    if (florence2_interfaces::kind_of(result.parsed_output) != spec.output_kind) {
      throw Error(ErrorCode::kInferenceFailure,
                  "backend produced " +
                      std::string(florence2_interfaces::to_string(
                          florence2_interfaces::kind_of(result.parsed_output))) +
                      " for " + spec.token);
    }
    if (auto problem = florence2_interfaces::consistency_error(result.parsed_output);
        !problem.empty()) {
      throw Error(ErrorCode::kInferenceFailure, problem);
    }
    clamp_to_image(result.parsed_output, image.width, image.height);
    if (!(result.inference_time > 0)) result.inference_time = 1e-9;
    return result;
  }

  /// Model identifier plus the revision that was actually loaded.
  virtual std::string model_label() const = 0;

  const Device& device() const { return device_; }
  Precision precision() const { return precision_; }
  std::size_t reentrancy_violations() const { return violations_.load(); }

 protected:
  Backend(Device device, Precision precision) : device_(device), precision_(precision) {}

  virtual BackendResult do_infer(std::string_view prompt, const RasterImage& image,
                                 const TaskSpec& spec) = 0;

 private:
  Device device_;
  Precision precision_;
  std::atomic<int> active_{0};
  std::atomic<std::size_t> violations_{0};
};

}  // namespace florence2_bridge
