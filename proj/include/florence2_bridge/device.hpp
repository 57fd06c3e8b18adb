#pragma once

#include <charconv>
#include <filesystem>
#include <string>
#include <string_view>

#include <spdlog/spdlog.h>

#include "florence2_interfaces/error_code.hpp"

namespace florence2_bridge {

using florence2_interfaces::Error;
using florence2_interfaces::ErrorCode;

struct DevicePolicy {
  enum class Mode { kAuto, kCpu, kGpu };
  Mode mode = Mode::kAuto;
  int gpu_index = 0;

  static DevicePolicy automatic() { return {}; }
  static DevicePolicy cpu() { return {Mode::kCpu, 0}; }
  static DevicePolicy gpu(int index) { return {Mode::kGpu, index}; }

  /// Accepts "auto", "cpu", "gpu", "cuda", "gpu:N" and "cuda:N".
  static DevicePolicy parse(std::string_view text) {
    if (text == "auto" || text.empty()) return automatic();
    if (text == "cpu") return cpu();
    if (text == "gpu" || text == "cuda") return gpu(0);
    for (std::string_view prefix : {"gpu:", "cuda:"}) {
      if (text.substr(0, prefix.size()) == prefix) {
        auto digits = text.substr(prefix.size());
        int index = -1;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
        if (ec != std::errc() || ptr != digits.data() + digits.size() || index < 0) break;
        return gpu(index);
      }
    }
    throw Error(ErrorCode::kInvalidConfig, "unrecognised device policy '" + std::string(text) + "'");
  }

  std::string to_string() const {
    switch (mode) {
      case Mode::kAuto: return "auto";
      case Mode::kCpu: return "cpu";
      case Mode::kGpu: return "cuda:" + std::to_string(gpu_index);
    }
    return "auto";
  }

  friend bool operator==(const DevicePolicy&, const DevicePolicy&) = default;
};

struct Device {
  enum class Kind { kCpu, kGpu };
  Kind kind = Kind::kCpu;
  int index = 0;

  bool is_gpu() const { return kind == Kind::kGpu; }
  std::string to_string() const { return is_gpu() ? "cuda:" + std::to_string(index) : "cpu"; }

  friend bool operator==(const Device&, const Device&) = default;
};

enum class PrecisionPolicy { kAuto, kFull, kReduced };
enum class Precision { kFull, kReduced };

inline PrecisionPolicy parse_precision_policy(std::string_view text) {
  if (text == "auto" || text.empty()) return PrecisionPolicy::kAuto;
  if (text == "full" || text == "fp32") return PrecisionPolicy::kFull;
  if (text == "reduced" || text == "fp16") return PrecisionPolicy::kReduced;
  throw Error(ErrorCode::kInvalidConfig, "unrecognised precision policy '" + std::string(text) + "'");
}

inline std::string_view to_string(Precision precision) {
  return precision == Precision::kFull ? "FULL" : "REDUCED";
}

/// Reduced precision only pays off on CUDA devices.
inline Precision resolve_precision(PrecisionPolicy policy, const Device& device) {
  switch (policy) {
    case PrecisionPolicy::kFull: return Precision::kFull;
    case PrecisionPolicy::kReduced: return Precision::kReduced;
    case PrecisionPolicy::kAuto: break;
  }
  return device.is_gpu() ? Precision::kReduced : Precision::kFull;
}

class HardwareProbe {
 public:
  virtual ~HardwareProbe() = default;
  virtual int gpu_count() const = 0;
  virtual std::string describe(const Device& device) const { return device.to_string(); }
};

/// Counts NVIDIA devices exposed by the kernel driver.
class SystemProbe : public HardwareProbe {
 public:
  int gpu_count() const override {
    std::error_code ec;
    const std::filesystem::path gpus = "/proc/driver/nvidia/gpus";
    if (!std::filesystem::is_directory(gpus, ec)) return 0;
    int count = 0;
    for (const auto& entry : std::filesystem::directory_iterator(gpus, ec)) {
      (void)entry;
      ++count;
    }
    return count;
  }
};

class FixedProbe : public HardwareProbe {
 public:
  explicit FixedProbe(int gpus) : gpus_(gpus) {}
  int gpu_count() const override { return gpus_; }

 private:
  int gpus_;
};

inline Device select_device(const DevicePolicy& policy, const HardwareProbe& probe) {
  const int available = probe.gpu_count();
  Device device;
  switch (policy.mode) {
    case DevicePolicy::Mode::kAuto:
      device = available > 0 ? Device{Device::Kind::kGpu, 0} : Device{Device::Kind::kCpu, 0};
      break;
    case DevicePolicy::Mode::kCpu:
      device = Device{Device::Kind::kCpu, 0};
      break;
    case DevicePolicy::Mode::kGpu:
      if (policy.gpu_index < 0 || policy.gpu_index >= available) {
        throw Error(ErrorCode::kGpuUnavailable,
                    "requested cuda:" + std::to_string(policy.gpu_index) + " but " +
                        std::to_string(available) + " GPU(s) present");
      }
      device = Device{Device::Kind::kGpu, policy.gpu_index};
      break;
  }
  spdlog::info("device policy {} resolved to {} ({} GPU(s) detected)", policy.to_string(),
               device.to_string(), available);
  return device;
}

}  // namespace florence2_bridge
