#pragma once

#include <memory>

#include "florence2_bridge/backend.hpp"
#include "florence2_bridge/mock_backend.hpp"
#include "florence2_bridge/worker_backend.hpp"

namespace florence2_bridge {

/// Resolves device and precision, then builds the backend named by model_id.
/// "mock" selects MockBackend; anything else loads the real model.
inline std::unique_ptr<Backend> load_backend(const BackendConfig& config,
                                             const HardwareProbe& probe = SystemProbe{}) {
  config.validate();
  const Device device = select_device(config.device_policy, probe);
  const Precision precision = resolve_precision(config.precision_policy, device);
  if (config.model_id == kMockModelId) {
    return std::make_unique<MockBackend>(config.mock_latency, device, precision);
  }
  return std::make_unique<WorkerBackend>(config, device, precision);
}

}  // namespace florence2_bridge
