#include <algorithm>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "florence2_bridge/smoke.hpp"

using namespace florence2_bridge;

int main(int argc, char** argv) {
  CLI::App app{"Deployment smoke test against the mock backend"};
  std::string profile = "native";
  smoke::Options options;
  options.node_binary = FLORENCE2_NODE_BINARY;
  std::string node_binary = options.node_binary.string();
  app.add_option("--profile", profile, "native, container_cpu or container_gpu")
      ->check(CLI::IsMember({"native", "container_cpu", "container_gpu"}));
  app.add_option("--node-binary", node_binary, "florence2_node executable (native profile)");
  app.add_option("--image-cpu", options.image_cpu, "CPU container image");
  app.add_option("--image-gpu", options.image_gpu, "GPU container image");
  app.add_option("--frames", options.continuous_frames, "Continuous frames to push");
  CLI11_PARSE(app, argc, argv);

  spdlog::set_default_logger(spdlog::stderr_color_mt("smoke"));
  spdlog::set_level(spdlog::level::warn);
  options.profile = smoke::parse_profile(profile);
  options.node_binary = node_binary;
  auto report = smoke::run_smoke(options);
  smoke::print(std::cout, report);
  const bool all_skipped = std::all_of(report.checks.begin(), report.checks.end(),
                                       [](const smoke::Check& c) { return c.status == smoke::Status::kSkip; });
  if (all_skipped) return 77;
  return report.passed() ? 0 : 1;
}
