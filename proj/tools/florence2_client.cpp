#include <chrono>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "florence2_bridge/client.hpp"

using namespace florence2_bridge;

int main(int argc, char** argv) {
  CLI::App app{"Example client for the Florence-2 node (service and action modes)"};
  ClientInvocation inv;
  std::string mode = "service", url = "http://127.0.0.1:8765";
  std::string image;
  double cancel_after = -1;
  double wait_for_node = 0;
  app.add_option("mode", mode, "service or action")->check(CLI::IsMember({"service", "action"}));
  app.add_option("--task", inv.task_token, "Task token, e.g. \"<OD>\"")->required();
  app.add_option("--text", inv.text_input, "Text input for grounding tasks");
  auto* image_opt = app.add_option("--image", image, "Image file to send");
  app.add_flag("--use-latest", inv.use_latest_image, "Use the node's latest subscribed frame")->excludes(image_opt);
  app.add_option("--timeout", inv.timeout, "Seconds to wait for the result")->check(CLI::PositiveNumber);
  app.add_option("--cancel-after", cancel_after, "Action mode: cancel the goal after this many seconds");
  app.add_option("--node", inv.node, "Node name");
  app.add_option("--url", url, "Node gateway URL");
  app.add_option("--wait-for-node", wait_for_node, "Seconds to wait for the gateway to come up");
  app.add_flag("-v,--verbose", inv.verbose, "Print timings");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code::kUsage;
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt("florence2_client"));
  spdlog::set_level(inv.verbose ? spdlog::level::info : spdlog::level::warn);
  inv.mode = mode == "action" ? ClientMode::kAction : ClientMode::kService;
  if (!image.empty()) inv.image_path = image;
  if (cancel_after >= 0) inv.cancel_after = cancel_after;
  if (!inv.image_path && !inv.use_latest_image) inv.use_latest_image = true;

  GatewayClient client(url);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(wait_for_node);
  while (!client.healthy() && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
  }
  return run_client(inv, client, std::cout, std::cerr);
}
