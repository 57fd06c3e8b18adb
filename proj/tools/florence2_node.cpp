#include <csignal>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "florence2_bridge/gateway.hpp"
#include "florence2_bridge/node.hpp"

using namespace florence2_bridge;

int main(int argc, char** argv) {
  CLI::App app{"Florence-2 vision-language node"};
  std::string params_file, host = "127.0.0.1", log_level = "info";
  std::vector<std::string> overrides;
  int port = 8765;
  app.add_option("--params-file", params_file, "YAML parameter file")->check(CLI::ExistingFile);
  app.add_option("-p,--param", overrides, "Parameter override key:=value (repeatable)");
  app.add_option("--host", host, "Gateway bind address");
  app.add_option("--port", port, "Gateway port; 0 picks a free port");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error"}));
  CLI11_PARSE(app, argc, argv);

  spdlog::set_default_logger(spdlog::stderr_color_mt("florence2_node"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  // Signals are taken synchronously by main; every thread inherits the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  try {
    NodeParameters params;
    for (const auto& o : overrides) {
      if (o.rfind("node_name:=", 0) == 0) params.apply_override(o);
    }
    if (!params_file.empty()) params.load_file(params_file);
    for (const auto& o : overrides) params.apply_override(o);

    auto graph = graph::Graph::create();
    BridgeNode node(graph, params);
    Gateway gateway(graph, [&node] {
      auto j = to_json(node.stats());
      j.update(node.info());
      return j;
    });
    const int bound = gateway.start(host, port);
    std::cout << "port: " << bound << std::endl;
    spdlog::info("gateway listening on {}:{}", host, bound);

    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("received signal {}, shutting down", sig);
    gateway.stop();
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
