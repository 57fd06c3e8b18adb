#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "florence2_bridge/bench.hpp"

using namespace florence2_bridge;

int main(int argc, char** argv) {
  CLI::App app{"Continuous-mode throughput benchmark"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Replay a stream through a node and write a report");
  std::string config_path, output;
  run->add_option("--config", config_path, "Bench YAML config")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--output", output, "Report path (overrides the config)");

  auto* table = app.add_subcommand("table", "Combine reports into a device x model table");
  std::vector<std::string> reports;
  bool reference = false, csv_only = false;
  std::string csv_path;
  table->add_option("reports", reports, "Report JSON files")->required()->check(CLI::ExistingFile);
  table->add_flag("--reference", reference, "Overlay the published reference rows");
  table->add_flag("--csv", csv_only, "Print CSV instead of the aligned table");
  table->add_option("--csv-out", csv_path, "Also write CSV to this file");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_default_logger(spdlog::stderr_color_mt("bench"));

  try {
    if (*run) {
      auto config = bench::load_config(config_path);
      if (!output.empty()) config.output = output;
      auto report = bench::run_bench(config);
      const auto text = bench::to_json(report).dump(2);
      if (config.output.empty()) {
        std::cout << text << "\n";
      } else {
        std::ofstream(config.output) << text << "\n";
        std::cout << "fps min/avg/max: " << bench::detail::fmt2(report.fps_min) << " / "
                  << bench::detail::fmt2(report.fps_avg) << " / " << bench::detail::fmt2(report.fps_max) << "\n"
                  << "report: " << config.output << "\n";
      }
      return 0;
    }
    std::vector<bench::BenchReport> loaded;
    for (const auto& r : reports) loaded.push_back(bench::load_report(r));
    auto t = bench::emit_table(loaded, reference);
    std::cout << (csv_only ? t.csv : t.text);
    for (const auto& a : t.advisories) std::cout << "advisory: " << a << "\n";
    if (!csv_path.empty()) std::ofstream(csv_path) << t.csv;
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
