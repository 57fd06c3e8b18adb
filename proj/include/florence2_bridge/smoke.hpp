#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "florence2_bridge/client.hpp"
#include "florence2_bridge/device.hpp"
#include "florence2_bridge/messages.hpp"
#include "florence2_bridge/subprocess.hpp"

namespace florence2_bridge::smoke {

enum class Profile { kNative, kContainerCpu, kContainerGpu };

inline std::string_view to_string(Profile p) {
  switch (p) {
    case Profile::kNative: return "native";
    case Profile::kContainerCpu: return "container_cpu";
    case Profile::kContainerGpu: return "container_gpu";
  }
  return "?";
}

inline Profile parse_profile(const std::string& s) {
  if (s == "native") return Profile::kNative;
  if (s == "container_cpu") return Profile::kContainerCpu;
  if (s == "container_gpu") return Profile::kContainerGpu;
  throw Error(ErrorCode::kInvalidConfig, "unknown profile '" + s + "'");
}

enum class Status { kPass, kFail, kSkip };

inline std::string_view to_string(Status s) {
  switch (s) {
    case Status::kPass: return "PASS";
    case Status::kFail: return "FAIL";
    case Status::kSkip: return "SKIP";
  }
  return "?";
}

struct Check {
  std::string name;
  Status status = Status::kSkip;
  std::string detail;
};

struct Report {
  Profile profile = Profile::kNative;
  std::vector<Check> checks;

  bool passed() const {
    for (const auto& c : checks) {
      if (c.status == Status::kFail) return false;
    }
    return true;
  }

  /// Pass/fail/skip per check, comparable across profiles.
  std::vector<std::pair<std::string, Status>> vector() const {
    std::vector<std::pair<std::string, Status>> out;
    for (const auto& c : checks) out.emplace_back(c.name, c.status);
    return out;
  }
};

inline void print(std::ostream& out, const Report& report) {
  for (const auto& c : report.checks) {
    out << to_string(c.status) << " " << c.name;
    if (!c.detail.empty()) out << ": " << c.detail;
    out << "\n";
  }
  out << "profile " << to_string(report.profile) << ": " << (report.passed() ? "PASS" : "FAIL") << "\n";
}

struct Options {
  Profile profile = Profile::kNative;
  std::filesystem::path node_binary;
  std::string image_cpu = "florence2-bridge:cpu";
  std::string image_gpu = "florence2-bridge:gpu";
  std::size_t continuous_frames = 50;
  std::chrono::seconds startup_timeout{30};
};

inline std::optional<std::string> find_on_path(const std::string& program) {
  const char* path = std::getenv("PATH");
  if (!path) return std::nullopt;
  std::string p(path);
  std::size_t start = 0;
  while (start <= p.size()) {
    auto end = p.find(':', start);
    if (end == std::string::npos) end = p.size();
    const auto candidate = std::filesystem::path(p.substr(start, end - start)) / program;
    std::error_code ec;
    if (std::filesystem::is_regular_file(candidate, ec)) return candidate.string();
    start = end + 1;
  }
  return std::nullopt;
}

inline std::optional<std::string> container_runtime() {
  for (const char* rt : {"docker", "podman"}) {
    if (auto found = find_on_path(rt)) return found;
  }
  return std::nullopt;
}

/// Command line that starts a mock node with continuous object detection.
inline std::vector<std::string> node_command(const Options& o, const std::string& runtime = "") {
  std::vector<std::string> args = {"-p", "model:=mock", "-p", "continuous_task:=<OD>", "--port", "0",
                                   "--log-level", "warn"};
  if (o.profile == Profile::kContainerGpu) args.insert(args.end(), {"-p", "device:=cuda"});
  std::vector<std::string> argv;
  if (o.profile == Profile::kNative) {
    argv.push_back(o.node_binary.string());
  } else {
    argv = {runtime, "run", "--rm", "--network", "host"};
    if (o.profile == Profile::kContainerGpu) argv.insert(argv.end(), {"--gpus", "all"});
    argv.push_back(o.profile == Profile::kContainerGpu ? o.image_gpu : o.image_cpu);
    argv.push_back("florence2_node");
  }
  argv.insert(argv.end(), args.begin(), args.end());
  return argv;
}

namespace detail {

struct ExpectedEndpoint {
  const char* name;
  const char* type;
  graph::EndpointKind kind;
  graph::Reliability reliability;
};

inline const std::vector<ExpectedEndpoint>& expected_endpoints() {
  using graph::EndpointKind;
  using graph::Reliability;
  static const std::vector<ExpectedEndpoint> e = {
      {"/camera/image_raw", msg::Image::kTypeName, EndpointKind::kSubscription, Reliability::kBestEffort},
      {"/florence2_node/results_json", msg::String::kTypeName, EndpointKind::kPublisher, Reliability::kReliable},
      {"/florence2_node/detections", msg::Detection2DArray::kTypeName, EndpointKind::kPublisher,
       Reliability::kReliable},
      {"/florence2_node/annotated_image", msg::Image::kTypeName, EndpointKind::kPublisher, Reliability::kReliable},
      {"/florence2_node/execute_task", msg::ExecuteTaskService::kTypeName, EndpointKind::kServiceServer,
       Reliability::kReliable},
      {"/florence2_node/execute_task_action", msg::ExecuteTaskAction::kTypeName, EndpointKind::kActionServer,
       Reliability::kReliable},
  };
  return e;
}

inline RasterImage test_image(std::uint32_t w, std::uint32_t h, std::uint8_t seed) {
  RasterImage image;
  image.width = w;
  image.height = h;
  image.data.resize(image.expected_size());
  for (std::size_t i = 0; i < image.data.size(); ++i) image.data[i] = static_cast<std::uint8_t>(i * 7 + seed);
  image.frame_id = "smoke";
  return image;
}

}  // namespace detail

/// Endpoints owned by `node` must be exactly the six node endpoints.
inline std::string check_endpoints(const std::vector<graph::EndpointInfo>& endpoints,
                                   const std::string& node = "florence2_node") {
  std::vector<graph::EndpointInfo> own;
  for (const auto& e : endpoints) {
    if (e.node == node) own.push_back(e);
  }
  if (own.size() != detail::expected_endpoints().size()) {
    return "expected 6 endpoints, found " + std::to_string(own.size());
  }
  for (const auto& want : detail::expected_endpoints()) {
    bool found = false;
    for (const auto& e : own) {
      found |= e.name == want.name && e.type == want.type && e.kind == want.kind &&
               e.qos.reliability == want.reliability;
    }
    if (!found) return std::string("missing or mismatched ") + want.name;
  }
  return "";
}

/// Runs every check against a node reachable at `url`.
inline std::vector<Check> run_checks(GatewayClient& client, const Options& o) {
  std::vector<Check> checks;
  auto run = [&](const std::string& name, const std::function<std::string()>& body) {
    Check c{name, Status::kPass, ""};
    try {
      c.detail = body();
      if (!c.detail.empty()) c.status = Status::kFail;
    } catch (const std::exception& e) {
      c.status = Status::kFail;
      c.detail = e.what();
    }
    checks.push_back(c);
  };

  run("endpoints", [&] { return check_endpoints(client.graph()); });

  run("service_call", [&]() -> std::string {
    ExecuteTaskRequest r;
    r.task_token = "<OD>";
    r.image = detail::test_image(64, 48, 1);
    auto response = client.call_service("/florence2_node/execute_task", r, std::chrono::seconds(10));
    if (!response.success) return response.error_message;
    if (!response.detections || response.detections->detections.size() != 1) return "expected one detection";
    const auto& d = response.detections->detections[0];
    if (d.center_x != 32.0 || d.center_y != 24.0) return "unexpected detection center";
    return "";
  });

  run("action_feedback", [&]() -> std::string {
    ExecuteTaskRequest goal;
    goal.task_token = "<CAPTION>";
    goal.image = detail::test_image(64, 48, 2);
    const auto id = client.send_goal("/florence2_node/execute_task_action", goal);
    std::vector<FeedbackStage> stages;
    std::size_t next = 0;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
    while (std::chrono::steady_clock::now() < deadline) {
      auto batch = client.poll_feedback(id, next, std::chrono::milliseconds(200));
      for (const auto& f : batch.feedback) stages.push_back(f.stage);
      next = batch.next;
      if (batch.done) break;
    }
    auto result = client.goal_result(id, std::chrono::seconds(5));
    if (!result) return "no result";
    if (result->status != GoalStatus::kSucceeded) return "goal " + std::string(to_string(result->status));
    const std::vector<FeedbackStage> want = {FeedbackStage::kReceived, FeedbackStage::kPreprocessing,
                                             FeedbackStage::kInferenceRunning, FeedbackStage::kPostprocessing};
    if (stages != want) return "feedback stages out of order (" + std::to_string(stages.size()) + " received)";
    return "";
  });

  run("continuous_frames", [&]() -> std::string {
    auto sub = client.subscribe<msg::Detection2DArray>("/florence2_node/detections", graph::QoS::reliable(100));
    std::uint64_t next = 0;
    std::string problem;
    for (std::size_t i = 1; i <= o.continuous_frames && problem.empty(); ++i) {
      auto image = detail::test_image(80, 60, static_cast<std::uint8_t>(i));
      image.stamp = {static_cast<std::int32_t>(1000 + i), 0};
      client.publish("/camera/image_raw", convert_image_out(image), graph::QoS::sensor_data());
      std::vector<GatewayClient::Received<msg::Detection2DArray>> got;
      for (int tries = 0; tries < 20 && got.empty(); ++tries) {
        got = client.poll<msg::Detection2DArray>(sub, next, std::chrono::milliseconds(250));
      }
      if (got.size() != 1) {
        problem = "frame " + std::to_string(i) + ": " + std::to_string(got.size()) + " outputs";
      } else if (got[0].message.header.stamp.sec != image.stamp.sec) {
        problem = "frame " + std::to_string(i) + ": stamp mismatch";
      }
    }
    client.unsubscribe(sub);
    return problem;
  });

  Check gpu{"gpu_device", Status::kSkip, "profile does not use a GPU"};
  if (o.profile == Profile::kContainerGpu) {
    if (SystemProbe().gpu_count() == 0) {
      gpu.detail = "no GPU present";
    } else {
      try {
        const auto device = client.stats().value("device", std::string());
        gpu.status = device.rfind("cuda", 0) == 0 ? Status::kPass : Status::kFail;
        gpu.detail = device.rfind("cuda", 0) == 0 ? "" : "node runs on " + device;
      } catch (const std::exception& e) {
        gpu = {"gpu_device", Status::kFail, e.what()};
      }
    }
  }
  checks.push_back(gpu);
  return checks;
}

inline const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names = {"endpoints", "service_call", "action_feedback", "continuous_frames",
                                                 "gpu_device"};
  return names;
}

inline Report skipped(Profile profile, const std::string& reason) {
  Report r{profile, {}};
  for (const auto& n : check_names()) r.checks.push_back({n, Status::kSkip, reason});
  return r;
}

/// Launches the node for the profile, runs the checks and stops the node.
inline Report run_smoke(const Options& o) {
  std::string runtime;
  if (o.profile != Profile::kNative) {
    auto rt = container_runtime();
    if (!rt) return skipped(o.profile, "no container runtime (docker/podman) on PATH");
    runtime = *rt;
  }
  if (o.profile == Profile::kContainerGpu && SystemProbe().gpu_count() == 0) {
    return skipped(o.profile, "no GPU present");
  }

  Report report{o.profile, {}};
  auto process = Subprocess::spawn(node_command(o, runtime));
  std::optional<int> port;
  const auto deadline = std::chrono::steady_clock::now() + o.startup_timeout;
  try {
    while (!port && std::chrono::steady_clock::now() < deadline) {
      auto line = process.read_line(std::chrono::milliseconds(200));
      if (line && line->rfind("port: ", 0) == 0) port = std::stoi(line->substr(6));
    }
  } catch (const std::exception& e) {
    report.checks.push_back({"startup", Status::kFail, e.what()});
  }
  if (!port) {
    if (report.checks.empty()) report.checks.push_back({"startup", Status::kFail, "node did not report its port"});
    process.terminate();
    return report;
  }
  {
    GatewayClient client("http://127.0.0.1:" + std::to_string(*port));
    report.checks = run_checks(client, o);
  }
  const int status = process.terminate(std::chrono::seconds(5));
  if (status != 0) report.checks.push_back({"shutdown", Status::kFail, "exit status " + std::to_string(status)});
  return report;
}

}  // namespace florence2_bridge::smoke
