#pragma once

#include <chrono>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "florence2_bridge/engine.hpp"
#include "florence2_bridge/gateway.hpp"
#include "florence2_bridge/image_conversion.hpp"
#include "florence2_interfaces/codec.hpp"

namespace florence2_bridge {

/// Remote access to a node's graph through its Gateway.
class GatewayClient {
 public:
  explicit GatewayClient(const std::string& url, std::chrono::milliseconds connect_timeout = std::chrono::seconds(2))
      : url_(url), http_(url) {
    http_.set_connection_timeout(connect_timeout);
    http_.set_read_timeout(std::chrono::seconds(60));
    http_.set_keep_alive(true);
    http_.set_tcp_nodelay(true);
  }

  const std::string& url() const { return url_; }

  bool healthy() {
    auto res = http_.Get("/healthz");
    return res && res->status == 200;
  }

  std::vector<graph::EndpointInfo> graph() {
    auto body = nlohmann::json::parse(get("/graph").body);
    std::vector<graph::EndpointInfo> out;
    for (const auto& e : body.at("endpoints")) out.push_back(endpoint_from_json(e));
    return out;
  }

  nlohmann::json stats() { return nlohmann::json::parse(get("/stats").body); }

  ExecuteTaskResponse call_service(const std::string& name, const ExecuteTaskRequest& request,
                                   std::chrono::milliseconds timeout) {
    http_.set_read_timeout(timeout + std::chrono::seconds(5));
    auto res = post("/service/call?" + query({{"name", name}, {"timeout_ms", std::to_string(timeout.count())}}),
                    florence2_interfaces::to_wire(florence2_interfaces::encode(request)));
    return florence2_interfaces::decode_response(florence2_interfaces::from_wire(res.body));
  }

  std::uint64_t send_goal(const std::string& name, const ExecuteTaskRequest& goal) {
    auto res = post("/action/goal?" + query({{"name", name}}),
                    florence2_interfaces::to_wire(florence2_interfaces::encode(goal)));
    return nlohmann::json::parse(res.body).at("goal_id").get<std::uint64_t>();
  }

  struct FeedbackBatch {
    std::vector<ActionFeedback> feedback;
    std::size_t next = 0;
    bool done = false;
  };

  FeedbackBatch poll_feedback(std::uint64_t goal, std::size_t after, std::chrono::milliseconds wait) {
    auto res = get("/action/feedback?" + query({{"goal", std::to_string(goal)},
                                                {"after", std::to_string(after)},
                                                {"wait_ms", std::to_string(wait.count())}}));
    auto body = florence2_interfaces::from_wire(res.body);
    FeedbackBatch batch;
    for (const auto& f : body.at("feedback")) batch.feedback.push_back(florence2_interfaces::decode_feedback(f));
    batch.next = body.at("next").get<std::size_t>();
    batch.done = body.at("done").get<bool>();
    return batch;
  }

  void cancel_goal(std::uint64_t goal) { post("/action/cancel?" + query({{"goal", std::to_string(goal)}}), ""); }

  std::optional<ActionResult> goal_result(std::uint64_t goal, std::chrono::milliseconds wait) {
    auto res = get("/action/result?" + query({{"goal", std::to_string(goal)}, {"wait_ms", std::to_string(wait.count())}}));
    if (res.status == 202) return std::nullopt;
    return florence2_interfaces::decode_action_result(florence2_interfaces::from_wire(res.body));
  }

  template <typename T>
  void publish(const std::string& topic, const T& message, graph::QoS qos) {
    post("/topic/publish?" + query({{"name", topic},
                                    {"type", T::kTypeName},
                                    {"reliability", graph::to_string(qos.reliability)},
                                    {"depth", std::to_string(qos.depth)}}),
         florence2_interfaces::to_wire(nlohmann::json(message)));
  }

  template <typename T>
  std::uint64_t subscribe(const std::string& topic, graph::QoS qos, std::size_t buffer = 1000) {
    auto res = post("/topic/subscribe?" + query({{"name", topic},
                                                 {"type", T::kTypeName},
                                                 {"reliability", graph::to_string(qos.reliability)},
                                                 {"depth", std::to_string(qos.depth)},
                                                 {"buffer", std::to_string(buffer)}}),
                    "");
    return nlohmann::json::parse(res.body).at("subscription").template get<std::uint64_t>();
  }

  template <typename T>
  struct Received {
    std::uint64_t seq;
    double t;
    T message;
  };

  /// Messages with seq >= `after`; `next` is where the following poll starts.
  template <typename T>
  std::vector<Received<T>> poll(std::uint64_t subscription, std::uint64_t& next, std::chrono::milliseconds wait) {
    auto res = get("/topic/poll?" + query({{"subscription", std::to_string(subscription)},
                                           {"after", std::to_string(next)},
                                           {"wait_ms", std::to_string(wait.count())}}));
    auto body = florence2_interfaces::from_wire(res.body);
    std::vector<Received<T>> out;
    for (const auto& m : body.at("messages")) {
      out.push_back({m.at("seq").get<std::uint64_t>(), m.at("t").get<double>(), m.at("msg").get<T>()});
    }
    next = body.at("next").get<std::uint64_t>();
    return out;
  }

  void unsubscribe(std::uint64_t subscription) {
    auto res = http_.Delete("/topic/subscribe?" + query({{"subscription", std::to_string(subscription)}}));
    check(res, "/topic/subscribe");
  }

 private:
  static std::string query(std::initializer_list<std::pair<std::string, std::string>> params) {
    httplib::Params p;
    for (const auto& [k, v] : params) p.emplace(k, v);
    return httplib::detail::params_to_query_str(p);
  }

  httplib::Response get(const std::string& path) {
    auto res = http_.Get(path);
    check(res, path);
    return *res;
  }

  httplib::Response post(const std::string& path, const std::string& body) {
    auto res = http_.Post(path, body, "application/cbor");
    check(res, path);
    return *res;
  }

  void check(const httplib::Result& res, const std::string& path) {
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::Write) {
        throw Error(ErrorCode::kTimeout, url_ + path + ": " + httplib::to_string(err));
      }
      throw Error(ErrorCode::kNodeUnreachable, url_ + ": " + httplib::to_string(err));
    }
    if (res->status >= 400) {
      ErrorCode code = ErrorCode::kNodeUnreachable;
      std::string detail = res->body;
      try {
        auto body = nlohmann::json::parse(res->body);
        detail = body.value("detail", detail);
        const auto name = body.value("error", "");
        for (int c = 0; c <= static_cast<int>(ErrorCode::kInvalidConfig); ++c) {
          if (to_string(static_cast<ErrorCode>(c)) == name) code = static_cast<ErrorCode>(c);
        }
      } catch (const nlohmann::json::exception&) {
      }
      throw Error(code, detail);
    }
  }

  std::string url_;
  httplib::Client http_;
};

// Example client ---------------------------------------------------------------

enum class ClientMode { kService, kAction };

struct ClientInvocation {
  ClientMode mode = ClientMode::kService;
  std::string task_token;
  std::string text_input;
  std::optional<std::string> image_path;
  bool use_latest_image = false;
  double timeout = 30.0;
  std::optional<double> cancel_after;
  std::string node = "florence2_node";
  bool verbose = false;
};

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kTaskFailed = 1;
inline constexpr int kCanceled = 2;
inline constexpr int kTimeout = 3;
inline constexpr int kUnreachable = 4;
inline constexpr int kUsage = 64;
}  // namespace exit_code

/// Time source used to stamp images loaded from disk.
using StampClock = std::function<Stamp()>;

inline std::string format_number(double value, int precision = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << value;
  return os.str();
}

inline void print_detections(std::ostream& out, const std::optional<DetectionSet>& detections) {
  if (!detections) return;
  out << "detections: " << detections->detections.size() << "\n";
  for (std::size_t i = 0; i < detections->detections.size(); ++i) {
    const auto& d = detections->detections[i];
    out << "detection[" << i << "]: label=" << nlohmann::json(d.label).dump() << " center=("
        << format_number(d.center_x, 1) << "," << format_number(d.center_y, 1) << ") size=("
        << format_number(d.size_x, 1) << "," << format_number(d.size_y, 1) << ") score=" << format_number(d.score)
        << "\n";
  }
}

inline void print_response(std::ostream& out, const ExecuteTaskResponse& r, bool verbose) {
  out << "success: " << (r.success ? "true" : "false") << "\n";
  if (!r.success) {
    out << "error: " << r.error_message << "\n";
    return;
  }
  if (verbose) out << "inference_time: " << format_number(r.inference_time, 3) << "\n";
  out << "results_json: " << r.results_json << "\n";
  print_detections(out, r.detections);
}

/// Runs one service or action invocation and prints a line-oriented report.
/// Returns one of the exit_code values.
inline int run_client(const ClientInvocation& inv, GatewayClient& gateway, std::ostream& out, std::ostream& err,
                      const StampClock& clock = now_stamp) {
  if (inv.cancel_after && inv.mode != ClientMode::kAction) {
    err << "error: --cancel-after is only valid in action mode\n";
    return exit_code::kUsage;
  }
  if (inv.task_token.empty()) {
    err << "error: --task is required\n";
    return exit_code::kUsage;
  }
  if (inv.image_path && inv.use_latest_image) {
    err << "error: --image and --use-latest are exclusive\n";
    return exit_code::kUsage;
  }

  ExecuteTaskRequest request;
  request.task_token = inv.task_token;
  request.text_input = inv.text_input;
  request.use_latest_image = inv.use_latest_image;
  if (inv.image_path) {
    try {
      request.image = load_image_file(*inv.image_path);
      request.image->stamp = clock();
      request.image->frame_id = "file";
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return exit_code::kUsage;
    }
  }

  const auto timeout = std::chrono::milliseconds(static_cast<long>(inv.timeout * 1000));
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  try {
    out << "task: " << inv.task_token << "\n";
    if (inv.mode == ClientMode::kService) {
      auto response = gateway.call_service("/" + inv.node + "/execute_task", request, timeout);
      print_response(out, response, inv.verbose);
      if (inv.verbose) out << "elapsed: " << format_number(elapsed(), 3) << "\n";
      return response.success ? exit_code::kOk : exit_code::kTaskFailed;
    }

    const auto goal = gateway.send_goal("/" + inv.node + "/execute_task_action", request);
    out << "goal: accepted\n";
    std::size_t next = 0;
    bool cancel_sent = false;
    while (true) {
      if (elapsed() > inv.timeout) throw Error(ErrorCode::kTimeout, "no result within " + format_number(inv.timeout) + " s");
      if (inv.cancel_after && !cancel_sent && elapsed() >= *inv.cancel_after) {
        gateway.cancel_goal(goal);
        cancel_sent = true;
      }
      auto wait = std::chrono::milliseconds(50);
      if (inv.cancel_after && !cancel_sent) {
        wait = std::min(wait, std::chrono::milliseconds(static_cast<long>(
                                  std::max(0.0, (*inv.cancel_after - elapsed()) * 1000))));
      }
      auto batch = gateway.poll_feedback(goal, next, wait);
      for (const auto& fb : batch.feedback) {
        out << "feedback: " << to_string(fb.stage);
        if (inv.verbose) out << " elapsed=" << format_number(fb.elapsed, 3);
        out << "\n";
      }
      next = batch.next;
      if (batch.done) break;
    }
    auto result = gateway.goal_result(goal, timeout);
    if (!result) throw Error(ErrorCode::kTimeout, "result not available");
    out << "status: " << to_string(result->status) << "\n";
    print_response(out, result->response, inv.verbose);
    if (inv.verbose) out << "elapsed: " << format_number(elapsed(), 3) << "\n";
    switch (result->status) {
      case GoalStatus::kSucceeded: return exit_code::kOk;
      case GoalStatus::kCanceled: return exit_code::kCanceled;
      case GoalStatus::kAborted: return exit_code::kTaskFailed;
    }
    return exit_code::kTaskFailed;
  } catch (const Error& e) {
    out << "error: " << to_string(e.code()) << "\n";
    err << e.what() << "\n";
    if (e.code() == ErrorCode::kTimeout) return exit_code::kTimeout;
    if (e.code() == ErrorCode::kNodeUnreachable) return exit_code::kUnreachable;
    return exit_code::kTaskFailed;
  }
}

}  // namespace florence2_bridge
