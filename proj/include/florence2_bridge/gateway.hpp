#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "florence2_bridge/graph.hpp"
#include "florence2_bridge/messages.hpp"
#include "florence2_interfaces/codec.hpp"

namespace florence2_bridge {

/// Calls `f.template operator()<T>()` for the message type named `type`.
template <typename F>
decltype(auto) with_message_type(const std::string& type, F&& f) {
  if (type == msg::Image::kTypeName) return f.template operator()<msg::Image>();
  if (type == msg::String::kTypeName) return f.template operator()<msg::String>();
  if (type == msg::Detection2DArray::kTypeName) return f.template operator()<msg::Detection2DArray>();
  throw Error(ErrorCode::kInvalidConfig, "unsupported message type '" + type + "'");
}

inline nlohmann::json to_json(const graph::EndpointInfo& e) {
  return {{"name", e.name},
          {"type", e.type},
          {"node", e.node},
          {"kind", graph::to_string(e.kind)},
          {"qos", {{"reliability", graph::to_string(e.qos.reliability)}, {"depth", e.qos.depth}}}};
}

inline graph::EndpointInfo endpoint_from_json(const nlohmann::json& j) {
  graph::EndpointInfo e;
  e.name = j.at("name").get<std::string>();
  e.type = j.at("type").get<std::string>();
  e.node = j.at("node").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  for (auto k : {graph::EndpointKind::kPublisher, graph::EndpointKind::kSubscription,
                 graph::EndpointKind::kServiceServer, graph::EndpointKind::kActionServer}) {
    if (kind == graph::to_string(k)) e.kind = k;
  }
  e.qos.reliability = j.at("qos").at("reliability") == "reliable" ? graph::Reliability::kReliable
                                                                   : graph::Reliability::kBestEffort;
  e.qos.depth = j.at("qos").at("depth").get<std::size_t>();
  return e;
}

/// HTTP bridge that lets other processes use the in-process graph: endpoint
/// introspection, service calls, actions (goal, long-poll feedback, cancel,
/// result) and topic publish/subscribe. Payloads are CBOR.
class Gateway {
 public:
  using StatsProvider = std::function<nlohmann::json()>;

  explicit Gateway(std::shared_ptr<graph::Graph> graph, StatsProvider stats = nullptr,
                   std::string participant_name = "florence2_gateway")
      : graph_(graph), stats_(std::move(stats)), participant_(std::move(graph), std::move(participant_name), 2) {
    server_.new_task_queue = [] { return new httplib::ThreadPool(32); };
    server_.set_tcp_nodelay(true);
    server_.set_keep_alive_timeout(1);
    routes();
  }

  ~Gateway() { stop(); }

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Binds and starts serving; port 0 picks a free port. Returns the port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error(ErrorCode::kInvalidConfig, "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  void stop() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    changed_.notify_all();
    server_.stop();
    if (thread_.joinable()) thread_.join();
    participant_.shutdown();
    std::lock_guard lock(mutex_);
    subscriptions_.clear();
    publishers_.clear();
  }

  int port() const { return port_; }

 private:
  struct Buffered {
    std::uint64_t seq;
    double t;
    nlohmann::json message;
  };

  struct TopicBuffer {
    std::unique_ptr<graph::Endpoint> handle;
    std::deque<Buffered> messages;
    std::size_t capacity = 1000;
    std::uint64_t next_seq = 0;
  };

  struct Goal {
    std::optional<graph::GoalHandle<msg::ExecuteTaskAction>> handle;
    std::vector<nlohmann::json> feedback;
    std::optional<nlohmann::json> result;
  };

  static double steady_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
  }

  static void send_cbor(httplib::Response& res, const nlohmann::json& body) {
    res.set_content(florence2_interfaces::to_wire(body), "application/cbor");
  }

  static void send_error(httplib::Response& res, int status, ErrorCode code, const std::string& detail) {
    res.status = status;
    res.set_content(nlohmann::json{{"error", to_string(code)}, {"detail", detail}}.dump(), "application/json");
  }

  static std::chrono::milliseconds wait_param(const httplib::Request& req, int fallback = 0) {
    const int ms = req.has_param("wait_ms") ? std::stoi(req.get_param_value("wait_ms")) : fallback;
    return std::chrono::milliseconds(std::clamp(ms, 0, 30000));
  }

  static graph::QoS qos_param(const httplib::Request& req, graph::QoS fallback) {
    if (req.has_param("reliability")) {
      fallback.reliability = req.get_param_value("reliability") == "best_effort" ? graph::Reliability::kBestEffort
                                                                                 : graph::Reliability::kReliable;
    }
    if (req.has_param("depth")) fallback.depth = std::stoul(req.get_param_value("depth"));
    return fallback;
  }

  /// Goal completion is observed by polling the handle, so waits are sliced.
  template <typename Pred>
  void wait_for_goal(std::unique_lock<std::mutex>& lock, std::uint64_t id, std::chrono::milliseconds wait, Pred pred) {
    const auto deadline = std::chrono::steady_clock::now() + wait;
    while (true) {
      auto it = goals_.find(id);
      if (it == goals_.end() || stopping_) return;
      auto& goal = it->second;
      if (!goal.result && goal.handle) {
        if (auto result = goal.handle->wait(std::chrono::milliseconds(0))) {
          goal.result = florence2_interfaces::encode(*result);
        }
      }
      if (pred(goal)) return;
      const auto now = std::chrono::steady_clock::now();
      if (now >= deadline) return;
      changed_.wait_for(lock, std::min<std::chrono::steady_clock::duration>(deadline - now, std::chrono::milliseconds(5)));
    }
  }

  template <typename Fn>
  void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      const int status = e.code() == ErrorCode::kTimeout          ? 504
                         : e.code() == ErrorCode::kNodeUnreachable ? 404
                                                                   : 400;
      send_error(res, status, e.code(), e.what());
    } catch (const std::exception& e) {
      send_error(res, 400, ErrorCode::kParseError, e.what());
    }
  }

  void routes() {
    server_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });

    server_.Get("/graph", [this](const httplib::Request&, httplib::Response& res) {
      nlohmann::json out = {{"endpoints", nlohmann::json::array()}};
      for (const auto& e : graph_->endpoints()) out["endpoints"].push_back(to_json(e));
      res.set_content(out.dump(), "application/json");
    });

    server_.Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content((stats_ ? stats_() : nlohmann::json::object()).dump(), "application/json");
    });

    server_.Post("/service/call", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto client = participant_.create_client<msg::ExecuteTaskService>(req.get_param_value("name"));
        const auto timeout = std::chrono::milliseconds(
            req.has_param("timeout_ms") ? std::stol(req.get_param_value("timeout_ms")) : 30000);
        auto request = florence2_interfaces::decode_request(florence2_interfaces::from_wire(req.body));
        send_cbor(res, florence2_interfaces::encode(client.call(request, timeout)));
      });
    });

    server_.Post("/action/goal", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto client = participant_.create_action_client<msg::ExecuteTaskAction>(req.get_param_value("name"));
        auto goal = florence2_interfaces::decode_request(florence2_interfaces::from_wire(req.body));
        std::uint64_t id;
        {
          std::lock_guard lock(mutex_);
          id = ++next_goal_;
          goals_[id];
          while (goals_.size() > 256) goals_.erase(goals_.begin());
        }
        auto handle = client.send_goal(std::move(goal), [this, id](const ActionFeedback& fb) {
          {
            std::lock_guard lock(mutex_);
            if (auto it = goals_.find(id); it != goals_.end()) {
              it->second.feedback.push_back(florence2_interfaces::encode(fb));
            }
          }
          changed_.notify_all();
        });
        {
          std::lock_guard lock(mutex_);
          if (auto it = goals_.find(id); it != goals_.end()) it->second.handle = handle;
        }
        res.set_content(nlohmann::json{{"goal_id", id}}.dump(), "application/json");
      });
    });

    server_.Get("/action/feedback", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto id = std::stoull(req.get_param_value("goal"));
        const auto after = req.has_param("after") ? std::stoull(req.get_param_value("after")) : 0;
        std::unique_lock lock(mutex_);
        wait_for_goal(lock, id, wait_param(req), [&](const Goal& g) { return g.feedback.size() > after || g.result; });
        auto it = goals_.find(id);
        if (it == goals_.end()) throw Error(ErrorCode::kNodeUnreachable, "unknown goal");
        nlohmann::json out = {{"feedback", nlohmann::json::array()}};
        for (std::size_t i = after; i < it->second.feedback.size(); ++i) out["feedback"].push_back(it->second.feedback[i]);
        out["next"] = it->second.feedback.size();
        out["done"] = it->second.result.has_value();
        send_cbor(res, out);
      });
    });

    server_.Post("/action/cancel", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto id = std::stoull(req.get_param_value("goal"));
        std::lock_guard lock(mutex_);
        auto it = goals_.find(id);
        if (it == goals_.end() || !it->second.handle) throw Error(ErrorCode::kNodeUnreachable, "unknown goal");
        it->second.handle->cancel();
        res.set_content(nlohmann::json{{"canceling", true}}.dump(), "application/json");
      });
    });

    server_.Get("/action/result", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto id = std::stoull(req.get_param_value("goal"));
        std::unique_lock lock(mutex_);
        wait_for_goal(lock, id, wait_param(req), [](const Goal& g) { return g.result.has_value(); });
        auto it = goals_.find(id);
        if (it == goals_.end()) throw Error(ErrorCode::kNodeUnreachable, "unknown goal");
        if (!it->second.result) {
          res.status = 202;
          return;
        }
        send_cbor(res, *it->second.result);
      });
    });

    server_.Post("/topic/publish", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto name = req.get_param_value("name");
        const auto type = req.get_param_value("type");
        const auto qos = qos_param(req, graph::QoS::reliable());
        const auto body = florence2_interfaces::from_wire(req.body);
        std::lock_guard lock(mutex_);
        const auto key = name + "|" + type + "|" + graph::to_string(qos.reliability);
        auto& publisher = publishers_[key];
        with_message_type(type, [&]<typename T>() {
          if (!publisher) publisher = participant_.create_publisher<T>(name, qos);
          static_cast<graph::Publisher<T>&>(*publisher).publish(body.get<T>());
        });
        res.status = 204;
      });
    });

    server_.Post("/topic/subscribe", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto name = req.get_param_value("name");
        const auto type = req.get_param_value("type");
        const auto qos = qos_param(req, graph::QoS::reliable());
        std::uint64_t id;
        {
          std::lock_guard lock(mutex_);
          id = ++next_subscription_;
        }
        auto handle = with_message_type(type, [&]<typename T>() -> std::unique_ptr<graph::Endpoint> {
          return participant_.create_subscription<T>(name, qos, [this, id](const T& m) {
            {
              std::lock_guard lock(mutex_);
              auto it = subscriptions_.find(id);
              if (it == subscriptions_.end()) return;
              auto& buffer = it->second;
              buffer.messages.push_back({buffer.next_seq++, steady_seconds(), nlohmann::json(m)});
              while (buffer.messages.size() > buffer.capacity) buffer.messages.pop_front();
            }
            changed_.notify_all();
          });
        });
        std::lock_guard lock(mutex_);
        auto& buffer = subscriptions_[id];
        buffer.handle = std::move(handle);
        if (req.has_param("buffer")) buffer.capacity = std::max<std::size_t>(1, std::stoul(req.get_param_value("buffer")));
        res.set_content(nlohmann::json{{"subscription", id}}.dump(), "application/json");
      });
    });

    server_.Get("/topic/poll", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto id = std::stoull(req.get_param_value("subscription"));
        const std::uint64_t after = req.has_param("after") ? std::stoull(req.get_param_value("after")) : 0;
        const auto max = req.has_param("max") ? std::stoul(req.get_param_value("max")) : 1000;
        std::unique_lock lock(mutex_);
        changed_.wait_for(lock, wait_param(req), [&] {
          auto it = subscriptions_.find(id);
          return stopping_ || it == subscriptions_.end() || it->second.next_seq > after;
        });
        auto it = subscriptions_.find(id);
        if (it == subscriptions_.end()) throw Error(ErrorCode::kNodeUnreachable, "unknown subscription");
        nlohmann::json out = {{"messages", nlohmann::json::array()}};
        std::uint64_t next = after;
        for (const auto& m : it->second.messages) {
          if (m.seq < after) continue;
          if (out["messages"].size() >= max) break;
          out["messages"].push_back({{"seq", m.seq}, {"t", m.t}, {"msg", m.message}});
          next = m.seq + 1;
        }
        out["next"] = next;
        send_cbor(res, out);
      });
    });

    server_.Delete("/topic/subscribe", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto id = std::stoull(req.get_param_value("subscription"));
        std::unique_ptr<graph::Endpoint> handle;
        {
          std::lock_guard lock(mutex_);
          auto it = subscriptions_.find(id);
          if (it != subscriptions_.end()) {
            handle = std::move(it->second.handle);
            subscriptions_.erase(it);
          }
        }
        res.status = 204;
      });
    });
  }

  std::shared_ptr<graph::Graph> graph_;
  StatsProvider stats_;
  graph::Participant participant_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;

  std::mutex mutex_;
  std::condition_variable changed_;
  bool stopping_ = false;
  std::map<std::uint64_t, Goal> goals_;
  std::uint64_t next_goal_ = 0;
  std::map<std::uint64_t, TopicBuffer> subscriptions_;
  std::uint64_t next_subscription_ = 0;
  std::map<std::string, std::unique_ptr<graph::Endpoint>> publishers_;
};

}  // namespace florence2_bridge
