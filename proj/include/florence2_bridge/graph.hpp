#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "florence2_bridge/engine.hpp"
#include "florence2_interfaces/error_code.hpp"

/// A small in-process publish/subscribe graph with the same shape as a ROS 2
/// node graph: named topics with QoS, services, actions with feedback and
/// cancellation, and runtime introspection of every endpoint.
namespace florence2_bridge::graph {

using florence2_interfaces::Error;
using florence2_interfaces::ErrorCode;

enum class Reliability { kBestEffort, kReliable };

struct QoS {
  Reliability reliability = Reliability::kReliable;
  std::size_t depth = 10;

  static QoS sensor_data() { return {Reliability::kBestEffort, 1}; }
  static QoS reliable(std::size_t depth = 10) { return {Reliability::kReliable, depth}; }
  bool operator==(const QoS&) const = default;
};

/// A reliable subscription cannot be served by a best-effort publisher.
inline bool compatible(const QoS& offered, const QoS& requested) {
  return !(requested.reliability == Reliability::kReliable && offered.reliability == Reliability::kBestEffort);
}

inline const char* to_string(Reliability r) { return r == Reliability::kReliable ? "reliable" : "best_effort"; }

enum class EndpointKind { kPublisher, kSubscription, kServiceServer, kActionServer };

inline const char* to_string(EndpointKind kind) {
  switch (kind) {
    case EndpointKind::kPublisher: return "publisher";
    case EndpointKind::kSubscription: return "subscription";
    case EndpointKind::kServiceServer: return "service";
    case EndpointKind::kActionServer: return "action";
  }
  return "?";
}

struct EndpointInfo {
  std::string name;
  std::string type;
  std::string node;
  EndpointKind kind = EndpointKind::kPublisher;
  QoS qos;
};

/// "~/x" -> "/node/x", "x" -> "/x", "/x" unchanged.
inline std::string resolve_name(const std::string& name, const std::string& node) {
  if (name.rfind("~/", 0) == 0) return "/" + node + name.substr(1);
  if (!name.empty() && name.front() == '/') return name;
  return "/" + name;
}

/// Thread pool that runs a participant's callbacks. Posting after stop() is a
/// silent no-op so late publishers never touch a dead participant.
class Executor {
 public:
  explicit Executor(std::size_t threads = 1) {
    for (std::size_t i = 0; i < std::max<std::size_t>(threads, 1); ++i) {
      workers_.emplace_back([this] { loop(); });
    }
  }

  ~Executor() { stop(); }

  Executor(const Executor&) = delete;
  Executor& operator=(const Executor&) = delete;

  bool post(std::function<void()> task) {
    {
      std::lock_guard lock(mutex_);
      if (stopping_) return false;
      tasks_.push_back(std::move(task));
    }
    wake_.notify_one();
    return true;
  }

  /// Waits for running callbacks; pending ones are discarded.
  void stop() {
    {
      std::lock_guard lock(mutex_);
      if (stopping_) return;
      stopping_ = true;
      tasks_.clear();
    }
    wake_.notify_all();
    for (auto& t : workers_) {
      if (t.joinable()) t.join();
    }
  }

 private:
  void loop() {
    std::unique_lock lock(mutex_);
    while (true) {
      wake_.wait(lock, [this] { return stopping_ || !tasks_.empty(); });
      if (stopping_) return;
      auto task = std::move(tasks_.front());
      tasks_.pop_front();
      lock.unlock();
      task();
      lock.lock();
    }
  }

  std::mutex mutex_;
  std::condition_variable wake_;
  std::deque<std::function<void()>> tasks_;
  std::vector<std::thread> workers_;
  bool stopping_ = false;
};

namespace detail {

class SubscriptionBase {
 public:
  virtual ~SubscriptionBase() = default;
  virtual const QoS& qos() const = 0;
};

class ServerBase {
 public:
  virtual ~ServerBase() = default;
};

}  // namespace detail

class Graph : public std::enable_shared_from_this<Graph> {
 public:
  static std::shared_ptr<Graph> create() { return std::shared_ptr<Graph>(new Graph()); }

  std::vector<EndpointInfo> endpoints() const {
    std::lock_guard lock(mutex_);
    std::vector<EndpointInfo> out;
    for (const auto& [id, info] : endpoints_) out.push_back(info);
    return out;
  }

  std::vector<EndpointInfo> endpoints_of(const std::string& node) const {
    auto all = endpoints();
    std::erase_if(all, [&](const EndpointInfo& e) { return e.node != node; });
    return all;
  }

  std::optional<std::string> topic_type(const std::string& topic) const {
    std::lock_guard lock(mutex_);
    auto it = topics_.find(topic);
    if (it == topics_.end()) return std::nullopt;
    return it->second.type;
  }

  // Registry plumbing used by the endpoint classes below.

  std::uint64_t add_endpoint(EndpointInfo info) {
    std::lock_guard lock(mutex_);
    const auto id = ++next_id_;
    if (info.kind == EndpointKind::kPublisher || info.kind == EndpointKind::kSubscription) {
      auto& topic = topics_[info.name];
      if (topic.type.empty()) topic.type = info.type;
      if (topic.type != info.type) {
        throw Error(ErrorCode::kInvalidConfig,
                    "topic " + info.name + " has type " + topic.type + ", not " + info.type);
      }
      ++topic.users;
    }
    endpoints_.emplace(id, std::move(info));
    return id;
  }

  void remove_endpoint(std::uint64_t id) {
    std::lock_guard lock(mutex_);
    auto it = endpoints_.find(id);
    if (it == endpoints_.end()) return;
    if (auto t = topics_.find(it->second.name); t != topics_.end() && --t->second.users == 0) topics_.erase(t);
    subscriptions_.erase(id);
    if (servers_.count(it->second.name) && servers_[it->second.name].first == id) servers_.erase(it->second.name);
    endpoints_.erase(it);
  }

  void attach_subscription(std::uint64_t id, std::weak_ptr<detail::SubscriptionBase> sub) {
    std::lock_guard lock(mutex_);
    subscriptions_[id] = std::move(sub);
  }

  template <typename Sub>
  std::vector<std::shared_ptr<Sub>> subscribers(const std::string& topic, const QoS& offered) const {
    std::lock_guard lock(mutex_);
    std::vector<std::shared_ptr<Sub>> out;
    for (const auto& [id, weak] : subscriptions_) {
      const auto& info = endpoints_.at(id);
      if (info.name != topic) continue;
      auto sub = weak.lock();
      if (sub && compatible(offered, sub->qos())) out.push_back(std::static_pointer_cast<Sub>(sub));
    }
    return out;
  }

  void attach_server(std::uint64_t id, const std::string& name, std::weak_ptr<detail::ServerBase> server) {
    std::lock_guard lock(mutex_);
    if (auto it = servers_.find(name); it != servers_.end() && !it->second.second.expired()) {
      throw Error(ErrorCode::kInvalidConfig, name + " already has a server");
    }
    servers_[name] = {id, std::move(server)};
  }

  template <typename Server>
  std::shared_ptr<Server> server(const std::string& name, const std::string& type) const {
    std::lock_guard lock(mutex_);
    auto it = servers_.find(name);
    if (it == servers_.end()) return nullptr;
    if (endpoints_.at(it->second.first).type != type) return nullptr;
    return std::static_pointer_cast<Server>(it->second.second.lock());
  }

 private:
  Graph() = default;

  struct TopicEntry {
    std::string type;
    std::size_t users = 0;
  };

  mutable std::mutex mutex_;
  std::uint64_t next_id_ = 0;
  std::map<std::uint64_t, EndpointInfo> endpoints_;
  std::map<std::string, TopicEntry> topics_;
  std::map<std::uint64_t, std::weak_ptr<detail::SubscriptionBase>> subscriptions_;
  std::map<std::string, std::pair<std::uint64_t, std::weak_ptr<detail::ServerBase>>> servers_;
};

/// Registration that disappears from the graph with its owner.
class Endpoint {
 public:
  Endpoint(std::shared_ptr<Graph> graph, EndpointInfo info) : graph_(std::move(graph)), info_(std::move(info)) {
    id_ = graph_->add_endpoint(info_);
  }
  ~Endpoint() { graph_->remove_endpoint(id_); }

  Endpoint(const Endpoint&) = delete;
  Endpoint& operator=(const Endpoint&) = delete;

  const EndpointInfo& info() const { return info_; }
  std::uint64_t id() const { return id_; }

 protected:
  std::shared_ptr<Graph> graph_;
  EndpointInfo info_;
  std::uint64_t id_ = 0;
};

/// Keeps the newest `depth` messages and delivers them in order on the
/// owning participant's executor, one callback at a time.
template <typename T>
class Subscription : public detail::SubscriptionBase, public std::enable_shared_from_this<Subscription<T>> {
 public:
  using Callback = std::function<void(const T&)>;

  Subscription(QoS qos, Callback callback, std::weak_ptr<Executor> executor)
      : qos_(qos), callback_(std::move(callback)), executor_(std::move(executor)) {}

  const QoS& qos() const override { return qos_; }

  void deliver(const T& message) {
    bool schedule = false;
    {
      std::lock_guard lock(mutex_);
      if (pending_.size() >= std::max<std::size_t>(qos_.depth, 1)) {
        pending_.pop_front();
        ++overflowed_;
      }
      pending_.push_back(message);
      if (!draining_) draining_ = schedule = true;
    }
    if (!schedule) return;
    auto executor = executor_.lock();
    auto self = this->shared_from_this();
    if (!executor || !executor->post([self] { self->drain(); })) {
      std::lock_guard lock(mutex_);
      draining_ = false;
    }
  }

  std::uint64_t overflowed() const {
    std::lock_guard lock(mutex_);
    return overflowed_;
  }

 private:
  void drain() {
    while (true) {
      T message;
      {
        std::lock_guard lock(mutex_);
        if (pending_.empty()) {
          draining_ = false;
          return;
        }
        message = std::move(pending_.front());
        pending_.pop_front();
      }
      callback_(message);
    }
  }

  QoS qos_;
  Callback callback_;
  std::weak_ptr<Executor> executor_;
  mutable std::mutex mutex_;
  std::deque<T> pending_;
  bool draining_ = false;
  std::uint64_t overflowed_ = 0;
};

template <typename T>
class SubscriptionHandle : public Endpoint {
 public:
  SubscriptionHandle(std::shared_ptr<Graph> graph, EndpointInfo info, std::shared_ptr<Subscription<T>> sub)
      : Endpoint(std::move(graph), std::move(info)), sub_(std::move(sub)) {
    graph_->attach_subscription(id_, sub_);
  }
  const Subscription<T>& subscription() const { return *sub_; }

 private:
  std::shared_ptr<Subscription<T>> sub_;
};

template <typename T>
class Publisher : public Endpoint {
 public:
  using Endpoint::Endpoint;

  void publish(const T& message) const {
    for (const auto& sub : graph_->template subscribers<Subscription<T>>(info_.name, info_.qos)) sub->deliver(message);
    published_.fetch_add(1);
  }

  std::uint64_t published() const { return published_.load(); }

 private:
  mutable std::atomic<std::uint64_t> published_{0};
};

// Services --------------------------------------------------------------------

template <typename Srv>
class ServiceServer : public detail::ServerBase {
 public:
  using Handler = std::function<typename Srv::Response(const typename Srv::Request&)>;

  ServiceServer(Handler handler, std::weak_ptr<Executor> executor)
      : handler_(std::move(handler)), executor_(std::move(executor)) {}

  std::future<typename Srv::Response> dispatch(typename Srv::Request request) {
    auto promise = std::make_shared<std::promise<typename Srv::Response>>();
    auto future = promise->get_future();
    auto executor = executor_.lock();
    auto task = [handler = handler_, promise, request = std::move(request)] {
      try {
        promise->set_value(handler(request));
      } catch (...) {
        promise->set_exception(std::current_exception());
      }
    };
    if (!executor || !executor->post(std::move(task))) {
      throw Error(ErrorCode::kNodeUnreachable, "service server is shutting down");
    }
    return future;
  }

 private:
  Handler handler_;
  std::weak_ptr<Executor> executor_;
};

template <typename Srv>
class ServiceHandle : public Endpoint {
 public:
  ServiceHandle(std::shared_ptr<Graph> graph, EndpointInfo info, std::shared_ptr<ServiceServer<Srv>> server)
      : Endpoint(std::move(graph), std::move(info)), server_(std::move(server)) {
    graph_->attach_server(id_, info_.name, server_);
  }

 private:
  std::shared_ptr<ServiceServer<Srv>> server_;
};

template <typename Srv>
class ServiceClient {
 public:
  ServiceClient(std::shared_ptr<Graph> graph, std::string name) : graph_(std::move(graph)), name_(std::move(name)) {}

  bool service_ready() const { return graph_->template server<ServiceServer<Srv>>(name_, Srv::kTypeName) != nullptr; }

  bool wait_for_service(std::chrono::milliseconds timeout) const {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (!service_ready()) {
      if (std::chrono::steady_clock::now() >= deadline) return false;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    return true;
  }

  /// Throws NODE_UNREACHABLE without a server and TIMEOUT past the deadline.
  typename Srv::Response call(const typename Srv::Request& request, std::chrono::milliseconds timeout) const {
    auto server = graph_->template server<ServiceServer<Srv>>(name_, Srv::kTypeName);
    if (!server) throw Error(ErrorCode::kNodeUnreachable, "no server for " + name_);
    auto future = server->dispatch(request);
    if (future.wait_for(timeout) != std::future_status::ready) {
      throw Error(ErrorCode::kTimeout, name_ + " did not answer in time");
    }
    return future.get();
  }

  const std::string& name() const { return name_; }

 private:
  std::shared_ptr<Graph> graph_;
  std::string name_;
};

// Actions ---------------------------------------------------------------------

/// Server-side state of one goal, shared with the client's handle.
template <typename Act>
struct GoalState {
  std::uint64_t id = 0;
  CancellationToken cancel;
  std::promise<typename Act::Result> promise;
  std::shared_future<typename Act::Result> result{promise.get_future().share()};
};

template <typename Act>
class GoalHandle {
 public:
  explicit GoalHandle(std::shared_ptr<GoalState<Act>> state) : state_(std::move(state)) {}

  std::uint64_t id() const { return state_->id; }
  void cancel() const { state_->cancel.request(); }
  bool cancel_requested() const { return state_->cancel.requested(); }

  std::optional<typename Act::Result> wait(std::chrono::milliseconds timeout) const {
    if (state_->result.wait_for(timeout) != std::future_status::ready) return std::nullopt;
    return state_->result.get();
  }

 private:
  std::shared_ptr<GoalState<Act>> state_;
};

/// Each accepted goal runs on its own thread. Feedback callbacks run on that
/// thread, so a goal's feedback is delivered in emission order.
template <typename Act>
class ActionServer : public detail::ServerBase {
 public:
  using FeedbackFn = std::function<void(const typename Act::Feedback&)>;
  using Handler = std::function<typename Act::Result(const typename Act::Goal&, const FeedbackFn&,
                                                     const CancellationToken&)>;

  explicit ActionServer(Handler handler) : handler_(std::move(handler)) {}

  ~ActionServer() { join_all(); }

  GoalHandle<Act> accept(typename Act::Goal goal, FeedbackFn feedback) {
    auto state = std::make_shared<GoalState<Act>>();
    if (!feedback) feedback = [](const typename Act::Feedback&) {};
    std::lock_guard lock(mutex_);
    if (closed_) throw Error(ErrorCode::kNodeUnreachable, "action server is shutting down");
    state->id = ++next_goal_;
    reap();
    auto done = std::make_shared<std::atomic<bool>>(false);
    goals_.push_back({std::thread([this, state, done, goal = std::move(goal), feedback = std::move(feedback)] {
                        try {
                          state->promise.set_value(handler_(goal, feedback, state->cancel));
                        } catch (...) {
                          state->promise.set_exception(std::current_exception());
                        }
                        done->store(true);
                      }),
                      done});
    return GoalHandle<Act>(state);
  }

  void join_all() {
    std::list<Running> goals;
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
      goals.swap(goals_);
    }
    for (auto& g : goals) {
      if (g.thread.joinable()) g.thread.join();
    }
  }

 private:
  struct Running {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  void reap() {
    for (auto it = goals_.begin(); it != goals_.end();) {
      if (it->done->load()) {
        it->thread.join();
        it = goals_.erase(it);
      } else {
        ++it;
      }
    }
  }

  Handler handler_;
  std::mutex mutex_;
  std::list<Running> goals_;
  std::uint64_t next_goal_ = 0;
  bool closed_ = false;
};

template <typename Act>
class ActionHandle : public Endpoint {
 public:
  ActionHandle(std::shared_ptr<Graph> graph, EndpointInfo info, std::shared_ptr<ActionServer<Act>> server)
      : Endpoint(std::move(graph), std::move(info)), server_(std::move(server)) {
    graph_->attach_server(id_, info_.name, server_);
  }
  ~ActionHandle() { server_->join_all(); }

 private:
  std::shared_ptr<ActionServer<Act>> server_;
};

template <typename Act>
class ActionClient {
 public:
  ActionClient(std::shared_ptr<Graph> graph, std::string name) : graph_(std::move(graph)), name_(std::move(name)) {}

  bool server_ready() const { return graph_->template server<ActionServer<Act>>(name_, Act::kTypeName) != nullptr; }

  GoalHandle<Act> send_goal(typename Act::Goal goal,
                            typename ActionServer<Act>::FeedbackFn feedback = nullptr) const {
    auto server = graph_->template server<ActionServer<Act>>(name_, Act::kTypeName);
    if (!server) throw Error(ErrorCode::kNodeUnreachable, "no action server for " + name_);
    return server->accept(std::move(goal), std::move(feedback));
  }

 private:
  std::shared_ptr<Graph> graph_;
  std::string name_;
};

// Participant -----------------------------------------------------------------

/// A named node on the graph. Owns the executor its callbacks run on; destroy
/// it (or call shutdown()) before anything its callbacks reference.
class Participant {
 public:
  Participant(std::shared_ptr<Graph> graph, std::string name, std::size_t executor_threads = 1)
      : graph_(std::move(graph)), name_(std::move(name)), executor_(std::make_shared<Executor>(executor_threads)) {}

  ~Participant() { shutdown(); }

  void shutdown() { executor_->stop(); }

  const std::string& name() const { return name_; }
  const std::shared_ptr<Graph>& graph() const { return graph_; }
  std::string resolve(const std::string& topic) const { return resolve_name(topic, name_); }

  template <typename T>
  std::unique_ptr<Publisher<T>> create_publisher(const std::string& topic, QoS qos) {
    return std::make_unique<Publisher<T>>(graph_,
                                          EndpointInfo{resolve(topic), T::kTypeName, name_, EndpointKind::kPublisher, qos});
  }

  template <typename T>
  std::unique_ptr<SubscriptionHandle<T>> create_subscription(const std::string& topic, QoS qos,
                                                             typename Subscription<T>::Callback callback) {
    auto sub = std::make_shared<Subscription<T>>(qos, std::move(callback), executor_);
    return std::make_unique<SubscriptionHandle<T>>(
        graph_, EndpointInfo{resolve(topic), T::kTypeName, name_, EndpointKind::kSubscription, qos}, std::move(sub));
  }

  template <typename Srv>
  std::unique_ptr<ServiceHandle<Srv>> create_service(const std::string& name,
                                                     typename ServiceServer<Srv>::Handler handler) {
    auto server = std::make_shared<ServiceServer<Srv>>(std::move(handler), executor_);
    return std::make_unique<ServiceHandle<Srv>>(
        graph_, EndpointInfo{resolve(name), Srv::kTypeName, name_, EndpointKind::kServiceServer, QoS::reliable()},
        std::move(server));
  }

  template <typename Act>
  std::unique_ptr<ActionHandle<Act>> create_action_server(const std::string& name,
                                                          typename ActionServer<Act>::Handler handler) {
    auto server = std::make_shared<ActionServer<Act>>(std::move(handler));
    return std::make_unique<ActionHandle<Act>>(
        graph_, EndpointInfo{resolve(name), Act::kTypeName, name_, EndpointKind::kActionServer, QoS::reliable()},
        std::move(server));
  }

  template <typename Srv>
  ServiceClient<Srv> create_client(const std::string& name) const {
    return ServiceClient<Srv>(graph_, resolve(name));
  }

  template <typename Act>
  ActionClient<Act> create_action_client(const std::string& name) const {
    return ActionClient<Act>(graph_, resolve(name));
  }

 private:
  std::shared_ptr<Graph> graph_;
  std::string name_;
  std::shared_ptr<Executor> executor_;
};

}  // namespace florence2_bridge::graph
