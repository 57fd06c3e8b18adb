#pragma once

#include <atomic>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "florence2_bridge/backend_factory.hpp"
#include "florence2_bridge/engine.hpp"
#include "florence2_bridge/graph.hpp"
#include "florence2_bridge/image_conversion.hpp"
#include "florence2_bridge/messages.hpp"
#include "florence2_bridge/parameters.hpp"
#include "florence2_bridge/task_registry.hpp"

namespace florence2_bridge {

/// Graph names of the node's endpoints; `~/` is relative to the node name.
struct TopicBindings {
  std::string input_image = "/camera/image_raw";
  std::string results_json = "~/results_json";
  std::string detections = "~/detections";
  std::string annotated_image = "~/annotated_image";
  std::string service = "~/execute_task";
  std::string action = "~/execute_task_action";
};

struct NodeStats {
  EngineStats engine;
  std::uint64_t encoding_rejected = 0;
  std::uint64_t results_published = 0;
  std::uint64_t detections_published = 0;
  std::uint64_t annotated_published = 0;
};

inline nlohmann::json to_json(const NodeStats& s) {
  return {{"frames_received", s.engine.frames_received},
          {"frames_malformed", s.engine.frames_malformed},
          {"frames_dropped", s.engine.frames_dropped},
          {"encoding_rejected", s.encoding_rejected},
          {"continuous_served", s.engine.continuous_served},
          {"service_served", s.engine.service_served},
          {"action_served", s.engine.action_served},
          {"actions_canceled", s.engine.actions_canceled},
          {"failures", s.engine.failures},
          {"busy_rejections", s.engine.busy_rejections},
          {"results_published", s.results_published},
          {"detections_published", s.detections_published},
          {"annotated_published", s.annotated_published}};
}

/// Binds an Engine to the graph: conversion and delegation only.
class BridgeNode {
 public:
  /// Loads the backend described by `params` unless one is supplied.
  BridgeNode(std::shared_ptr<graph::Graph> graph, NodeParameters params, std::shared_ptr<Backend> backend = nullptr)
      : params_(std::move(params)) {
    params_.validate();
    bindings_.input_image = params_.image_topic;
    auto registry = params_.tasks_file.empty() ? TaskRegistry::builtin() : TaskRegistry::from_file(params_.tasks_file);
    if (!backend) backend = load_backend(params_.backend_config());

    participant_ = std::make_unique<graph::Participant>(std::move(graph), params_.node_name,
                                                        static_cast<std::size_t>(params_.queue_depth) + 2);
    results_pub_ = participant_->create_publisher<msg::String>(bindings_.results_json, graph::QoS::reliable());
    detections_pub_ =
        participant_->create_publisher<msg::Detection2DArray>(bindings_.detections, graph::QoS::reliable());
    annotated_pub_ = participant_->create_publisher<msg::Image>(bindings_.annotated_image, graph::QoS::reliable());

    auto sink = std::make_shared<GraphSink>(*this);
    engine_ = std::make_unique<Engine>(std::move(registry), std::move(backend), params_.engine_config(), sink);
    engine_->start();

    image_sub_ = participant_->create_subscription<msg::Image>(
        bindings_.input_image, graph::QoS::sensor_data(), [this](const msg::Image& m) { on_image(m); });
    service_ = participant_->create_service<msg::ExecuteTaskService>(
        bindings_.service, [this](const ExecuteTaskRequest& r) { return engine_->handle_service(r); });
    action_ = participant_->create_action_server<msg::ExecuteTaskAction>(
        bindings_.action,
        [this](const ExecuteTaskRequest& goal, const std::function<void(const ActionFeedback&)>& feedback,
               const CancellationToken& cancel) { return engine_->handle_action(goal, feedback, cancel); });

    spdlog::info("{} ready: model={} device={} precision={} image_topic={} continuous_task={}", params_.node_name,
                 engine_->backend().model_label(), engine_->backend().device().to_string(),
                 to_string(engine_->backend().precision()), participant_->resolve(bindings_.input_image),
                 params_.continuous_task.empty() ? "<none>" : params_.continuous_task);
  }

  ~BridgeNode() {
    engine_->stop();
    action_.reset();
    service_.reset();
    image_sub_.reset();
    participant_->shutdown();
  }

  BridgeNode(const BridgeNode&) = delete;
  BridgeNode& operator=(const BridgeNode&) = delete;

  const std::string& name() const { return params_.node_name; }
  const NodeParameters& parameters() const { return params_; }
  const TopicBindings& bindings() const { return bindings_; }
  const Engine& engine() const { return *engine_; }
  std::string resolve(const std::string& name) const { return participant_->resolve(name); }

  /// Static facts about the running node: model, device, precision, task.
  nlohmann::json info() const {
    return {{"node", params_.node_name},
            {"model", engine_->backend().model_label()},
            {"device", engine_->backend().device().to_string()},
            {"precision", std::string(to_string(engine_->backend().precision()))},
            {"continuous_task", params_.continuous_task}};
  }

  NodeStats stats() const {
    NodeStats s;
    s.engine = engine_->stats();
    s.encoding_rejected = encoding_rejected_.load();
    s.results_published = results_pub_->published();
    s.detections_published = detections_pub_->published();
    s.annotated_published = annotated_pub_->published();
    return s;
  }

 private:
  class GraphSink : public OutputSink {
   public:
    explicit GraphSink(BridgeNode& node) : node_(node) {}
    void publish_results_json(const std::string& json, const Stamp&) override {
      node_.results_pub_->publish(msg::String{json});
    }
    void publish_detections(const DetectionSet& detections) override {
      node_.detections_pub_->publish(msg::to_message(detections));
    }
    void publish_annotated(const RasterImage& image) override {
      node_.annotated_pub_->publish(convert_image_out(image));
    }

   private:
    BridgeNode& node_;
  };

  void on_image(const msg::Image& message) {
    RasterImage image;
    try {
      image = convert_image_in(message);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kUnsupportedEncoding) {
        encoding_rejected_++;
        spdlog::warn("rejecting frame: {}", e.what());
        return;
      }
      // Malformed buffers still reach the engine so they are counted there.
      image = RasterImage{message.width, message.height, PixelFormat::kRgb8, {}, message.header.stamp,
                          message.header.frame_id, false};
    }
    engine_->on_image(std::move(image));
  }

  NodeParameters params_;
  TopicBindings bindings_;
  std::unique_ptr<graph::Participant> participant_;
  std::unique_ptr<graph::Publisher<msg::String>> results_pub_;
  std::unique_ptr<graph::Publisher<msg::Detection2DArray>> detections_pub_;
  std::unique_ptr<graph::Publisher<msg::Image>> annotated_pub_;
  std::unique_ptr<Engine> engine_;
  std::unique_ptr<graph::SubscriptionHandle<msg::Image>> image_sub_;
  std::unique_ptr<graph::ServiceHandle<msg::ExecuteTaskService>> service_;
  std::unique_ptr<graph::ActionHandle<msg::ExecuteTaskAction>> action_;
  std::atomic<std::uint64_t> encoding_rejected_{0};
};

}  // namespace florence2_bridge
