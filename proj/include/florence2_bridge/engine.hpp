#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>

#include <spdlog/spdlog.h>

#include "florence2_bridge/annotate.hpp"
#include "florence2_bridge/backend.hpp"
#include "florence2_bridge/result_mapping.hpp"
#include "florence2_bridge/task_registry.hpp"
#include "florence2_interfaces/execute_task.hpp"
#include "florence2_interfaces/validation.hpp"

namespace florence2_bridge {

using florence2_interfaces::ActionFeedback;
using florence2_interfaces::ActionResult;
using florence2_interfaces::ExecuteTaskRequest;
using florence2_interfaces::ExecuteTaskResponse;
using florence2_interfaces::FeedbackStage;
using florence2_interfaces::GoalStatus;

inline Stamp now_stamp() {
  const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();
  return {ns / 1'000'000'000, static_cast<std::uint32_t>(ns % 1'000'000'000)};
}

/// Set-once cancellation flag shared between a goal and whoever cancels it.
class CancellationToken {
 public:
  CancellationToken() : flag_(std::make_shared<std::atomic<bool>>(false)) {}

  void request() const { flag_->store(true); }
  bool requested() const { return flag_->load(); }

 private:
  std::shared_ptr<std::atomic<bool>> flag_;
};

/// Most recent frame from the input stream. Single writer, snapshot readers.
class LatestImageCache {
 public:
  struct Snapshot {
    std::shared_ptr<const RasterImage> image;
    std::uint64_t seq = 0;
  };

  std::uint64_t store(std::shared_ptr<const RasterImage> image) {
    std::lock_guard lock(mutex_);
    current_.image = std::move(image);
    return ++current_.seq;
  }

  Snapshot snapshot() const {
    std::lock_guard lock(mutex_);
    return current_;
  }

  bool populated() const {
    std::lock_guard lock(mutex_);
    return current_.image != nullptr;
  }

 private:
  mutable std::mutex mutex_;
  Snapshot current_;
};

/// Where the engine delivers results. Implementations must be thread-safe.
class OutputSink {
 public:
  virtual ~OutputSink() = default;
  virtual void publish_results_json(const std::string& json, const Stamp& stamp) = 0;
  virtual void publish_detections(const DetectionSet& detections) = 0;
  virtual void publish_annotated(const RasterImage& image) = 0;
};

class NullSink : public OutputSink {
 public:
  void publish_results_json(const std::string&, const Stamp&) override {}
  void publish_detections(const DetectionSet&) override {}
  void publish_annotated(const RasterImage&) override {}
};

struct EngineConfig {
  /// Task run on every incoming frame; unset disables continuous mode.
  std::optional<std::string> continuous_task;
  std::string continuous_text;
  bool publish_annotated = true;
  /// Pending on-demand jobs beyond this are rejected with BUSY.
  std::size_t queue_depth = 8;
  AnnotationStyle annotation;
};

struct EngineStats {
  std::uint64_t frames_received = 0;
  std::uint64_t frames_malformed = 0;
  std::uint64_t frames_dropped = 0;
  std::uint64_t continuous_served = 0;
  std::uint64_t service_served = 0;
  std::uint64_t action_served = 0;
  std::uint64_t actions_canceled = 0;
  std::uint64_t failures = 0;
  std::uint64_t busy_rejections = 0;
};

/// Arbitration for the single inference lane. Not synchronized; the owner
/// holds its own lock.
///
/// On-demand jobs are FIFO up to `depth` and always dequeue before continuous
/// work. Continuous work never queues: it is accepted only when the lane is
/// idle with nothing pending, and rejected (dropped) otherwise.
template <typename Job>
class LaneScheduler {
 public:
  explicit LaneScheduler(std::size_t depth) : depth_(depth) {}

  bool push_on_demand(Job job) {
    if (on_demand_.size() >= depth_) return false;
    on_demand_.push_back(std::move(job));
    return true;
  }

  bool offer_continuous(Job job) {
    if (busy_ || !on_demand_.empty() || continuous_) return false;
    continuous_ = std::move(job);
    return true;
  }

  bool has_work() const { return !on_demand_.empty() || continuous_.has_value(); }
  bool busy() const { return busy_; }
  std::size_t pending_on_demand() const { return on_demand_.size(); }

  /// Takes the next job and marks the lane busy until done().
  std::optional<Job> next() {
    std::optional<Job> job;
    if (!on_demand_.empty()) {
      job = std::move(on_demand_.front());
      on_demand_.pop_front();
    } else if (continuous_) {
      job = std::move(continuous_);
      continuous_.reset();
    }
    busy_ = job.has_value();
    return job;
  }

  void done() { busy_ = false; }

  /// Removes all pending work; returns the on-demand jobs.
  std::deque<Job> drain() {
    continuous_.reset();
    return std::exchange(on_demand_, {});
  }

 private:
  std::size_t depth_;
  std::deque<Job> on_demand_;
  std::optional<Job> continuous_;
  bool busy_ = false;
};

using FeedbackSink = std::function<void(const ActionFeedback&)>;

/// Executes tasks for all three interaction modes over one inference lane.
///
/// On-demand (service/action) jobs queue FIFO up to queue_depth and always run
/// before continuous work. A continuous frame only starts when the lane is idle
/// and nothing is queued; otherwise it is dropped.
class Engine {
 public:
  Engine(TaskRegistry registry, std::shared_ptr<Backend> backend, EngineConfig config,
         std::shared_ptr<OutputSink> sink = std::make_shared<NullSink>())
      : registry_(std::move(registry)), backend_(std::move(backend)), config_(std::move(config)), sink_(std::move(sink)) {
    if (!backend_) throw Error(ErrorCode::kInvalidConfig, "engine needs a backend");
    if (config_.continuous_task && !config_.continuous_task->empty()) {
      auto spec = registry_.lookup(*config_.continuous_task);
      if (!spec) throw Error(ErrorCode::kUnknownTask, "continuous_task " + *config_.continuous_task);
      continuous_prompt_ = build_prompt(*spec, config_.continuous_text).text;
      continuous_spec_ = *spec;
    }
  }

  ~Engine() { stop(); }

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  void start() {
    std::lock_guard lock(mutex_);
    if (running_) return;
    running_ = true;
    worker_ = std::thread([this] { run_lane(); });
  }

  /// Finishes the job on the lane; queued jobs fail with BUSY.
  void stop() {
    std::deque<Job> abandoned;
    {
      std::lock_guard lock(mutex_);
      if (!running_) return;
      running_ = false;
      abandoned = lanes_.drain();
    }
    wake_.notify_all();
    if (worker_.joinable()) worker_.join();
    for (auto& job : abandoned) job.abandon();
  }

  bool running() const {
    std::lock_guard lock(mutex_);
    return running_;
  }

  void on_image(RasterImage image) {
    stats_.frames_received++;
    if (!image.well_formed()) {
      stats_.frames_malformed++;
      spdlog::warn("dropping malformed frame {}x{} ({} bytes)", image.width, image.height, image.data.size());
      return;
    }
    auto frame = std::make_shared<const RasterImage>(std::move(image));
    cache_.store(frame);
    if (!continuous_spec_) return;

    std::unique_lock lock(mutex_);
    Job job{[this, frame] { return run_continuous(frame); }, [] {}};
    if (!running_ || !lanes_.offer_continuous(std::move(job))) {
      stats_.frames_dropped++;
      return;
    }
    lock.unlock();
    wake_.notify_one();
  }

  ExecuteTaskResponse handle_service(const ExecuteTaskRequest& request) {
    auto prepared = prepare(request);
    if (!prepared.error.empty()) return fail(prepared.error);
    std::future<BackendResult> generation;
    try {
      generation = submit(prepared, nullptr, nullptr);
    } catch (const Error& e) {
      return fail(e.what());
    }
    try {
      auto response = finish(prepared, generation.get());
      stats_.service_served++;
      return response;
    } catch (const std::exception& e) {
      stats_.failures++;
      return fail(e.what());
    }
  }

  /// Feedback stages are emitted in order; cancellation is observed before
  /// preprocessing, before generation starts, and after generation returns.
  /// A running generation is never interrupted.
  ActionResult handle_action(const ExecuteTaskRequest& goal, const FeedbackSink& feedback,
                             const CancellationToken& cancel) {
    const auto start = std::chrono::steady_clock::now();
    auto emit = [&](FeedbackStage stage) {
      if (feedback) {
        feedback({stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
      }
    };
    auto canceled = [this] {
      stats_.actions_canceled++;
      return ActionResult{GoalStatus::kCanceled,
                          ExecuteTaskResponse::failure(std::string(to_string(ErrorCode::kCanceled)))};
    };
    auto aborted = [this](const std::string& message) { return ActionResult{GoalStatus::kAborted, fail(message)}; };

    emit(FeedbackStage::kReceived);
    if (cancel.requested()) return canceled();

    emit(FeedbackStage::kPreprocessing);
    auto prepared = prepare(goal);
    if (!prepared.error.empty()) return aborted(prepared.error);
    if (cancel.requested()) return canceled();

    auto skipped = std::make_shared<std::atomic<bool>>(false);
    std::function<bool()> gate = [cancel, skipped] {
      if (cancel.requested()) {
        skipped->store(true);
        return false;
      }
      return true;
    };
    std::function<void()> on_start = [&emit] { emit(FeedbackStage::kInferenceRunning); };

    std::future<BackendResult> generation;
    try {
      generation = submit(prepared, std::move(gate), std::move(on_start));
    } catch (const Error& e) {
      return aborted(e.what());
    }
    std::optional<BackendResult> result;
    std::string error;
    try {
      result = generation.get();
    } catch (const std::exception& e) {
      error = e.what();
    }
    if (skipped->load() || cancel.requested()) return canceled();
    if (!result) {
      stats_.failures++;
      return aborted(error);
    }

    emit(FeedbackStage::kPostprocessing);
    try {
      auto response = finish(prepared, std::move(*result));
      stats_.action_served++;
      return {GoalStatus::kSucceeded, std::move(response)};
    } catch (const std::exception& e) {
      return aborted(e.what());
    }
  }

  EngineStats stats() const {
    EngineStats s;
    s.frames_received = stats_.frames_received.load();
    s.frames_malformed = stats_.frames_malformed.load();
    s.frames_dropped = stats_.frames_dropped.load();
    s.continuous_served = stats_.continuous_served.load();
    s.service_served = stats_.service_served.load();
    s.action_served = stats_.action_served.load();
    s.actions_canceled = stats_.actions_canceled.load();
    s.failures = stats_.failures.load();
    s.busy_rejections = stats_.busy_rejections.load();
    return s;
  }

  const LatestImageCache& cache() const { return cache_; }
  const TaskRegistry& registry() const { return registry_; }
  const Backend& backend() const { return *backend_; }
  const EngineConfig& config() const { return config_; }

 private:
  /// `run` occupies the lane; the delivery step it returns runs after the
  /// lane is released.
  struct Job {
    std::function<std::function<void()>()> run;
    std::function<void()> abandon;
  };

  struct Prepared {
    std::string error;
    TaskSpec spec;
    std::string prompt;
    std::shared_ptr<const RasterImage> image;
    Stamp stamp;
  };

  struct AtomicStats {
    std::atomic<std::uint64_t> frames_received{0}, frames_malformed{0}, frames_dropped{0},
        continuous_served{0}, service_served{0}, action_served{0}, actions_canceled{0}, failures{0},
        busy_rejections{0};
  };

  static ExecuteTaskResponse fail(const std::string& message) { return ExecuteTaskResponse::failure(message); }

  Prepared prepare(const ExecuteTaskRequest& request) const {
    Prepared p;
    const Stamp received = now_stamp();
    auto verdict = florence2_interfaces::validate_request(request, registry_, cache_.populated());
    if (!verdict) {
      p.error = std::string(to_string(florence2_interfaces::to_error_code(*verdict.rejection)));
      return p;
    }
    p.spec = *registry_.lookup(request.task_token);
    if (request.image) {
      p.image = std::make_shared<const RasterImage>(*request.image);
    } else {
      p.image = cache_.snapshot().image;
      if (!p.image) {
        p.error = std::string(to_string(ErrorCode::kNoImageAvailable));
        return p;
      }
    }
    if (!p.image->well_formed()) {
      p.error = std::string(to_string(ErrorCode::kMalformedImage));
      return p;
    }
    auto prompt = build_prompt(p.spec, request.text_input);
    if (prompt.warning) spdlog::warn("{}", *prompt.warning);
    p.prompt = std::move(prompt.text);
    p.stamp = p.image->stamp.is_zero() ? received : p.image->stamp;
    return p;
  }

  /// Queues a generation on the lane. `gate` may veto it right before it
  /// starts; `on_start` runs on the lane just before infer().
  std::future<BackendResult> submit(const Prepared& p, std::function<bool()> gate,
                                    std::function<void()> on_start) {
    auto promise = std::make_shared<std::promise<BackendResult>>();
    auto future = promise->get_future();
    Job job;
    job.run = [this, promise, spec = p.spec, prompt = p.prompt, image = p.image, gate = std::move(gate),
               on_start = std::move(on_start)]() -> std::function<void()> {
      if (gate && !gate()) {
        return [promise] { promise->set_exception(std::make_exception_ptr(Error(ErrorCode::kCanceled, ""))); };
      }
      if (on_start) on_start();
      try {
        return [promise, result = std::make_shared<BackendResult>(backend_->infer(prompt, *image, spec))] {
          promise->set_value(std::move(*result));
        };
      } catch (...) {
        return [promise, error = std::current_exception()] { promise->set_exception(error); };
      }
    };
    job.abandon = [promise] {
      promise->set_exception(std::make_exception_ptr(Error(ErrorCode::kBusy, "engine stopped")));
    };
    {
      std::lock_guard lock(mutex_);
      if (!running_) throw Error(ErrorCode::kBusy, "engine not running");
      if (!lanes_.push_on_demand(std::move(job))) {
        stats_.busy_rejections++;
        throw Error(ErrorCode::kBusy, "on-demand queue full");
      }
    }
    wake_.notify_one();
    return future;
  }

  ExecuteTaskResponse finish(const Prepared& p, BackendResult result) {
    auto doc = to_result_document(p.spec, result, p.stamp, backend_->model_label());
    ExecuteTaskResponse response;
    response.success = true;
    response.results_json = florence2_interfaces::serialize_result(doc);
    response.inference_time = result.inference_time;
    response.detections = publish(doc, p.spec, *p.image, response.results_json);
    return response;
  }

  std::optional<DetectionSet> publish(const ResultDocument& doc, const TaskSpec& spec, const RasterImage& image,
                                      const std::string& json) {
    sink_->publish_results_json(json, doc.stamp);
    if (spec.output_kind != OutputKind::kBoxesLabels) return std::nullopt;
    auto detections = to_detections(doc, image.frame_id);
    sink_->publish_detections(detections);
    if (config_.publish_annotated) {
      auto annotated = render_annotations(image, detections, config_.annotation);
      annotated.stamp = doc.stamp;
      sink_->publish_annotated(annotated);
    }
    return detections;
  }

  std::function<void()> run_continuous(const std::shared_ptr<const RasterImage>& frame) {
    try {
      auto result = backend_->infer(continuous_prompt_, *frame, *continuous_spec_);
      const Stamp stamp = frame->stamp.is_zero() ? now_stamp() : frame->stamp;
      auto doc = std::make_shared<ResultDocument>(
          to_result_document(*continuous_spec_, result, stamp, backend_->model_label()));
      return [this, frame, doc] {
        try {
          publish(*doc, *continuous_spec_, *frame, florence2_interfaces::serialize_result(*doc));
          stats_.continuous_served++;
        } catch (const std::exception& e) {
          stats_.failures++;
          spdlog::warn("continuous {} failed: {}", continuous_spec_->token, e.what());
        }
      };
    } catch (const std::exception& e) {
      stats_.failures++;
      spdlog::warn("continuous {} failed: {}", continuous_spec_->token, e.what());
    }
    return nullptr;
  }

  void run_lane() {
    std::unique_lock lock(mutex_);
    while (true) {
      wake_.wait(lock, [this] { return !running_ || lanes_.has_work(); });
      if (!running_) return;
      auto job = lanes_.next();
      lock.unlock();
      auto deliver = job->run();
      lock.lock();
      lanes_.done();
      if (!deliver) continue;
      lock.unlock();
      deliver();
      lock.lock();
    }
  }

  TaskRegistry registry_;
  std::shared_ptr<Backend> backend_;
  EngineConfig config_;
  std::shared_ptr<OutputSink> sink_;
  std::optional<TaskSpec> continuous_spec_;
  std::string continuous_prompt_;

  LatestImageCache cache_;
  AtomicStats stats_;

  mutable std::mutex mutex_;
  std::condition_variable wake_;
  LaneScheduler<Job> lanes_{config_.queue_depth};
  bool running_ = false;
  std::thread worker_;
};

}  // namespace florence2_bridge
