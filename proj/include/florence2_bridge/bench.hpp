#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/utsname.h>

#include <nlohmann/json.hpp>
#include <opencv2/core/version.hpp>
#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

#include "florence2_bridge/client.hpp"
#include "florence2_bridge/graph.hpp"
#include "florence2_bridge/image_conversion.hpp"
#include "florence2_bridge/messages.hpp"
#include "florence2_bridge/node.hpp"
#include "florence2_bridge/parameters.hpp"

namespace florence2_bridge::bench {

struct StreamConfig {
  /// Directory of still images replayed in name order; empty selects the
  /// synthetic generator.
  std::string directory;
  std::uint32_t width = 640;
  std::uint32_t height = 480;
  /// Distinct synthetic frames; the sequence is cycled.
  std::size_t frames = 16;
  std::uint32_t seed = 1;
  /// 0 publishes the next frame as soon as the previous output is seen.
  double rate_hz = 0.0;
};

struct BenchConfig {
  std::string task_token = "<OD>";
  std::string text_input;
  std::string model = "microsoft/Florence-2-base";
  std::string model_revision;
  std::string model_cache;
  std::string device = "auto";
  std::string precision = "auto";
  int mock_latency_ms = 0;
  StreamConfig stream;
  std::size_t warmup_frames = 20;
  std::size_t measure_frames = 100;
  std::size_t window = 10;
  double startup_timeout_s = 120.0;
  /// Gateway of an already running node; empty runs the node in-process.
  std::string node_url;
  std::string node_name = "florence2_node";
  /// Replaces the detected device description in the report.
  std::string device_label;
  std::string output;

  void validate() const {
    if (window < 1) throw Error(ErrorCode::kInvalidConfig, "window must be >= 1");
    if (measure_frames < window) throw Error(ErrorCode::kInvalidConfig, "measure_frames must be >= window");
    if (task_token.empty()) throw Error(ErrorCode::kInvalidConfig, "task must not be empty");
    if (startup_timeout_s <= 0) throw Error(ErrorCode::kInvalidConfig, "startup_timeout_s must be positive");
    if (stream.rate_hz < 0) throw Error(ErrorCode::kInvalidConfig, "stream.rate_hz must be >= 0");
  }

  NodeParameters node_parameters() const {
    NodeParameters p;
    p.node_name = node_name;
    p.model = model;
    p.model_revision = model_revision;
    p.model_cache = model_cache;
    p.device = device;
    p.precision = precision;
    p.mock_latency_ms = mock_latency_ms;
    p.continuous_task = task_token;
    p.continuous_text = text_input;
    p.publish_annotated = false;
    return p;
  }
};

inline BenchConfig load_config(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kInvalidConfig, path.string() + ": " + e.what());
  }
  BenchConfig c;
  auto read = [&](const YAML::Node& node, const char* key, auto& field) {
    if (node[key]) {
      try {
        field = node[key].as<std::decay_t<decltype(field)>>();
      } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::kInvalidConfig, std::string("bench config key '") + key + "': " + e.what());
      }
    }
  };
  read(root, "task", c.task_token);
  read(root, "text", c.text_input);
  read(root, "model", c.model);
  read(root, "model_revision", c.model_revision);
  read(root, "model_cache", c.model_cache);
  read(root, "device", c.device);
  read(root, "precision", c.precision);
  read(root, "mock_latency_ms", c.mock_latency_ms);
  read(root, "warmup_frames", c.warmup_frames);
  read(root, "measure_frames", c.measure_frames);
  read(root, "window", c.window);
  read(root, "startup_timeout_s", c.startup_timeout_s);
  read(root, "node_url", c.node_url);
  read(root, "node_name", c.node_name);
  read(root, "device_label", c.device_label);
  read(root, "output", c.output);
  if (auto s = root["stream"]) {
    read(s, "directory", c.stream.directory);
    read(s, "width", c.stream.width);
    read(s, "height", c.stream.height);
    read(s, "frames", c.stream.frames);
    read(s, "seed", c.stream.seed);
    read(s, "rate_hz", c.stream.rate_hz);
  }
  c.validate();
  return c;
}

// Stream -----------------------------------------------------------------------

/// The replayed sequence. Frames are restamped when published.
inline std::vector<msg::Image> load_stream(const StreamConfig& s) {
  std::vector<msg::Image> frames;
  if (!s.directory.empty()) {
    std::vector<std::filesystem::path> files;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(s.directory, ec)) {
      auto ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (entry.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp")) {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) frames.push_back(convert_image_out(load_image_file(f)));
    if (frames.empty()) throw Error(ErrorCode::kStreamEmpty, "no images in '" + s.directory + "'");
    return frames;
  }
  if (s.frames == 0 || s.width == 0 || s.height == 0) {
    throw Error(ErrorCode::kStreamEmpty, "synthetic stream has no frames");
  }
  std::mt19937 rng(s.seed);
  for (std::size_t i = 0; i < s.frames; ++i) {
    msg::Image m;
    m.width = s.width;
    m.height = s.height;
    m.encoding = "rgb8";
    m.step = s.width * 3;
    m.data.resize(static_cast<std::size_t>(m.step) * s.height);
    for (auto& b : m.data) b = static_cast<std::uint8_t>(rng() & 0xFF);
    m.header.frame_id = "bench";
    frames.push_back(std::move(m));
  }
  return frames;
}

// Statistics -------------------------------------------------------------------

struct FpsStats {
  double fps_min = 0;
  double fps_avg = 0;
  double fps_max = 0;
  std::size_t windows = 0;
};

/// `times` are completion times in seconds; times[0] is the anchor (the last
/// warmup completion). Window k spans completions k+1..k+window.
inline FpsStats window_fps(const std::vector<double>& times, std::size_t window) {
  if (window < 1 || times.size() < window + 1) {
    throw Error(ErrorCode::kInvalidConfig, "not enough completions for one window");
  }
  std::vector<double> fps;
  for (std::size_t k = 0; k + window < times.size(); ++k) {
    const double span = times[k + window] - times[k];
    fps.push_back(span > 0 ? static_cast<double>(window) / span : 0.0);
  }
  FpsStats s;
  s.windows = fps.size();
  s.fps_min = *std::min_element(fps.begin(), fps.end());
  s.fps_max = *std::max_element(fps.begin(), fps.end());
  s.fps_avg = std::accumulate(fps.begin(), fps.end(), 0.0) / static_cast<double>(fps.size());
  return s;
}

// Report -----------------------------------------------------------------------

struct BenchReport {
  double fps_min = 0;
  double fps_avg = 0;
  double fps_max = 0;
  std::size_t frames_processed = 0;
  std::size_t frames_dropped = 0;
  std::string device;
  std::string model_id;
  std::string task;
  nlohmann::json environment = nlohmann::json::object();
};

inline nlohmann::json to_json(const BenchReport& r) {
  return {{"fps_min", r.fps_min},
          {"fps_avg", r.fps_avg},
          {"fps_max", r.fps_max},
          {"frames_processed", r.frames_processed},
          {"frames_dropped", r.frames_dropped},
          {"device", r.device},
          {"model_id", r.model_id},
          {"task", r.task},
          {"environment", r.environment}};
}

inline BenchReport report_from_json(const nlohmann::json& j) {
  BenchReport r;
  try {
    r.fps_min = j.at("fps_min").get<double>();
    r.fps_avg = j.at("fps_avg").get<double>();
    r.fps_max = j.at("fps_max").get<double>();
    r.frames_processed = j.at("frames_processed").get<std::size_t>();
    r.frames_dropped = j.value("frames_dropped", std::size_t{0});
    r.device = j.at("device").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    r.task = j.value("task", std::string("<OD>"));
    r.environment = j.value("environment", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("bench report: ") + e.what());
  }
  return r;
}

inline BenchReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidConfig, "cannot read " + path.string());
  try {
    return report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

namespace detail {

inline std::string read_first_line(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

inline std::string cpu_model() {
  std::ifstream in("/proc/cpuinfo");
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("model name", 0) == 0) return trim(line.substr(line.find(':') + 1));
  }
  return "unknown cpu";
}

inline std::string gpu_model(int index) {
  std::error_code ec;
  std::vector<std::filesystem::path> gpus;
  for (const auto& e : std::filesystem::directory_iterator("/proc/driver/nvidia/gpus", ec)) gpus.push_back(e.path());
  std::sort(gpus.begin(), gpus.end());
  if (index < 0 || static_cast<std::size_t>(index) >= gpus.size()) return "unknown gpu";
  std::ifstream in(gpus[static_cast<std::size_t>(index)] / "information");
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("Model:", 0) == 0) return trim(line.substr(6));
  }
  return "unknown gpu";
}

}  // namespace detail

/// Host facts recorded with every report.
inline nlohmann::json environment_metadata() {
  nlohmann::json env;
  utsname u{};
  if (uname(&u) == 0) {
    env["os"] = std::string(u.sysname) + " " + u.release;
    env["machine"] = u.machine;
  }
  env["cpu"] = detail::cpu_model();
  const auto driver = detail::read_first_line("/proc/driver/nvidia/version");
  env["nvidia_driver"] = driver.empty() ? "none" : driver;
  env["opencv"] = CV_VERSION;
  env["compiler"] = std::string("gcc ") + __VERSION__;
  return env;
}

inline std::string describe_device(const std::string& device) {
  if (device.rfind("cuda:", 0) == 0) return device + " (" + detail::gpu_model(std::stoi(device.substr(5))) + ")";
  return device + " (" + detail::cpu_model() + ")";
}

// Transport --------------------------------------------------------------------

/// How the harness reaches the node: publish frames, observe outputs.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void publish(const msg::Image& frame) = 0;
  /// Completion times (steady seconds) observed since the previous call,
  /// waiting up to `wait` for at least one.
  virtual std::vector<double> collect(std::chrono::milliseconds wait) = 0;
  virtual nlohmann::json node_info() = 0;
};

inline double steady_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

/// Runs the node inside the harness process on a private graph.
class InProcessTransport : public Transport {
 public:
  explicit InProcessTransport(const BenchConfig& config, std::shared_ptr<Backend> backend = nullptr)
      : graph_(graph::Graph::create()),
        node_(std::make_unique<BridgeNode>(graph_, config.node_parameters(), std::move(backend))),
        participant_(graph_, "florence2_bench", 1) {
    publisher_ = participant_.create_publisher<msg::Image>(node_->bindings().input_image, graph::QoS::sensor_data());
    results_ = participant_.create_subscription<msg::String>(
        node_->resolve(node_->bindings().results_json), graph::QoS::reliable(1000), [this](const msg::String&) {
          {
            std::lock_guard lock(mutex_);
            pending_.push_back(steady_seconds());
          }
          cv_.notify_all();
        });
  }

  ~InProcessTransport() override {
    results_.reset();
    node_.reset();
    participant_.shutdown();
  }

  void publish(const msg::Image& frame) override { publisher_->publish(frame); }

  std::vector<double> collect(std::chrono::milliseconds wait) override {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, wait, [&] { return !pending_.empty(); });
    return std::exchange(pending_, {});
  }

  nlohmann::json node_info() override { return node_->info(); }

 private:
  std::shared_ptr<graph::Graph> graph_;
  std::unique_ptr<BridgeNode> node_;
  graph::Participant participant_;
  std::unique_ptr<graph::Publisher<msg::Image>> publisher_;
  std::unique_ptr<graph::SubscriptionHandle<msg::String>> results_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<double> pending_;
};

/// Drives a node in another process through its gateway. Completion times
/// are stamped by the gateway on the same host clock.
class RemoteTransport : public Transport {
 public:
  RemoteTransport(const std::string& url, const std::string& node_name, const std::string& image_topic)
      : client_(url), topic_(image_topic) {
    subscription_ = client_.subscribe<msg::String>("/" + node_name + "/results_json", graph::QoS::reliable(1000));
  }

  ~RemoteTransport() override {
    try {
      client_.unsubscribe(subscription_);
    } catch (const Error&) {
    }
  }

  void publish(const msg::Image& frame) override { client_.publish(topic_, frame, graph::QoS::sensor_data()); }

  std::vector<double> collect(std::chrono::milliseconds wait) override {
    std::vector<double> out;
    for (const auto& m : client_.poll<msg::String>(subscription_, next_, wait)) out.push_back(m.t);
    return out;
  }

  nlohmann::json node_info() override { return client_.stats(); }

 private:
  GatewayClient client_;
  std::string topic_;
  std::uint64_t subscription_ = 0;
  std::uint64_t next_ = 0;
};

// Harness ----------------------------------------------------------------------

/// Replays the stream through the node's continuous mode. Warmup completions
/// are discarded; the last one anchors the first measurement window.
inline BenchReport run_bench(const BenchConfig& config, Transport& transport) {
  config.validate();
  const auto frames = load_stream(config.stream);
  // Completion index of the anchor: the last warmup output, or the first
  // output when there is no warmup.
  const std::size_t anchor = std::max<std::size_t>(config.warmup_frames, 1) - 1;
  const std::size_t needed = anchor + 1 + config.measure_frames;
  const bool lock_step = config.stream.rate_hz <= 0;
  const auto period = lock_step ? std::chrono::steady_clock::duration::zero()
                                : std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                      std::chrono::duration<double>(1.0 / config.stream.rate_hz));

  std::size_t published = 0;
  std::size_t published_at_anchor = 0;
  std::vector<double> completions;
  auto publish_next = [&] {
    msg::Image frame = frames[published % frames.size()];
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    frame.header.stamp.sec = static_cast<std::int32_t>(std::chrono::duration_cast<std::chrono::seconds>(now).count());
    frame.header.stamp.nanosec = static_cast<std::uint32_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(now % std::chrono::seconds(1)).count());
    transport.publish(frame);
    ++published;
  };

  // Startup: repeat the first frame until the node answers.
  const auto startup_deadline =
      std::chrono::steady_clock::now() + std::chrono::duration<double>(config.startup_timeout_s);
  while (completions.empty()) {
    if (std::chrono::steady_clock::now() > startup_deadline) {
      throw Error(ErrorCode::kNodeNotProcessing,
                  "no output within " + std::to_string(config.startup_timeout_s) + " s of the first frame");
    }
    publish_next();
    auto got = transport.collect(std::chrono::milliseconds(lock_step ? 500 : 100));
    completions.insert(completions.end(), got.begin(), got.end());
  }

  auto stall_deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(config.startup_timeout_s);
  auto next_publish = std::chrono::steady_clock::now();
  if (completions.size() > anchor) published_at_anchor = published;
  while (completions.size() < needed) {
    const auto before = completions.size();
    std::vector<double> got;
    if (lock_step) {
      publish_next();
      got = transport.collect(std::chrono::milliseconds(1000));
    } else {
      const auto now = std::chrono::steady_clock::now();
      if (now >= next_publish) {
        publish_next();
        next_publish += period;
        if (next_publish < now) next_publish = now + period;
      }
      const auto wait =
          std::chrono::duration_cast<std::chrono::milliseconds>(next_publish - std::chrono::steady_clock::now());
      got = transport.collect(std::max(wait, std::chrono::milliseconds(0)));
    }
    completions.insert(completions.end(), got.begin(), got.end());
    if (completions.size() != before) {
      stall_deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(config.startup_timeout_s);
      if (before <= anchor && completions.size() > anchor) published_at_anchor = published;
    } else if (std::chrono::steady_clock::now() > stall_deadline) {
      throw Error(ErrorCode::kNodeNotProcessing, "node stopped producing outputs after " +
                                                     std::to_string(completions.size()) + " completions");
    }
  }

  std::vector<double> times(completions.begin() + static_cast<std::ptrdiff_t>(anchor),
                            completions.begin() + static_cast<std::ptrdiff_t>(needed));
  const auto stats = window_fps(times, config.window);

  const auto info = transport.node_info();
  BenchReport report;
  report.fps_min = stats.fps_min;
  report.fps_avg = stats.fps_avg;
  report.fps_max = stats.fps_max;
  report.frames_processed = config.measure_frames;
  const std::size_t published_measured = published - published_at_anchor;
  report.frames_dropped = published_measured > config.measure_frames ? published_measured - config.measure_frames : 0;
  report.model_id = info.value("model", config.model);
  report.device = config.device_label.empty() ? describe_device(info.value("device", std::string("cpu")))
                                              : config.device_label;
  report.task = config.task_token;
  report.environment = environment_metadata();
  report.environment["precision"] = info.value("precision", std::string("unknown"));
  report.environment["stream"] = config.stream.directory.empty()
                                     ? nlohmann::json{{"synthetic", {{"width", config.stream.width},
                                                                     {"height", config.stream.height},
                                                                     {"frames", config.stream.frames},
                                                                     {"seed", config.stream.seed}}}}
                                     : nlohmann::json{{"directory", config.stream.directory}};
  report.environment["rate_hz"] = config.stream.rate_hz;
  report.environment["warmup_frames"] = config.warmup_frames;
  report.environment["window"] = config.window;
  spdlog::info("bench {} on {}: fps min/avg/max = {:.2f}/{:.2f}/{:.2f} over {} windows", report.model_id,
               report.device, report.fps_min, report.fps_avg, report.fps_max, stats.windows);
  return report;
}

inline BenchReport run_bench(const BenchConfig& config) {
  if (!config.node_url.empty()) {
    auto p = config.node_parameters();
    RemoteTransport transport(config.node_url, config.node_name, p.image_topic);
    return run_bench(config, transport);
  }
  InProcessTransport transport(config);
  return run_bench(config, transport);
}

// Table ------------------------------------------------------------------------

struct Triplet {
  double min, avg, max;
};

struct ReferenceRow {
  std::string device;
  /// Substring that identifies comparable hardware in a device description.
  std::string match;
  Triplet base;
  Triplet large;
};

/// Published Florence-2 object detection throughput (FPS min/avg/max).
inline const std::vector<ReferenceRow>& reference_rows() {
  static const std::vector<ReferenceRow> rows = {
      {"GTX 1060 Mobile (80 W)", "1060", {5.50, 5.81, 5.99}, {2.44, 2.50, 2.56}},
      {"RTX 3060 Mobile (80 W)", "3060", {9.23, 9.75, 10.1}, {4.05, 4.21, 4.29}},
      {"RTX 3080 Ti Desktop", "3080 Ti", {25.3, 26.6, 27.5}, {11.1, 11.5, 11.7}},
  };
  return rows;
}

inline bool is_large_model(std::string model_id) {
  std::transform(model_id.begin(), model_id.end(), model_id.begin(), [](unsigned char c) { return std::tolower(c); });
  return model_id.find("large") != std::string::npos;
}

struct Table {
  std::string text;
  std::string csv;
  std::vector<std::string> advisories;
};

namespace detail {

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string triplet_text(const std::optional<Triplet>& t) {
  return t ? fmt2(t->min) + " / " + fmt2(t->avg) + " / " + fmt2(t->max) : "-";
}

inline std::string triplet_csv(const std::optional<Triplet>& t) {
  return t ? fmt2(t->min) + "," + fmt2(t->avg) + "," + fmt2(t->max) : ",,";
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace detail

/// One row per device with base and large triplets. When several reports land
/// in the same cell the last one in argument order wins.
inline Table emit_table(const std::vector<BenchReport>& reports, bool with_reference = false) {
  struct Row {
    std::string device;
    std::string source;
    std::optional<Triplet> base, large;
  };
  std::map<std::string, Row> measured;
  for (const auto& r : reports) {
    auto& row = measured[r.device];
    row.device = r.device;
    row.source = "measured";
    (is_large_model(r.model_id) ? row.large : row.base) = Triplet{r.fps_min, r.fps_avg, r.fps_max};
  }
  std::vector<Row> rows;
  for (auto& [_, row] : measured) rows.push_back(row);

  Table table;
  if (with_reference) {
    for (const auto& ref : reference_rows()) rows.push_back({ref.device, "reference", ref.base, ref.large});
    for (const auto& [device, row] : measured) {
      for (const auto& ref : reference_rows()) {
        if (device.find(ref.match) == std::string::npos) continue;
        auto check = [&](const char* column, const std::optional<Triplet>& got, const Triplet& want) {
          if (!got) return;
          const double ratio = got->avg / want.avg;
          table.advisories.push_back(device + " " + column + " avg " + detail::fmt2(got->avg) + " vs reference " +
                                     detail::fmt2(want.avg) + " (" + ref.device + "): " +
                                     (ratio >= 0.7 && ratio <= 1.3 ? "within" : "outside") + " +/-30%");
        };
        check("base", row.base, ref.base);
        check("large", row.large, ref.large);
      }
    }
  }

  std::ostringstream csv;
  csv << "device,source,base_min,base_avg,base_max,large_min,large_avg,large_max\n";
  for (const auto& row : rows) {
    csv << detail::csv_field(row.device) << "," << row.source << "," << detail::triplet_csv(row.base) << ","
        << detail::triplet_csv(row.large) << "\n";
  }
  table.csv = csv.str();

  const std::vector<std::string> header = {"Device", "Base model (min/avg/max)", "Large model (min/avg/max)"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& row : rows) {
    cells.push_back({row.source == "reference" ? row.device + " (reference)" : row.device,
                     detail::triplet_text(row.base), detail::triplet_text(row.large)});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : cells) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream text;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      text << (c ? " | " : "") << r[c];
      if (c + 1 < r.size()) text << std::string(width[c] - r[c].size(), ' ');
    }
    text << "\n";
  };
  line(header);
  std::vector<std::string> rule;
  for (auto w : width) rule.push_back(std::string(w, '-'));
  text << rule[0] << "-+-" << rule[1] << "-+-" << rule[2] << "\n";
  for (const auto& r : cells) line(r);
  table.text = text.str();
  return table;
}

}  // namespace florence2_bridge::bench
