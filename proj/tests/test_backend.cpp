#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <future>
#include <random>

#include "florence2_bridge/backend_factory.hpp"
#include "florence2_bridge/task_registry.hpp"
#include "test_support.hpp"

using namespace florence2_bridge;
using namespace florence2_interfaces;

namespace {

TaskSpec task(const char* token) { return *TaskRegistry::builtin().lookup(token); }

BackendConfig mock_config() {
  BackendConfig config;
  config.model_id = "mock";
  return config;
}

}  // namespace

TEST(SelectDevice, AutoPrefersFirstGpu) {
  EXPECT_EQ(select_device(DevicePolicy::automatic(), FixedProbe(1)), (Device{Device::Kind::kGpu, 0}));
  EXPECT_EQ(select_device(DevicePolicy::automatic(), FixedProbe(0)), (Device{Device::Kind::kCpu, 0}));
}

TEST(SelectDevice, ExplicitPoliciesHonoredOrFail) {
  EXPECT_EQ(select_device(DevicePolicy::cpu(), FixedProbe(2)), (Device{Device::Kind::kCpu, 0}));
  EXPECT_EQ(select_device(DevicePolicy::gpu(1), FixedProbe(2)), (Device{Device::Kind::kGpu, 1}));
  try {
    select_device(DevicePolicy::gpu(3), FixedProbe(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGpuUnavailable);
  }
}

TEST(SelectDevice, ParsesPolicyStrings) {
  EXPECT_EQ(DevicePolicy::parse("auto"), DevicePolicy::automatic());
  EXPECT_EQ(DevicePolicy::parse("cpu"), DevicePolicy::cpu());
  EXPECT_EQ(DevicePolicy::parse("cuda:2"), DevicePolicy::gpu(2));
  EXPECT_EQ(DevicePolicy::parse("gpu"), DevicePolicy::gpu(0));
  EXPECT_THROW(DevicePolicy::parse("cuda:-1"), Error);
  EXPECT_THROW(DevicePolicy::parse("tpu"), Error);
}

TEST(Load, PrecisionFollowsDevice) {
  auto cpu = load_backend(mock_config(), FixedProbe(0));
  EXPECT_EQ(cpu->device(), (Device{Device::Kind::kCpu, 0}));
  EXPECT_EQ(cpu->precision(), Precision::kFull);

  auto gpu = load_backend(mock_config(), FixedProbe(1));
  EXPECT_TRUE(gpu->device().is_gpu());
  EXPECT_EQ(gpu->precision(), Precision::kReduced);

  auto config = mock_config();
  config.precision_policy = PrecisionPolicy::kFull;
  EXPECT_EQ(load_backend(config, FixedProbe(1))->precision(), Precision::kFull);
}

TEST(Load, MissingModelIsReported) {
  auto config = mock_config();
  config.model_id = "nonexistent/model";
  config.cache_root = std::filesystem::temp_directory_path() / "florence2_empty_cache";
  try {
    load_backend(config, FixedProbe(0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kModelNotFound);
  }
}

TEST(Load, RejectsInvalidConfig) {
  auto config = mock_config();
  config.generation.num_beams = 0;
  EXPECT_THROW(load_backend(config, FixedProbe(0)), Error);
  config = mock_config();
  config.model_id.clear();
  EXPECT_THROW(load_backend(config, FixedProbe(0)), Error);
}

TEST(ResolveModel, FindsHubSnapshots) {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "florence2_cache_test";
  fs::remove_all(root);
  const fs::path snapshot = root / "models--microsoft--Florence-2-base" / "snapshots" / "abc123";
  fs::create_directories(snapshot);
  std::ofstream(snapshot / "config.json") << "{}";

  auto found = resolve_model("microsoft/Florence-2-base", "", root);
  ASSERT_TRUE(found);
  EXPECT_EQ(found->revision, "abc123");
  EXPECT_TRUE(resolve_model("microsoft/Florence-2-base", "abc123", root));
  EXPECT_FALSE(resolve_model("microsoft/Florence-2-base", "other", root));
  EXPECT_FALSE(resolve_model("microsoft/Florence-2-large", "", root));
  fs::remove_all(root);
}

TEST(MockBackend, ObjectDetectionBoxIsCentralHalf) {
  MockBackend mock;
  auto image = test_support::make_image(640, 480);
  auto result = mock.infer("<OD>", image, task("<OD>"));
  const auto& boxes = std::get<BoxesLabelsOutput>(result.parsed_output);
  ASSERT_EQ(boxes.bboxes.size(), 1u);
  EXPECT_EQ(boxes.bboxes[0], (CornerBox{160, 120, 480, 360}));
  EXPECT_EQ(boxes.labels, std::vector<std::string>{"mock"});
  EXPECT_GT(result.inference_time, 0);
}

TEST(MockBackend, CaptionCarriesChecksumPrefix) {
  MockBackend mock;
  auto image = test_support::solid_image(2, 2, 0);
  // CRC-32 of twelve zero bytes, from Python zlib.crc32(bytes(12)).
  auto result = mock.infer("<CAPTION>", image, task("<CAPTION>"));
  EXPECT_EQ(std::get<TextOutput>(result.parsed_output).text, "mock caption " + checksum_hex(image_checksum(image)));
  EXPECT_EQ(image_checksum(image), 0x7bd5c66fu);
  EXPECT_EQ(checksum_hex(0x1a2bu), "00001a2b");
}

TEST(MockBackend, PureFunctionOfTaskAndImage) {
  MockBackend mock;
  auto image = test_support::make_image(33, 17, 9);
  for (const auto& spec : TaskRegistry::builtin().list_tasks()) {
    auto a = mock.infer(spec.token, image, spec);
    auto b = mock.infer(spec.token, image, spec);
    EXPECT_EQ(a.raw_text, b.raw_text);
    EXPECT_EQ(a.parsed_output, b.parsed_output);
    EXPECT_EQ(kind_of(a.parsed_output), spec.output_kind);
  }
}

TEST(MockBackend, ReportsInjectedLatency) {
  MockBackend mock(std::chrono::milliseconds(30));
  auto image = test_support::make_image(8, 8);
  const auto start = std::chrono::steady_clock::now();
  auto result = mock.infer("<OD>", image, task("<OD>"));
  EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(30));
  EXPECT_DOUBLE_EQ(result.inference_time, 0.030);
}

TEST(Backend, RejectsOverlappingInfer) {
  MockBackend mock(std::chrono::milliseconds(200));
  auto image = test_support::make_image(8, 8);
  auto spec = task("<OD>");
  auto first = std::async(std::launch::async, [&] { return mock.infer("<OD>", image, spec); });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  EXPECT_THROW(mock.infer("<OD>", image, spec), Error);
  EXPECT_NO_THROW(first.get());
  EXPECT_EQ(mock.reentrancy_violations(), 1u);
}

TEST(Backend, RejectsEmptyImage) {
  MockBackend mock;
  EXPECT_THROW(mock.infer("<OD>", RasterImage{}, task("<OD>")), Error);
}

namespace {

// Emits whatever it is told to, to exercise the base-class checks.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(TaskOutput output) : Backend({}, Precision::kFull), output_(std::move(output)) {}
  std::string model_label() const override { return "scripted"; }

 protected:
  BackendResult do_infer(std::string_view, const RasterImage&, const TaskSpec&) override {
    return {"", output_, 0.0};
  }

 private:
  TaskOutput output_;
};

}  // namespace

TEST(Backend, ClampsAndOrdersBoxes) {
  ScriptedBackend backend(BoxesLabelsOutput{{{-5, 50, 700, -10}}, {"x"}});
  auto result = backend.infer("<OD>", test_support::make_image(640, 480), task("<OD>"));
  EXPECT_EQ(std::get<BoxesLabelsOutput>(result.parsed_output).bboxes[0], (CornerBox{0, 0, 640, 50}));
  EXPECT_GT(result.inference_time, 0);
}

TEST(Backend, RejectsWrongKindAndMismatchedLists) {
  ScriptedBackend wrong(TextOutput{"x"});
  EXPECT_THROW(wrong.infer("<OD>", test_support::make_image(4, 4), task("<OD>")), Error);
  ScriptedBackend mismatched(BoxesLabelsOutput{{{1, 1, 2, 2}, {1, 1, 3, 3}}, {"a"}});
  EXPECT_THROW(mismatched.infer("<OD>", test_support::make_image(4, 4), task("<OD>")), Error);
}

// Box invariants hold for arbitrary backend output after the base-class pass.
TEST(BackendProperty, BoxesAlwaysOrderedAndInBounds) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> wild(-2000, 6000);
  auto spec = task("<OD>");
  for (int trial = 0; trial < 300; ++trial) {
    BoxesLabelsOutput raw;
    for (int i = 0; i < 4; ++i) {
      raw.bboxes.push_back({wild(rng), wild(rng), wild(rng), wild(rng)});
      raw.labels.push_back("l");
    }
    ScriptedBackend backend(raw);
    const std::uint32_t w = 1 + rng() % 1000, h = 1 + rng() % 1000;
    auto out = std::get<BoxesLabelsOutput>(backend.infer("<OD>", test_support::make_image(w, h), spec).parsed_output);
    ASSERT_EQ(out.bboxes.size(), out.labels.size());
    for (const auto& b : out.bboxes) {
      EXPECT_LE(b[0], b[2]);
      EXPECT_LE(b[1], b[3]);
      EXPECT_GE(b[0], 0);
      EXPECT_GE(b[1], 0);
      EXPECT_LE(b[2], w);
      EXPECT_LE(b[3], h);
    }
  }
}

TEST(FromUpstream, MapsPostProcessorShapes) {
  auto od = from_upstream(task("<OD>"), nlohmann::json::parse(
                                             R"({"<OD>": {"bboxes": [[1,2,3,4]], "labels": ["cat"]}})"));
  EXPECT_EQ(std::get<BoxesLabelsOutput>(od).labels[0], "cat");

  auto ovd = from_upstream(task("<OPEN_VOCABULARY_DETECTION>"),
                           nlohmann::json::parse(R"({"<OPEN_VOCABULARY_DETECTION>": {"bboxes": [[1,2,3,4]],
                             "bboxes_labels": ["mug"], "polygons": [], "polygons_labels": []}})"));
  EXPECT_EQ(std::get<BoxesLabelsOutput>(ovd).labels[0], "mug");

  auto proposals = from_upstream(task("<REGION_PROPOSAL>"), nlohmann::json::parse(
                                     R"({"<REGION_PROPOSAL>": {"bboxes": [[1,2,3,4],[0,0,1,1]], "labels": ["",""]}})"));
  EXPECT_EQ(std::get<BoxesLabelsOutput>(proposals).labels.size(), 2u);

  auto caption = from_upstream(task("<CAPTION>"), nlohmann::json::parse(R"({"<CAPTION>": "a dog"})"));
  EXPECT_EQ(std::get<TextOutput>(caption).text, "a dog");

  auto ocr = from_upstream(task("<OCR_WITH_REGION>"), nlohmann::json::parse(
                               R"({"<OCR_WITH_REGION>": {"quad_boxes": [[1,2,3,4,5,6,7,8]], "labels": ["EXIT"]}})"));
  EXPECT_EQ(std::get<QuadBoxesTextOutput>(ocr).labels[0], "EXIT");

  auto seg = from_upstream(task("<REFERRING_EXPRESSION_SEGMENTATION>"),
                           nlohmann::json::parse(R"({"<REFERRING_EXPRESSION_SEGMENTATION>":
                             {"polygons": [[[1,1,5,1,5,5,1,5],[7,7,9,7,9,9]]], "labels": [""]}})"));
  EXPECT_EQ(std::get<PolygonsLabelsOutput>(seg).polygons.size(), 2u);

  auto dense = from_upstream(task("<DENSE_REGION_CAPTION>"), nlohmann::json::parse(
                                 R"({"<DENSE_REGION_CAPTION>": {"bboxes": [[1,2,3,4]], "labels": ["a red car"]}})"));
  EXPECT_EQ(std::get<RegionTextPairsOutput>(dense).texts[0], "a red car");

  EXPECT_THROW(from_upstream(task("<OCR_WITH_REGION>"), nlohmann::json::parse(R"({"x":1})")), Error);
}
