#include <gtest/gtest.h>

#include <random>

#include "florence2_bridge/annotate.hpp"
#include "florence2_bridge/mock_backend.hpp"
#include "florence2_bridge/result_mapping.hpp"
#include "florence2_bridge/task_registry.hpp"
#include "test_support.hpp"

using namespace florence2_bridge;
using namespace florence2_interfaces;

namespace {

TaskSpec task(const char* token) { return *TaskRegistry::builtin().lookup(token); }

ResultDocument boxes_doc(std::vector<CornerBox> boxes, std::vector<std::string> labels) {
  ResultDocument doc;
  doc.task = "<OD>";
  doc.model = "mock";
  doc.stamp = {10, 20};
  doc.output = BoxesLabelsOutput{std::move(boxes), std::move(labels)};
  return doc;
}

}  // namespace

TEST(ToResultDocument, EmbedsTextDirectly) {
  BackendResult result{"", TextOutput{"a cat"}, 0.5};
  auto doc = to_result_document(task("<CAPTION>"), result, {1, 2}, "mock");
  EXPECT_EQ(output_to_json(doc.output).dump(), R"({"text":"a cat"})");
  EXPECT_EQ(doc.task, "<CAPTION>");
  EXPECT_EQ(doc.model, "mock");
  EXPECT_EQ(doc.stamp, (Stamp{1, 2}));
  EXPECT_DOUBLE_EQ(doc.inference_time_s, 0.5);
}

TEST(ToResultDocument, EmptyBoxes) {
  BackendResult result{"", BoxesLabelsOutput{}, 0.1};
  auto doc = to_result_document(task("<OD>"), result, {}, "mock");
  EXPECT_EQ(output_to_json(doc.output).dump(), R"({"bboxes":[],"labels":[]})");
}

TEST(ToResultDocument, MockObjectDetectionOn640x480) {
  MockBackend mock;
  auto result = mock.infer("<OD>", test_support::make_image(640, 480), task("<OD>"));
  auto doc = to_result_document(task("<OD>"), result, {}, "mock");
  EXPECT_EQ(output_to_json(doc.output).dump(), R"({"bboxes":[[160.0,120.0,480.0,360.0]],"labels":["mock"]})");
}

TEST(ToResultDocument, SchemaMismatch) {
  try {
    to_result_document(task("<OD>"), {"", TextOutput{"x"}, 0.1}, {}, "mock");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaMismatch);
  }
  EXPECT_THROW(to_result_document(task("<OD>"), {"", BoxesLabelsOutput{{{0, 0, 1, 1}}, {}}, 0.1}, {}, "m"), Error);
}

TEST(ToDetections, CenterAndSizeFromCorners) {
  auto set = to_detections(boxes_doc({{10, 20, 110, 220}}, {"cat"}), "cam");
  ASSERT_EQ(set.detections.size(), 1u);
  EXPECT_EQ(set.detections[0], (Detection{60, 120, 100, 200, "cat", 1.0}));
  EXPECT_EQ(set.source_stamp, (Stamp{10, 20}));
  EXPECT_EQ(set.frame_id, "cam");
}

TEST(ToDetections, EmptyAndErrorCases) {
  EXPECT_TRUE(to_detections(boxes_doc({}, {})).detections.empty());
  try {
    to_detections(boxes_doc({{0, 0, 1, 1}, {1, 1, 2, 2}}, {"a"}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaMismatch);
  }
  ResultDocument text;
  text.output = TextOutput{"x"};
  try {
    to_detections(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kWrongOutputKind);
  }
}

TEST(ToDetectionsProperty, CentersInsideAndCornersRecoverable) {
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> coord(0, 4000);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<CornerBox> boxes;
    std::vector<std::string> labels;
    for (int n = static_cast<int>(rng() % 6); n > 0; --n) {
      int x1 = coord(rng), x2 = coord(rng), y1 = coord(rng), y2 = coord(rng);
      boxes.push_back({double(std::min(x1, x2)), double(std::min(y1, y2)), double(std::max(x1, x2)),
                       double(std::max(y1, y2))});
      labels.push_back("l" + std::to_string(n));
    }
    auto set = to_detections(boxes_doc(boxes, labels));
    ASSERT_EQ(set.detections.size(), boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const auto& d = set.detections[i];
      EXPECT_GE(d.center_x, boxes[i][0]);
      EXPECT_LE(d.center_x, boxes[i][2]);
      EXPECT_GE(d.center_y, boxes[i][1]);
      EXPECT_LE(d.center_y, boxes[i][3]);
      EXPECT_EQ(d.center_x - d.size_x / 2, boxes[i][0]);
      EXPECT_EQ(d.center_y + d.size_y / 2, boxes[i][3]);
    }
  }
}

TEST(RenderAnnotations, EmptySetIsIdentity) {
  auto image = test_support::make_image(64, 48);
  EXPECT_EQ(render_annotations(image, DetectionSet{}), image);
}

// Pixel-diff oracle: with no label text, exactly the perimeter band changes.
TEST(RenderAnnotations, OnlyPerimeterPixelsChange) {
  auto image = test_support::solid_image(64, 48, 0);
  AnnotationStyle style;
  style.line_width = 2;
  style.color_cycle = {{255, 255, 255}};
  DetectionSet set{{{30, 20, 20, 10, "", 1.0}}, {}, ""};  // corners (20,15)-(40,25)
  auto out = render_annotations(image, set, style);
  ASSERT_EQ(out.width, image.width);
  ASSERT_EQ(out.height, image.height);
  ASSERT_EQ(out.format, image.format);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) {
      const bool inside = x >= 20 && x <= 40 && y >= 15 && y <= 25;
      const bool band = inside && (x - 20 < 2 || 40 - x < 2 || y - 15 < 2 || 25 - y < 2);
      const auto* px = &out.data[(static_cast<std::size_t>(y) * 64 + x) * 3];
      const bool changed = px[0] != 0 || px[1] != 0 || px[2] != 0;
      EXPECT_EQ(changed, band) << x << "," << y;
    }
  }
}

TEST(RenderAnnotations, LabelChangesStayInsideBanner) {
  auto image = test_support::make_image(200, 120, 3);
  AnnotationStyle style;
  DetectionSet set{{{100, 70, 80, 60, "mug", 1.0}}, {}, ""};
  auto out = render_annotations(image, set, style);
  const auto box = pixel_box(set.detections[0], 200, 120);
  const auto banner = label_banner(box, "mug", 200, 120, style);
  ASSERT_TRUE(banner);
  bool any_banner_change = false;
  for (int y = 0; y < 120; ++y) {
    for (int x = 0; x < 200; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * 200 + x) * 3;
      const bool changed = out.data[i] != image.data[i] || out.data[i + 1] != image.data[i + 1] ||
                           out.data[i + 2] != image.data[i + 2];
      const bool on_perimeter = box.contains(x, y) && (x - box.x1 < style.line_width || box.x2 - x < style.line_width ||
                                                       y - box.y1 < style.line_width || box.y2 - y < style.line_width);
      if (changed) {
        EXPECT_TRUE(on_perimeter || banner->contains(x, y)) << x << "," << y;
      }
      any_banner_change |= changed && banner->contains(x, y) && !on_perimeter;
    }
  }
  EXPECT_TRUE(any_banner_change);
}

TEST(RenderAnnotations, OutOfBoundsBoxIsClamped) {
  auto image = test_support::make_image(32, 32, 5, PixelFormat::kMono8);
  DetectionSet set{{{0, 0, 500, 500, "far", 1.0}, {-100, -100, 10, 10, "gone", 1.0}}, {}, ""};
  RasterImage out;
  ASSERT_NO_THROW(out = render_annotations(image, set));
  EXPECT_EQ(out.data.size(), image.data.size());
  EXPECT_NE(out, image);
}

TEST(RenderAnnotations, Deterministic) {
  auto image = test_support::make_image(128, 96, 11);
  DetectionSet set{{{40, 40, 30, 30, "a", 1.0}, {90, 60, 50, 20, "b", 1.0}}, {}, ""};
  EXPECT_EQ(render_annotations(image, set), render_annotations(image, set));
}
