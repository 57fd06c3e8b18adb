#pragma once

#include <cctype>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>
#include <thread>

#include <zlib.h>

#include "florence2_bridge/backend.hpp"
#include "florence2_interfaces/result_document.hpp"

namespace florence2_bridge {

/// CRC-32 (zlib polynomial) of the pixel bytes.
inline std::uint32_t image_checksum(const RasterImage& image) {
  uLong crc = crc32(0L, Z_NULL, 0);
  const auto* bytes = image.data.data();
  std::size_t remaining = image.data.size();
  while (remaining > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(remaining, 1u << 30));
    crc = crc32(crc, bytes, chunk);
    bytes += chunk;
    remaining -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

inline std::string checksum_hex(std::uint32_t crc) {
  char buffer[9];
  std::snprintf(buffer, sizeof(buffer), "%08x", crc);
  return buffer;
}

/// Deterministic stand-in for the model, selected with model_id "mock".
///
/// Output depends only on (task token, width, height, pixel checksum):
///   TEXT              "mock <task words> <crc32 hex>", e.g. "mock caption 0a1b2c3d"
///   BOXES_LABELS      one box [W/4, H/4, 3W/4, 3H/4] labelled "mock"
///   QUAD_BOXES_TEXT   the same rectangle as a quad, labelled "mock"
///   POLYGONS_LABELS   the same rectangle as a 4-vertex polygon, labelled "mock"
///   REGION_TEXT_PAIRS the same box with text "mock region"
/// Each call blocks for the configured latency, which is also what it reports
/// as inference time.
class MockBackend : public Backend {
 public:
  explicit MockBackend(std::chrono::milliseconds latency = std::chrono::milliseconds(0),
                       Device device = {}, Precision precision = Precision::kFull)
      : Backend(device, precision), latency_(latency) {}

  std::string model_label() const override { return std::string(kMockModelId); }
  std::chrono::milliseconds latency() const { return latency_; }

  static TaskOutput expected_output(const TaskSpec& spec, std::uint32_t width, std::uint32_t height,
                                    std::uint32_t checksum) {
    using namespace florence2_interfaces;
    const double w = width;
    const double h = height;
    const CornerBox box{0.25 * w, 0.25 * h, 0.75 * w, 0.75 * h};
    switch (spec.output_kind) {
      case OutputKind::kText:
        return TextOutput{"mock " + task_words(spec.token) + " " + checksum_hex(checksum)};
      case OutputKind::kBoxesLabels:
        return BoxesLabelsOutput{{box}, {"mock"}};
      case OutputKind::kQuadBoxesText:
        return QuadBoxesTextOutput{{QuadBox{box[0], box[1], box[2], box[1], box[2], box[3], box[0], box[3]}},
                                   {"mock"}};
      case OutputKind::kPolygonsLabels:
        return PolygonsLabelsOutput{{Polygon{box[0], box[1], box[2], box[1], box[2], box[3], box[0], box[3]}},
                                    {"mock"}};
      case OutputKind::kRegionTextPairs:
        return RegionTextPairsOutput{{box}, {"mock region"}};
    }
    return TextOutput{};
  }

 protected:
  BackendResult do_infer(std::string_view, const RasterImage& image, const TaskSpec& spec) override {
    if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
    BackendResult result;
    result.parsed_output = expected_output(spec, image.width, image.height, image_checksum(image));
    result.raw_text = florence2_interfaces::output_to_json(result.parsed_output).dump();
    result.inference_time = latency_.count() > 0 ? latency_.count() / 1000.0 : 1e-3;
    return result;
  }

 private:
  // "<MORE_DETAILED_CAPTION>" -> "more detailed caption"
  static std::string task_words(const std::string& token) {
    std::string words;
    for (char c : token) {
      if (c == '<' || c == '>') continue;
      words += c == '_' ? ' ' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return words;
  }

  std::chrono::milliseconds latency_;
};

}  // namespace florence2_bridge
