#pragma once

#include <array>
#include <string>
#include <variant>
#include <vector>

#include "florence2_interfaces/task_spec.hpp"

namespace florence2_interfaces {

/// Axis-aligned box in absolute pixels: x_min, y_min, x_max, y_max.
using CornerBox = std::array<double, 4>;
/// Four corner points (x1, y1, ..., x4, y4) in absolute pixels.
using QuadBox = std::array<double, 8>;
/// Flat (x, y) vertex list in absolute pixels.
using Polygon = std::vector<double>;

struct TextOutput {
  std::string text;
  friend bool operator==(const TextOutput&, const TextOutput&) = default;
};

struct BoxesLabelsOutput {
  std::vector<CornerBox> bboxes;
  std::vector<std::string> labels;
  friend bool operator==(const BoxesLabelsOutput&, const BoxesLabelsOutput&) = default;
};

struct QuadBoxesTextOutput {
  std::vector<QuadBox> quad_boxes;
  std::vector<std::string> labels;
  friend bool operator==(const QuadBoxesTextOutput&, const QuadBoxesTextOutput&) = default;
};

struct PolygonsLabelsOutput {
  std::vector<Polygon> polygons;
  std::vector<std::string> labels;
  friend bool operator==(const PolygonsLabelsOutput&, const PolygonsLabelsOutput&) = default;
};

struct RegionTextPairsOutput {
  std::vector<CornerBox> bboxes;
  std::vector<std::string> texts;
  friend bool operator==(const RegionTextPairsOutput&, const RegionTextPairsOutput&) = default;
};

// Alternative order mirrors OutputKind so kind_of() is an index cast.
using TaskOutput = std::variant<TextOutput, BoxesLabelsOutput, QuadBoxesTextOutput,
                                PolygonsLabelsOutput, RegionTextPairsOutput>;

inline OutputKind kind_of(const TaskOutput& output) {
  return static_cast<OutputKind>(output.index());
}

/// Length consistency between parallel lists (and vertex parity for polygons).
/// Returns an empty string when consistent, otherwise a short diagnostic.
inline std::string consistency_error(const TaskOutput& output) {
  struct Visitor {
    std::string operator()(const TextOutput&) const { return {}; }
    std::string operator()(const BoxesLabelsOutput& o) const {
      if (o.bboxes.size() != o.labels.size()) {
        return "bboxes/labels length mismatch (" + std::to_string(o.bboxes.size()) + " vs " +
               std::to_string(o.labels.size()) + ")";
      }
      return {};
    }
    std::string operator()(const QuadBoxesTextOutput& o) const {
      if (o.quad_boxes.size() != o.labels.size()) {
        return "quad_boxes/labels length mismatch (" + std::to_string(o.quad_boxes.size()) +
               " vs " + std::to_string(o.labels.size()) + ")";
      }
      return {};
    }
    std::string operator()(const PolygonsLabelsOutput& o) const {
      if (o.polygons.size() != o.labels.size()) {
        return "polygons/labels length mismatch (" + std::to_string(o.polygons.size()) + " vs " +
               std::to_string(o.labels.size()) + ")";
      }
      for (std::size_t i = 0; i < o.polygons.size(); ++i) {
        if (o.polygons[i].size() < 6 || o.polygons[i].size() % 2 != 0) {
          return "polygons[" + std::to_string(i) + "] needs an even count of at least 6 coordinates";
        }
      }
      return {};
    }
    std::string operator()(const RegionTextPairsOutput& o) const {
      if (o.bboxes.size() != o.texts.size()) {
        return "bboxes/texts length mismatch (" + std::to_string(o.bboxes.size()) + " vs " +
               std::to_string(o.texts.size()) + ")";
      }
      return {};
    }
  };
  return std::visit(Visitor{}, output);
}

}  // namespace florence2_interfaces
