#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "florence2_interfaces/detection_set.hpp"
#include "florence2_interfaces/raster_image.hpp"

namespace florence2_bridge {

using Rgb = std::array<std::uint8_t, 3>;

struct AnnotationStyle {
  int line_width = 2;
  double font_scale = 0.5;
  std::vector<Rgb> color_cycle = {{230, 25, 75}, {60, 180, 75}, {255, 225, 25}, {0, 130, 200},
                                  {245, 130, 48}, {145, 30, 180}, {70, 240, 240}, {240, 50, 230}};
};

/// Inclusive pixel rectangle.
struct PixelRect {
  int x1, y1, x2, y2;
  bool contains(int x, int y) const { return x >= x1 && x <= x2 && y >= y1 && y <= y2; }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Detection box in pixel indices, clamped into the image.
inline PixelRect pixel_box(const florence2_interfaces::Detection& d, std::uint32_t width,
                           std::uint32_t height) {
  auto clamp_x = [&](double v) { return static_cast<int>(std::clamp(std::lround(v), 0L, long(width) - 1)); };
  auto clamp_y = [&](double v) { return static_cast<int>(std::clamp(std::lround(v), 0L, long(height) - 1)); };
  return {clamp_x(d.center_x - d.size_x / 2), clamp_y(d.center_y - d.size_y / 2),
          clamp_x(d.center_x + d.size_x / 2), clamp_y(d.center_y + d.size_y / 2)};
}

inline constexpr int kLabelFont = cv::FONT_HERSHEY_SIMPLEX;

/// Filled banner behind a label: above the box when it fits, else inside its top edge.
inline std::optional<PixelRect> label_banner(const PixelRect& box, const std::string& label,
                                             std::uint32_t width, std::uint32_t height,
                                             const AnnotationStyle& style) {
  if (label.empty()) return std::nullopt;
  int baseline = 0;
  const cv::Size text = cv::getTextSize(label, kLabelFont, style.font_scale, 1, &baseline);
  const int banner_h = text.height + baseline + 2;
  const int banner_w = text.width + 2;
  int top = box.y1 - banner_h;
  if (top < 0) top = box.y1;
  PixelRect banner{box.x1, top, std::min<int>(box.x1 + banner_w - 1, int(width) - 1),
                   std::min<int>(top + banner_h - 1, int(height) - 1)};
  return banner;
}

/// Boxes and labels drawn over a copy of the input; pixels outside box
/// perimeters and label banners are untouched.
inline florence2_interfaces::RasterImage render_annotations(const florence2_interfaces::RasterImage& image,
                                                            const florence2_interfaces::DetectionSet& dets,
                                                            const AnnotationStyle& style = {}) {
  using florence2_interfaces::PixelFormat;
  florence2_interfaces::RasterImage out = image;
  if (image.empty() || dets.detections.empty() || style.color_cycle.empty()) return out;

  const int ch = florence2_interfaces::channels(image.format);
  cv::Mat canvas(static_cast<int>(image.height), static_cast<int>(image.width), ch == 3 ? CV_8UC3 : CV_8UC1,
                 out.data.data());
  const int line = std::max(1, style.line_width);

  for (std::size_t i = 0; i < dets.detections.size(); ++i) {
    const auto& det = dets.detections[i];
    const Rgb& rgb = style.color_cycle[i % style.color_cycle.size()];
    const auto gray = static_cast<std::uint8_t>(std::lround(0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]));
    const cv::Scalar color = ch == 3 ? cv::Scalar(rgb[0], rgb[1], rgb[2]) : cv::Scalar(gray);
    const PixelRect box = pixel_box(det, image.width, image.height);

    // Perimeter band of `line` pixels, kept inside the box.
    for (int k = 0; k < line; ++k) {
      const int x1 = box.x1 + k, y1 = box.y1 + k, x2 = box.x2 - k, y2 = box.y2 - k;
      if (x1 > x2 || y1 > y2) break;
      canvas.row(y1).colRange(x1, x2 + 1).setTo(color);
      canvas.row(y2).colRange(x1, x2 + 1).setTo(color);
      canvas.col(x1).rowRange(y1, y2 + 1).setTo(color);
      canvas.col(x2).rowRange(y1, y2 + 1).setTo(color);
    }

    if (auto banner = label_banner(box, det.label, image.width, image.height, style)) {
      cv::Mat region = canvas(cv::Range(banner->y1, banner->y2 + 1), cv::Range(banner->x1, banner->x2 + 1));
      region.setTo(color);
      int baseline = 0;
      cv::getTextSize(det.label, kLabelFont, style.font_scale, 1, &baseline);
      const cv::Scalar ink = ch == 3 ? cv::Scalar(0, 0, 0) : cv::Scalar(255 - gray);
      cv::putText(region, det.label, cv::Point(1, region.rows - baseline - 1), kLabelFont, style.font_scale, ink,
                  1, cv::LINE_8);
    }
  }
  return out;
}

}  // namespace florence2_bridge
