#pragma once

#include <string>
#include <vector>

#include "florence2_interfaces/raster_image.hpp"

namespace florence2_interfaces {

/// Center/size box with a single class hypothesis, the shape carried by the
/// standard 2-D detection array message.
struct Detection {
  double center_x = 0;
  double center_y = 0;
  double size_x = 0;
  double size_y = 0;
  std::string label;
  double score = 1.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct DetectionSet {
  std::vector<Detection> detections;
  Stamp source_stamp;
  std::string frame_id;

  friend bool operator==(const DetectionSet&, const DetectionSet&) = default;
};

}  // namespace florence2_interfaces
