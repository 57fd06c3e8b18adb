#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace florence2_interfaces {

/// Wall-clock time in the middleware's (sec, nanosec) representation.
struct Stamp {
  std::int64_t sec = 0;
  std::uint32_t nanosec = 0;

  bool is_zero() const { return sec == 0 && nanosec == 0; }
  double seconds() const { return static_cast<double>(sec) + nanosec * 1e-9; }

  friend auto operator<=>(const Stamp&, const Stamp&) = default;
};

/// Pixel layouts understood inside the bridge. Wire encodings outside this set
/// are rejected at the adapter boundary.
enum class PixelFormat { kRgb8, kMono8 };

inline int channels(PixelFormat format) { return format == PixelFormat::kRgb8 ? 3 : 1; }

inline const char* to_string(PixelFormat format) {
  return format == PixelFormat::kRgb8 ? "rgb8" : "mono8";
}

/// Middleware-neutral, tightly packed image.
///
/// `source_bgr` records that the frame arrived as bgr8 and was swapped into rgb
/// order, so the outbound conversion can restore the original byte layout.
struct RasterImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  PixelFormat format = PixelFormat::kRgb8;
  std::vector<std::uint8_t> data;
  Stamp stamp;
  std::string frame_id;
  bool source_bgr = false;

  bool empty() const { return width == 0 || height == 0 || data.empty(); }

  std::size_t expected_size() const {
    return static_cast<std::size_t>(width) * height * channels(format);
  }

  bool well_formed() const { return !empty() && data.size() == expected_size(); }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

}  // namespace florence2_interfaces
