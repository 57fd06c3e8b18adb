#pragma once

#include <algorithm>
#include <cstring>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "florence2_bridge/messages.hpp"
#include "florence2_interfaces/error_code.hpp"
#include "florence2_interfaces/raster_image.hpp"

namespace florence2_bridge {

using florence2_interfaces::Error;
using florence2_interfaces::ErrorCode;
using florence2_interfaces::PixelFormat;
using florence2_interfaces::RasterImage;

inline bool supported_encoding(const std::string& encoding) {
  return encoding == "rgb8" || encoding == "bgr8" || encoding == "mono8";
}

namespace detail {

inline void swap_red_blue(std::vector<std::uint8_t>& data) {
  for (std::size_t i = 0; i + 2 < data.size(); i += 3) std::swap(data[i], data[i + 2]);
}

}  // namespace detail

/// Wire image to the internal layout. Row padding (step > width * channels)
/// is removed; bgr8 is swapped to rgb order and flagged.
inline RasterImage convert_image_in(const msg::Image& message) {
  if (!supported_encoding(message.encoding)) {
    throw Error(ErrorCode::kUnsupportedEncoding, "encoding '" + message.encoding + "'");
  }
  RasterImage image;
  image.width = message.width;
  image.height = message.height;
  image.format = message.encoding == "mono8" ? PixelFormat::kMono8 : PixelFormat::kRgb8;
  image.stamp = message.header.stamp;
  image.frame_id = message.header.frame_id;
  image.source_bgr = message.encoding == "bgr8";

  const std::size_t row = static_cast<std::size_t>(message.width) * channels(image.format);
  const std::size_t step = message.step == 0 ? row : message.step;
  if (step < row || message.data.size() < step * message.height) {
    throw Error(ErrorCode::kMalformedImage, std::to_string(message.width) + "x" + std::to_string(message.height) +
                                                " " + message.encoding + " with step " + std::to_string(step) +
                                                " and " + std::to_string(message.data.size()) + " bytes");
  }
  if (step == row) {
    image.data.assign(message.data.begin(), message.data.begin() + static_cast<std::ptrdiff_t>(row * message.height));
  } else {
    image.data.resize(row * message.height);
    for (std::uint32_t y = 0; y < message.height; ++y) {
      std::memcpy(image.data.data() + y * row, message.data.data() + y * step, row);
    }
  }
  if (image.source_bgr) detail::swap_red_blue(image.data);
  return image;
}

inline msg::Image convert_image_out(const RasterImage& image) {
  msg::Image message;
  message.header = {image.stamp, image.frame_id};
  message.width = image.width;
  message.height = image.height;
  if (image.format == PixelFormat::kMono8) {
    message.encoding = "mono8";
  } else {
    message.encoding = image.source_bgr ? "bgr8" : "rgb8";
  }
  message.step = image.width * static_cast<std::uint32_t>(channels(image.format));
  message.data = image.data;
  if (image.source_bgr && image.format == PixelFormat::kRgb8) detail::swap_red_blue(message.data);
  return message;
}

/// Reads a PNG/JPEG (anything imdecode understands) into rgb8 or mono8.
inline RasterImage load_image_file(const std::string& path) {
  cv::Mat mat = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw Error(ErrorCode::kMalformedImage, "cannot read image " + path);
  if (mat.depth() != CV_8U) throw Error(ErrorCode::kUnsupportedEncoding, path + " is not 8-bit");
  RasterImage image;
  image.width = static_cast<std::uint32_t>(mat.cols);
  image.height = static_cast<std::uint32_t>(mat.rows);
  if (mat.channels() == 1) {
    image.format = PixelFormat::kMono8;
  } else {
    cv::Mat rgb;
    cv::cvtColor(mat, rgb, mat.channels() == 4 ? cv::COLOR_BGRA2RGB : cv::COLOR_BGR2RGB);
    mat = rgb;
  }
  if (!mat.isContinuous()) mat = mat.clone();
  image.data.assign(mat.data, mat.data + mat.total() * mat.elemSize());
  return image;
}

inline void save_image_file(const RasterImage& image, const std::string& path) {
  const int type = image.format == PixelFormat::kMono8 ? CV_8UC1 : CV_8UC3;
  cv::Mat view(static_cast<int>(image.height), static_cast<int>(image.width), type,
               const_cast<std::uint8_t*>(image.data.data()));
  cv::Mat out;
  if (image.format == PixelFormat::kRgb8) {
    cv::cvtColor(view, out, cv::COLOR_RGB2BGR);
  } else {
    out = view;
  }
  if (!cv::imwrite(path, out)) throw Error(ErrorCode::kInvalidConfig, "cannot write image " + path);
}

}  // namespace florence2_bridge
