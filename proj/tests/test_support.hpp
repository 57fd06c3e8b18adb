#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "florence2_interfaces/raster_image.hpp"
#include "florence2_interfaces/result_document.hpp"

namespace test_support {

using florence2_interfaces::PixelFormat;
using florence2_interfaces::RasterImage;

/// Deterministic pseudo-random image.
inline RasterImage make_image(std::uint32_t width, std::uint32_t height, std::uint32_t seed = 1,
                              PixelFormat format = PixelFormat::kRgb8) {
  RasterImage image;
  image.width = width;
  image.height = height;
  image.format = format;
  image.data.resize(image.expected_size());
  std::mt19937 rng(seed);
  for (auto& byte : image.data) byte = static_cast<std::uint8_t>(rng() & 0xFF);
  image.frame_id = "camera";
  return image;
}

inline RasterImage solid_image(std::uint32_t width, std::uint32_t height, std::uint8_t value) {
  RasterImage image;
  image.width = width;
  image.height = height;
  image.data.assign(image.expected_size(), value);
  return image;
}

inline std::string random_text(std::mt19937& rng) {
  static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz <>_\"\\/\n\t";
  std::uniform_int_distribution<std::size_t> len(0, 12), pick(0, alphabet.size() - 1);
  std::string out;
  for (std::size_t n = len(rng); n > 0; --n) out += alphabet[pick(rng)];
  return out;
}

inline double random_coord(std::mt19937& rng) {
  std::uniform_real_distribution<double> coord(0.0, 4096.0);
  return coord(rng);
}

/// Random output subtree conforming to `kind`.
inline florence2_interfaces::TaskOutput random_output(florence2_interfaces::OutputKind kind, std::mt19937& rng) {
  using namespace florence2_interfaces;
  std::uniform_int_distribution<int> count(0, 5);
  const int n = count(rng);
  switch (kind) {
    case OutputKind::kText:
      return TextOutput{random_text(rng)};
    case OutputKind::kBoxesLabels: {
      BoxesLabelsOutput o;
      for (int i = 0; i < n; ++i) {
        o.bboxes.push_back({random_coord(rng), random_coord(rng), random_coord(rng), random_coord(rng)});
        o.labels.push_back(random_text(rng));
      }
      return o;
    }
    case OutputKind::kQuadBoxesText: {
      QuadBoxesTextOutput o;
      for (int i = 0; i < n; ++i) {
        QuadBox q;
        for (auto& v : q) v = random_coord(rng);
        o.quad_boxes.push_back(q);
        o.labels.push_back(random_text(rng));
      }
      return o;
    }
    case OutputKind::kPolygonsLabels: {
      PolygonsLabelsOutput o;
      std::uniform_int_distribution<int> vertices(3, 9);
      for (int i = 0; i < n; ++i) {
        Polygon p(static_cast<std::size_t>(2 * vertices(rng)));
        for (auto& v : p) v = random_coord(rng);
        o.polygons.push_back(p);
        o.labels.push_back(random_text(rng));
      }
      return o;
    }
    case OutputKind::kRegionTextPairs: {
      RegionTextPairsOutput o;
      for (int i = 0; i < n; ++i) {
        o.bboxes.push_back({random_coord(rng), random_coord(rng), random_coord(rng), random_coord(rng)});
        o.texts.push_back(random_text(rng));
      }
      return o;
    }
  }
  return TextOutput{};
}

}  // namespace test_support
