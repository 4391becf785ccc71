#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace faceqr {

// 8-bit interleaved RGB raster as decoded from disk.
struct RawImage {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;  // row-major, RGB interleaved

  std::uint8_t at(int y, int x, int c) const {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
  std::uint8_t& at(int y, int x, int c) {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
};

enum class Provenance { original, restored, synthetic };

// Canonical 32x32x3 network input/output, values in [0,1], HWC order.
struct FaceImage {
  static constexpr int kSize = 32;
  static constexpr int kChannels = 3;
  static constexpr int kValueCount = kSize * kSize * kChannels;

  std::vector<double> values;
  Provenance provenance = Provenance::original;

  FaceImage() : values(kValueCount, 0.0) {}

  double at(int y, int x, int c) const {
    return values[static_cast<std::size_t>((y * kSize + x) * kChannels + c)];
  }
  double& at(int y, int x, int c) {
    return values[static_cast<std::size_t>((y * kSize + x) * kChannels + c)];
  }
};

struct BoundingBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
};

// Decodes an 8-bit RGB PNG/JPEG. Grayscale or alpha inputs are an error,
// never silently converted.
RawImage load_image(const std::string& path);

void save_png(const RawImage& img, const std::string& path);
void save_png(const FaceImage& img, const std::string& path);

// Crop `box` out of `raw` (whole image when omitted) and bilinearly resample
// to 32x32, mapping 8-bit values to [0,1].
FaceImage preprocess(const RawImage& raw, const BoundingBox& box);
FaceImage preprocess(const RawImage& raw);

// Bilinear resample of an HWC double grid; exact passthrough when sizes match.
std::vector<double> resize_bilinear(const std::vector<double>& src, int src_h,
                                    int src_w, int channels, int dst_h,
                                    int dst_w);

}  // namespace faceqr
