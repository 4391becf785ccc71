#include "core/image.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace faceqr {

RawImage load_image(const std::string& path) {
  if (!std::filesystem::exists(path))
    raise(ErrorCode::io, "image file not found: " + path);
  cv::Mat mat = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (mat.empty()) raise(ErrorCode::decode, "failed to decode image: " + path);
  if (mat.depth() != CV_8U)
    raise(ErrorCode::decode, "not an 8-bit image: " + path);
  if (mat.channels() != 3)
    raise(ErrorCode::decode, "expected 3 channels (RGB), got " +
                                 std::to_string(mat.channels()) + ": " + path);

  RawImage img;
  img.height = mat.rows;
  img.width = mat.cols;
  img.channels = 3;
  img.pixels.resize(static_cast<std::size_t>(mat.rows) * mat.cols * 3);
  // OpenCV decodes as BGR.
  for (int y = 0; y < mat.rows; ++y) {
    const cv::Vec3b* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < mat.cols; ++x) {
      img.at(y, x, 0) = row[x][2];
      img.at(y, x, 1) = row[x][1];
      img.at(y, x, 2) = row[x][0];
    }
  }
  return img;
}

void save_png(const RawImage& img, const std::string& path) {
  cv::Mat mat(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    cv::Vec3b* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x) {
      row[x][0] = img.at(y, x, 2);
      row[x][1] = img.at(y, x, 1);
      row[x][2] = img.at(y, x, 0);
    }
  }
  if (!cv::imwrite(path, mat))
    raise(ErrorCode::io, "failed to write PNG: " + path);
}

void save_png(const FaceImage& img, const std::string& path) {
  RawImage raw;
  raw.height = FaceImage::kSize;
  raw.width = FaceImage::kSize;
  raw.channels = 3;
  raw.pixels.resize(FaceImage::kValueCount);
  for (std::size_t i = 0; i < img.values.size(); ++i) {
    double v = std::clamp(img.values[i], 0.0, 1.0);
    raw.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  save_png(raw, path);
}

namespace {

inline double lerp_exact(double a, double b, double t) {
  return a + t * (b - a);
}

}  // namespace

std::vector<double> resize_bilinear(const std::vector<double>& src, int src_h,
                                    int src_w, int channels, int dst_h,
                                    int dst_w) {
  require(src_h >= 1 && src_w >= 1 && dst_h >= 1 && dst_w >= 1,
          ErrorCode::invalid_argument, "resize dimensions must be positive");
  require(src.size() ==
              static_cast<std::size_t>(src_h) * src_w * channels,
          ErrorCode::shape, "resize source size mismatch");
  std::vector<double> dst(static_cast<std::size_t>(dst_h) * dst_w * channels);
  const double sy = static_cast<double>(src_h) / dst_h;
  const double sx = static_cast<double>(src_w) / dst_w;
  for (int oy = 0; oy < dst_h; ++oy) {
    double fy = (oy + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(src_h - 1));
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, src_h - 1);
    double ty = fy - y0;
    for (int ox = 0; ox < dst_w; ++ox) {
      double fx = (ox + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(src_w - 1));
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, src_w - 1);
      double tx = fx - x0;
      for (int c = 0; c < channels; ++c) {
        auto s = [&](int y, int x) {
          return src[static_cast<std::size_t>((y * src_w + x) * channels + c)];
        };
        double top = lerp_exact(s(y0, x0), s(y0, x1), tx);
        double bot = lerp_exact(s(y1, x0), s(y1, x1), tx);
        dst[static_cast<std::size_t>((oy * dst_w + ox) * channels + c)] =
            lerp_exact(top, bot, ty);
      }
    }
  }
  return dst;
}

FaceImage preprocess(const RawImage& raw, const BoundingBox& box) {
  require(raw.channels == 3, ErrorCode::shape, "raw image must be RGB");
  require(box.w >= 8 && box.h >= 8, ErrorCode::invalid_argument,
          "bounding box must be at least 8x8");
  require(box.x >= 0 && box.y >= 0 && box.x + box.w <= raw.width &&
              box.y + box.h <= raw.height,
          ErrorCode::invalid_argument, "bounding box outside image");

  std::vector<double> crop(static_cast<std::size_t>(box.h) * box.w * 3);
  for (int y = 0; y < box.h; ++y)
    for (int x = 0; x < box.w; ++x)
      for (int c = 0; c < 3; ++c)
        crop[static_cast<std::size_t>((y * box.w + x) * 3 + c)] =
            raw.at(box.y + y, box.x + x, c) / 255.0;

  FaceImage out;
  out.values = resize_bilinear(crop, box.h, box.w, 3, FaceImage::kSize,
                               FaceImage::kSize);
  out.provenance = Provenance::original;
  return out;
}

FaceImage preprocess(const RawImage& raw) {
  return preprocess(raw, BoundingBox{0, 0, raw.width, raw.height});
}

}  // namespace faceqr
