#include "core/degrade.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "core/rng.hpp"

namespace faceqr {

namespace {

constexpr int kN = FaceImage::kSize;
constexpr double kPi = 3.141592653589793238462643383279;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

FaceImage gaussian_blur(const FaceImage& face, double severity) {
  const double sigma = 2.0 * severity;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double w = std::exp(-0.5 * (i / sigma) * (i / sigma));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double& w : kernel) w /= sum;

  // Separable pass with clamp-to-edge sampling.
  FaceImage horiz = face;
  for (int y = 0; y < kN; ++y)
    for (int x = 0; x < kN; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          int sx = std::clamp(x + i, 0, kN - 1);
          acc += kernel[static_cast<std::size_t>(i + radius)] * face.at(y, sx, c);
        }
        horiz.at(y, x, c) = acc;
      }
  FaceImage out = face;
  for (int y = 0; y < kN; ++y)
    for (int x = 0; x < kN; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          int sy = std::clamp(y + i, 0, kN - 1);
          acc += kernel[static_cast<std::size_t>(i + radius)] * horiz.at(sy, x, c);
        }
        out.at(y, x, c) = clamp01(acc);
      }
  return out;
}

FaceImage down_up(const FaceImage& face, double severity) {
  int target = std::max(4, static_cast<int>(std::lround(kN * (1.0 - severity))));
  if (target >= kN) return face;
  auto small = resize_bilinear(face.values, kN, kN, 3, target, target);
  FaceImage out = face;
  out.values = resize_bilinear(small, target, target, 3, kN, kN);
  for (double& v : out.values) v = clamp01(v);
  return out;
}

FaceImage add_noise(const FaceImage& face, double severity, Rng& rng) {
  const double stddev = 0.25 * severity;
  FaceImage out = face;
  for (double& v : out.values) v = clamp01(v + stddev * rng.normal());
  return out;
}

FaceImage shift_brightness(const FaceImage& face, double severity, Rng& rng) {
  double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
  double shift = sign * 0.5 * severity;
  FaceImage out = face;
  for (double& v : out.values) v = clamp01(v + shift);
  return out;
}

FaceImage occlude(const FaceImage& face, double severity, Rng& rng) {
  // Square covering severity * 50% of the image area, filled with mid-gray.
  int side = static_cast<int>(std::lround(kN * std::sqrt(0.5 * severity)));
  side = std::min(side, kN);
  FaceImage out = face;
  if (side <= 0) return out;
  int x0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(kN - side + 1)));
  int y0 = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(kN - side + 1)));
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = 0.5;
  return out;
}

FaceImage warp_affine(const FaceImage& face, double severity, Rng& rng) {
  double angle = rng.uniform(-30.0 * severity, 30.0 * severity) * kPi / 180.0;
  double tx = rng.uniform(-4.0 * severity, 4.0 * severity);
  double ty = rng.uniform(-4.0 * severity, 4.0 * severity);
  const double cx = (kN - 1) / 2.0;
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);

  FaceImage out = face;
  for (int y = 0; y < kN; ++y)
    for (int x = 0; x < kN; ++x) {
      // Inverse map: undo translation, then rotate back around the center.
      double dx = x - tx - cx;
      double dy = y - ty - cx;
      double sx = ca * dx + sa * dy + cx;
      double sy = -sa * dx + ca * dy + cx;
      sx = std::clamp(sx, 0.0, static_cast<double>(kN - 1));
      sy = std::clamp(sy, 0.0, static_cast<double>(kN - 1));
      int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      int x1 = std::min(x0 + 1, kN - 1), y1 = std::min(y0 + 1, kN - 1);
      double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < 3; ++c) {
        double top = face.at(y0, x0, c) + fx * (face.at(y0, x1, c) - face.at(y0, x0, c));
        double bot = face.at(y1, x0, c) + fx * (face.at(y1, x1, c) - face.at(y1, x0, c));
        out.at(y, x, c) = clamp01(top + fy * (bot - top));
      }
    }
  return out;
}

}  // namespace

const char* degradation_kind_name(DegradationKind kind) {
  switch (kind) {
    case DegradationKind::blur: return "blur";
    case DegradationKind::downsample: return "downsample";
    case DegradationKind::additive_noise: return "additive_noise";
    case DegradationKind::brightness_shift: return "brightness_shift";
    case DegradationKind::occlusion: return "occlusion";
    case DegradationKind::affine_warp: return "affine_warp";
  }
  raise(ErrorCode::internal, "unknown degradation kind");
}

DegradationKind degradation_kind_from_name(const std::string& name) {
  for (auto k : {DegradationKind::blur, DegradationKind::downsample,
                 DegradationKind::additive_noise, DegradationKind::brightness_shift,
                 DegradationKind::occlusion, DegradationKind::affine_warp})
    if (name == degradation_kind_name(k)) return k;
  raise(ErrorCode::invalid_argument, "unknown degradation kind: " + name);
}

FaceImage degrade(const FaceImage& face, const DegradationSpec& spec) {
  require(spec.severity >= 0.0 && spec.severity <= 1.0,
          ErrorCode::invalid_argument, "degradation severity must be in [0,1]");
  FaceImage out;
  if (spec.severity == 0.0) {
    out = face;
  } else {
    Rng rng(Rng::splitmix(spec.seed));
    switch (spec.kind) {
      case DegradationKind::blur: out = gaussian_blur(face, spec.severity); break;
      case DegradationKind::downsample: out = down_up(face, spec.severity); break;
      case DegradationKind::additive_noise: out = add_noise(face, spec.severity, rng); break;
      case DegradationKind::brightness_shift: out = shift_brightness(face, spec.severity, rng); break;
      case DegradationKind::occlusion: out = occlude(face, spec.severity, rng); break;
      case DegradationKind::affine_warp: out = warp_affine(face, spec.severity, rng); break;
    }
  }
  out.provenance = Provenance::synthetic;
  return out;
}

}  // namespace faceqr
