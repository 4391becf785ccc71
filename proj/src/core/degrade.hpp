#pragma once

#include <cstdint>
#include <string>

#include "core/image.hpp"

namespace faceqr {

enum class DegradationKind {
  blur,
  downsample,
  additive_noise,
  brightness_shift,
  occlusion,
  affine_warp,
};

const char* degradation_kind_name(DegradationKind kind);
DegradationKind degradation_kind_from_name(const std::string& name);

struct DegradationSpec {
  DegradationKind kind = DegradationKind::blur;
  double severity = 0.0;  // in [0,1]; 0 is the identity transform
  std::uint64_t seed = 0;
};

// Deterministic pure function: equal (face, spec) give bit-equal outputs.
// Output values are clamped to [0,1].
FaceImage degrade(const FaceImage& face, const DegradationSpec& spec);

}  // namespace faceqr
