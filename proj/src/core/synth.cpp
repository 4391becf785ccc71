#include "core/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "core/csvio.hpp"
#include "core/rng.hpp"

namespace faceqr {

namespace {

constexpr int kAnchorSize = 64;

struct Color {
  double r, g, b;
};

struct Canvas {
  std::vector<double> values;  // HWC

  Canvas() : values(static_cast<std::size_t>(kAnchorSize) * kAnchorSize * 3, 0.0) {}

  double& at(int y, int x, int c) {
    return values[static_cast<std::size_t>((y * kAnchorSize + x) * 3 + c)];
  }
};

// Soft-edged ellipse coverage at a pixel center.
double ellipse_alpha(double px, double py, double cx, double cy, double ax, double ay) {
  double dx = (px - cx) / ax;
  double dy = (py - cy) / ay;
  double v = dx * dx + dy * dy;
  double a = (1.12 - v) / 0.24;
  return std::clamp(a, 0.0, 1.0);
}

void paint_ellipse(Canvas& canvas, double cx, double cy, double ax, double ay,
                   const Color& color) {
  int y0 = std::max(0, static_cast<int>(std::floor(cy - ay - 2)));
  int y1 = std::min(kAnchorSize - 1, static_cast<int>(std::ceil(cy + ay + 2)));
  int x0 = std::max(0, static_cast<int>(std::floor(cx - ax - 2)));
  int x1 = std::min(kAnchorSize - 1, static_cast<int>(std::ceil(cx + ax + 2)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double a = ellipse_alpha(x + 0.5, y + 0.5, cx, cy, ax, ay);
      if (a <= 0.0) continue;
      canvas.at(y, x, 0) = canvas.at(y, x, 0) * (1.0 - a) + color.r * a;
      canvas.at(y, x, 1) = canvas.at(y, x, 1) * (1.0 - a) + color.g * a;
      canvas.at(y, x, 2) = canvas.at(y, x, 2) * (1.0 - a) + color.b * a;
    }
}

constexpr DegradationKind kKindCycle[] = {
    DegradationKind::blur,        DegradationKind::downsample,
    DegradationKind::additive_noise, DegradationKind::brightness_shift,
    DegradationKind::occlusion,   DegradationKind::affine_warp,
};

}  // namespace

void validate_synth_config(const SynthConfig& cfg) {
  require(cfg.n_subjects >= 1, ErrorCode::invalid_argument, "n_subjects must be >= 1");
  require(cfg.n_variants >= 1, ErrorCode::invalid_argument, "n_variants must be >= 1");
}

std::vector<DegradationSpec> variant_specs(const SynthConfig& cfg, int subject_index) {
  validate_synth_config(cfg);
  require(subject_index >= 0 && subject_index < cfg.n_subjects, ErrorCode::invalid_argument,
          "subject_index out of range");
  std::vector<DegradationSpec> specs;
  for (int j = 0; j < cfg.n_variants; ++j) {
    DegradationSpec spec;
    spec.kind = kKindCycle[(subject_index + j) % 6];
    spec.severity = cfg.n_variants == 1
                        ? 0.6
                        : 0.15 + 0.75 * static_cast<double>(j) /
                                     static_cast<double>(cfg.n_variants - 1);
    spec.seed = Rng::splitmix(Rng::splitmix(cfg.seed ^ 0xc0bb1e5ULL) ^
                              (static_cast<std::uint64_t>(subject_index) * 7919ULL +
                               static_cast<std::uint64_t>(j) + 1ULL));
    specs.push_back(spec);
  }
  return specs;
}

RawImage render_anchor(const SynthConfig& cfg, int subject_index) {
  validate_synth_config(cfg);
  require(subject_index >= 0 && subject_index < cfg.n_subjects, ErrorCode::invalid_argument,
          "subject_index out of range");
  Rng rng(Rng::splitmix(Rng::splitmix(cfg.seed ^ 0xface5eedULL) ^
                        (static_cast<std::uint64_t>(subject_index) + 1ULL)));
  Canvas canvas;

  // Background gradient.
  Color top{0.55 + 0.35 * rng.uniform(), 0.55 + 0.35 * rng.uniform(),
            0.55 + 0.35 * rng.uniform()};
  Color bottom{0.45 + 0.35 * rng.uniform(), 0.45 + 0.35 * rng.uniform(),
               0.45 + 0.35 * rng.uniform()};
  for (int y = 0; y < kAnchorSize; ++y) {
    double t = static_cast<double>(y) / (kAnchorSize - 1);
    for (int x = 0; x < kAnchorSize; ++x) {
      canvas.at(y, x, 0) = top.r + (bottom.r - top.r) * t;
      canvas.at(y, x, 1) = top.g + (bottom.g - top.g) * t;
      canvas.at(y, x, 2) = top.b + (bottom.b - top.b) * t;
    }
  }

  // Head.
  double cx = 32.0 + rng.uniform(-2.5, 2.5);
  double cy = 34.0 + rng.uniform(-2.5, 2.5);
  double ax = 14.0 + rng.uniform(0.0, 6.0);
  double ay = 18.0 + rng.uniform(0.0, 5.0);
  double skin_r = 0.55 + 0.35 * rng.uniform();
  Color skin{skin_r, skin_r * (0.72 + 0.16 * rng.uniform()), 0.0};
  skin.b = skin.g * (0.68 + 0.2 * rng.uniform());
  paint_ellipse(canvas, cx, cy, ax, ay, skin);

  // Hair cap.
  Color hair{0.05 + 0.3 * rng.uniform(), 0.05 + 0.25 * rng.uniform(),
             0.05 + 0.25 * rng.uniform()};
  double hair_ay = 0.5 * ay + rng.uniform(0.0, 3.0);
  paint_ellipse(canvas, cx, cy - 0.62 * ay, 1.02 * ax, hair_ay, hair);

  // Eyes: sclera, iris, pupil, brow; mirrored left/right.
  double eye_y = cy - 0.18 * ay;
  double eye_dx = ax * (0.42 + 0.1 * rng.uniform());
  double eye_ax = ax * (0.16 + 0.05 * rng.uniform());
  double eye_ay = eye_ax * (0.55 + 0.15 * rng.uniform());
  Color sclera{0.85 + 0.1 * rng.uniform(), 0.85 + 0.1 * rng.uniform(),
               0.85 + 0.1 * rng.uniform()};
  Color iris{0.1 + 0.4 * rng.uniform(), 0.15 + 0.45 * rng.uniform(),
             0.2 + 0.6 * rng.uniform()};
  Color brow{hair.r * 0.8, hair.g * 0.8, hair.b * 0.8};
  double brow_dy = eye_ay * (2.0 + 0.8 * rng.uniform());
  for (double side : {-1.0, 1.0}) {
    double ex = cx + side * eye_dx;
    paint_ellipse(canvas, ex, eye_y, eye_ax, eye_ay, sclera);
    paint_ellipse(canvas, ex, eye_y, 0.55 * eye_ax, 0.55 * eye_ax, iris);
    paint_ellipse(canvas, ex, eye_y, 0.25 * eye_ax, 0.25 * eye_ax, Color{0.02, 0.02, 0.02});
    paint_ellipse(canvas, ex, eye_y - brow_dy, 1.3 * eye_ax, 0.3 * eye_ay, brow);
  }

  // Nose.
  Color nose{skin.r * 0.84, skin.g * 0.84, skin.b * 0.84};
  paint_ellipse(canvas, cx, cy + 0.1 * ay, ax * (0.09 + 0.05 * rng.uniform()), 0.22 * ay, nose);

  // Mouth.
  Color mouth{0.45 + 0.35 * rng.uniform(), 0.15 + 0.15 * rng.uniform(),
              0.15 + 0.15 * rng.uniform()};
  paint_ellipse(canvas, cx, cy + 0.45 * ay, ax * (0.32 + 0.12 * rng.uniform()),
                ay * (0.06 + 0.03 * rng.uniform()), mouth);

  RawImage raw;
  raw.height = kAnchorSize;
  raw.width = kAnchorSize;
  raw.channels = 3;
  raw.pixels.resize(static_cast<std::size_t>(kAnchorSize) * kAnchorSize * 3);
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
    double v = std::clamp(canvas.values[i], 0.0, 1.0);
    raw.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return raw;
}

DatasetManifest synthesize_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  validate_synth_config(cfg);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  require(!ec && std::filesystem::is_directory(out_dir / "images"), ErrorCode::io,
          "cannot create corpus directory: " + (out_dir / "images").string());

  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  std::vector<std::vector<std::string>> degradation_rows;

  for (int s = 0; s < cfg.n_subjects; ++s) {
    char subject_id[16];
    std::snprintf(subject_id, sizeof subject_id, "s%03d", s);
    std::filesystem::path subject_dir = out_dir / "images" / subject_id;
    std::filesystem::create_directories(subject_dir, ec);
    require(!ec && std::filesystem::is_directory(subject_dir), ErrorCode::io,
            "cannot create subject directory: " + subject_dir.string());

    SubjectRecord rec;
    rec.subject_id = subject_id;
    rec.anchor = std::string("images/") + subject_id + "/anchor.png";

    RawImage anchor_raw = render_anchor(cfg, s);
    save_png(anchor_raw, (out_dir / rec.anchor).string());
    FaceImage anchor_face = preprocess(anchor_raw);

    std::vector<DegradationSpec> specs = variant_specs(cfg, s);
    for (int j = 0; j < cfg.n_variants; ++j) {
      std::string name = "v" + std::to_string(j) + "_" +
                         degradation_kind_name(specs[static_cast<std::size_t>(j)].kind) +
                         ".png";
      std::string id = std::string("images/") + subject_id + "/" + name;
      FaceImage variant = degrade(anchor_face, specs[static_cast<std::size_t>(j)]);
      save_png(variant, (out_dir / id).string());
      rec.variants.push_back(id);
      degradation_rows.push_back(
          {id, degradation_kind_name(specs[static_cast<std::size_t>(j)].kind),
           format_double(specs[static_cast<std::size_t>(j)].severity)});
    }
    manifest.subjects.push_back(std::move(rec));
  }

  save_manifest(manifest, out_dir / "manifest.json");
  write_csv(out_dir / "degradations.csv", {"image_id", "kind", "severity"}, degradation_rows);
  return load_manifest(out_dir / "manifest.json");
}

}  // namespace faceqr
