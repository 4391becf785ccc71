#include "faceqr.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/common.hpp"
#include "core/image.hpp"
#include "core/net.hpp"
#include "core/pipeline.hpp"
#include "core/scoring.hpp"

namespace {

thread_local std::string g_last_error;

fqr_status status_of(faceqr::ErrorCode code) {
  switch (code) {
    case faceqr::ErrorCode::invalid_argument:
      return FQR_ERR_INVALID_ARGUMENT;
    case faceqr::ErrorCode::io:
      return FQR_ERR_IO;
    case faceqr::ErrorCode::decode:
      return FQR_ERR_DECODE;
    case faceqr::ErrorCode::format:
      return FQR_ERR_FORMAT;
    case faceqr::ErrorCode::shape:
      return FQR_ERR_SHAPE;
    case faceqr::ErrorCode::diverged:
      return FQR_ERR_DIVERGED;
    case faceqr::ErrorCode::internal:
      return FQR_ERR_INTERNAL;
  }
  return FQR_ERR_INTERNAL;
}

fqr_status fail(fqr_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
fqr_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return FQR_OK;
  } catch (const faceqr::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(FQR_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(FQR_ERR_INTERNAL, e.what());
  }
}

fqr_status require_arg(bool ok, const std::string& message) {
  return ok ? FQR_OK : fail(FQR_ERR_INVALID_ARGUMENT, message);
}

}  // namespace

struct fqr_engine {
  faceqr::Parameters generator;
  faceqr::Parameters discriminator;
  faceqr::SsimParams scoring_ssim;
};

struct fqr_run {
  faceqr::RunContext ctx;
  std::string output_dir;
};

extern "C" {

const char* fqr_version(void) { return "1.0.0"; }

const char* fqr_last_error(void) { return g_last_error.c_str(); }

int fqr_face_size(void) { return faceqr::FaceImage::kSize; }

fqr_status fqr_engine_open(const char* generator_checkpoint,
                           const char* discriminator_checkpoint,
                           fqr_engine** out_engine) {
  if (fqr_status s = require_arg(out_engine != nullptr, "out_engine is NULL")) return s;
  *out_engine = nullptr;
  if (fqr_status s = require_arg(generator_checkpoint != nullptr &&
                                     discriminator_checkpoint != nullptr,
                                 "checkpoint path is NULL"))
    return s;
  return guarded([&] {
    auto engine = std::make_unique<fqr_engine>();
    engine->generator = faceqr::load_checkpoint(generator_checkpoint);
    engine->discriminator = faceqr::load_checkpoint(discriminator_checkpoint);
    faceqr::validate_generator_spec(engine->generator.spec);
    faceqr::validate_discriminator_spec(engine->discriminator.spec);
    engine->scoring_ssim = faceqr::default_scoring_ssim();
    *out_engine = engine.release();
  });
}

fqr_status fqr_engine_score_file(fqr_engine* engine, const char* image_path,
                                 double* q_mse, double* q_ssim, double* q_disc) {
  if (fqr_status s = require_arg(engine != nullptr, "engine is NULL")) return s;
  if (fqr_status s = require_arg(image_path != nullptr, "image_path is NULL")) return s;
  return guarded([&] {
    faceqr::FaceImage face = faceqr::preprocess(faceqr::load_image(image_path));
    faceqr::QualityReport report = faceqr::score_quality(
        engine->generator, engine->discriminator, face, engine->scoring_ssim);
    if (q_mse != nullptr) *q_mse = report.q_mse;
    if (q_ssim != nullptr) *q_ssim = report.q_ssim;
    if (q_disc != nullptr) *q_disc = report.q_disc;
  });
}

fqr_status fqr_engine_score_rgb(fqr_engine* engine, const double* rgb,
                                double* q_mse, double* q_ssim, double* q_disc) {
  if (fqr_status s = require_arg(engine != nullptr, "engine is NULL")) return s;
  if (fqr_status s = require_arg(rgb != nullptr, "rgb is NULL")) return s;
  return guarded([&] {
    faceqr::FaceImage face;
    std::memcpy(face.values.data(), rgb, sizeof(double) * faceqr::FaceImage::kValueCount);
    for (double v : face.values)
      faceqr::require(v >= 0.0 && v <= 1.0, faceqr::ErrorCode::invalid_argument,
                      "rgb values must lie in [0,1]");
    faceqr::QualityReport report = faceqr::score_quality(
        engine->generator, engine->discriminator, face, engine->scoring_ssim);
    if (q_mse != nullptr) *q_mse = report.q_mse;
    if (q_ssim != nullptr) *q_ssim = report.q_ssim;
    if (q_disc != nullptr) *q_disc = report.q_disc;
  });
}

fqr_status fqr_engine_restore_rgb(fqr_engine* engine, const double* rgb,
                                  double* out_rgb) {
  if (fqr_status s = require_arg(engine != nullptr, "engine is NULL")) return s;
  if (fqr_status s = require_arg(rgb != nullptr && out_rgb != nullptr,
                                 "rgb buffer is NULL"))
    return s;
  return guarded([&] {
    faceqr::FaceImage face;
    std::memcpy(face.values.data(), rgb, sizeof(double) * faceqr::FaceImage::kValueCount);
    for (double v : face.values)
      faceqr::require(v >= 0.0 && v <= 1.0, faceqr::ErrorCode::invalid_argument,
                      "rgb values must lie in [0,1]");
    faceqr::FaceImage restored = faceqr::restore(engine->generator, face);
    std::memcpy(out_rgb, restored.values.data(),
                sizeof(double) * faceqr::FaceImage::kValueCount);
  });
}

void fqr_engine_close(fqr_engine* engine) { delete engine; }

fqr_status fqr_run_open(const char* config_path, const char* output_dir,
                        int use_seed, uint64_t seed, fqr_run** out_run) {
  if (fqr_status s = require_arg(out_run != nullptr, "out_run is NULL")) return s;
  *out_run = nullptr;
  if (fqr_status s = require_arg(config_path != nullptr, "config_path is NULL")) return s;
  return guarded([&] {
    std::optional<std::uint64_t> seed_override;
    if (use_seed != 0) seed_override = seed;
    std::optional<std::string> out_override;
    if (output_dir != nullptr) out_override = std::string(output_dir);
    auto run = std::make_unique<fqr_run>();
    run->ctx = faceqr::make_run_context(config_path, seed_override, out_override);
    run->output_dir = run->ctx.output_dir.string();
    *out_run = run.release();
  });
}

const char* fqr_run_output_dir(const fqr_run* run) {
  return run != nullptr ? run->output_dir.c_str() : "";
}

fqr_status fqr_run_synth(fqr_run* run) {
  if (fqr_status s = require_arg(run != nullptr, "run is NULL")) return s;
  return guarded([&] { faceqr::run_synth(run->ctx); });
}

fqr_status fqr_run_train(fqr_run* run) {
  if (fqr_status s = require_arg(run != nullptr, "run is NULL")) return s;
  return guarded([&] { faceqr::run_train(run->ctx); });
}

fqr_status fqr_run_score(fqr_run* run, const char* const* image_paths,
                         size_t n_images) {
  if (fqr_status s = require_arg(run != nullptr, "run is NULL")) return s;
  if (fqr_status s = require_arg(n_images == 0 || image_paths != nullptr,
                                 "image_paths is NULL"))
    return s;
  return guarded([&] {
    std::vector<std::string> images;
    for (size_t i = 0; i < n_images; ++i) {
      faceqr::require(image_paths[i] != nullptr, faceqr::ErrorCode::invalid_argument,
                      "image path is NULL");
      images.emplace_back(image_paths[i]);
    }
    faceqr::run_score(run->ctx, images);
  });
}

fqr_status fqr_run_erc(fqr_run* run, const char* scores_csv,
                       const char* similarities_csv) {
  if (fqr_status s = require_arg(run != nullptr, "run is NULL")) return s;
  return guarded([&] {
    std::optional<std::filesystem::path> scores;
    if (scores_csv != nullptr) scores = std::filesystem::path(scores_csv);
    std::optional<std::filesystem::path> sims;
    if (similarities_csv != nullptr) sims = std::filesystem::path(similarities_csv);
    faceqr::run_erc(run->ctx, scores, sims);
  });
}

fqr_status fqr_run_det(fqr_run* run, const char* scores_csv,
                       const char* similarities_csv) {
  if (fqr_status s = require_arg(run != nullptr, "run is NULL")) return s;
  return guarded([&] {
    std::optional<std::filesystem::path> scores;
    if (scores_csv != nullptr) scores = std::filesystem::path(scores_csv);
    std::optional<std::filesystem::path> sims;
    if (similarities_csv != nullptr) sims = std::filesystem::path(similarities_csv);
    faceqr::run_det(run->ctx, scores, sims);
  });
}

void fqr_run_close(fqr_run* run) { delete run; }

}  // extern "C"
