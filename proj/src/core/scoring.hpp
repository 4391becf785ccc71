#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/net.hpp"

namespace faceqr {

// The three quality measures for one image, all oriented so that higher
// means better estimated quality.
struct QualityReport {
  double q_mse = 0.0;   // 1 - mse(input, restored)
  double q_ssim = 0.0;  // ssim(input, restored)
  double q_disc = 0.0;  // discriminator score of the restored image
  FaceImage restored;
};

SsimParams default_scoring_ssim();

FaceImage restore(const Parameters& g_params, const FaceImage& face);
std::vector<FaceImage> restore_batch(const Parameters& g_params,
                                     const std::vector<FaceImage>& faces);

QualityReport score_quality(const Parameters& g_params, const Parameters& d_params,
                            const FaceImage& face, const SsimParams& scoring_ssim);

struct ScoreRow {
  std::string image_id;
  bool ok = false;
  std::string error;  // set when ok is false
  double q_mse = 0.0;
  double q_ssim = 0.0;
  double q_disc = 0.0;
};

// One row per image in manifest order; unreadable images yield error rows
// and the run continues.
std::vector<ScoreRow> score_corpus(const Parameters& g_params, const Parameters& d_params,
                                   const DatasetManifest& manifest,
                                   const SsimParams& scoring_ssim);

std::vector<ScoreRow> score_images(const Parameters& g_params, const Parameters& d_params,
                                   const std::vector<std::pair<std::string, std::filesystem::path>>& images,
                                   const SsimParams& scoring_ssim);

void write_score_csv(const std::vector<ScoreRow>& rows, const std::filesystem::path& path);

// Reads one measure column ("q_mse", "q_ssim" or "q_disc") into an
// image_id -> quality map; error rows are skipped.
std::map<std::string, double> read_quality_map(const std::filesystem::path& score_csv,
                                               const std::string& measure);

}  // namespace faceqr
