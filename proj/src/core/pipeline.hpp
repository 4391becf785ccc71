#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/dataset.hpp"

namespace faceqr {

// When set, relative output directories are rooted here instead of the
// working directory. Absolute output paths are used as given.
inline constexpr const char* kOutputRootEnv = "FACEQR_OUT_ROOT";

struct RunContext {
  RunConfig config;
  std::filesystem::path config_path;  // source config file, empty when built in memory
  std::filesystem::path config_dir;   // directory the config file lives in
  std::filesystem::path output_dir;   // resolved, created, writable
};

// Loads the config, applies overrides, resolves the output directory
// (creating it), and drops a verbatim copy of the config plus a fully
// resolved snapshot into it for provenance.
RunContext make_run_context(const std::filesystem::path& config_path,
                            const std::optional<std::uint64_t>& seed_override,
                            const std::optional<std::string>& output_override);

// Same resolution without a config file on disk; nothing is copied.
RunContext make_run_context(const RunConfig& config);

std::filesystem::path resolve_manifest_path(const RunContext& ctx);
std::filesystem::path resolve_checkpoint_path(const RunContext& ctx, const std::string& name);

struct SynthResult {
  std::filesystem::path manifest_path;
  int n_subjects = 0;
  int n_images = 0;
};

SynthResult run_synth(const RunContext& ctx);

struct TrainResult {
  std::filesystem::path generator_path;
  std::filesystem::path discriminator_path;
  std::filesystem::path log_path;
};

TrainResult run_train(const RunContext& ctx);

struct ScoreResult {
  std::filesystem::path scores_path;
  int n_rows = 0;
  int n_errors = 0;
};

// Scores the manifest corpus when images is empty, otherwise the listed
// image files (ids are the paths as given).
ScoreResult run_score(const RunContext& ctx, const std::vector<std::string>& images);

struct ErcResult {
  std::filesystem::path similarities_path;
  std::vector<std::filesystem::path> curve_csvs;  // q_mse, q_ssim, q_disc, perfect
  std::vector<std::filesystem::path> plots;
  double threshold = 0.0;
  double initial_fnmr = 0.0;
};

// Error-versus-reject curves for all three quality measures plus the
// max(initial_fnmr - r, 0) reference. Missing inputs are derived: scores
// default to the run's scores.csv, similarities are computed with the
// bundled comparator and written next to the curves.
ErcResult run_erc(const RunContext& ctx,
                  const std::optional<std::filesystem::path>& scores_csv,
                  const std::optional<std::filesystem::path>& similarities_csv);

struct DetResult {
  std::vector<std::filesystem::path> curve_csvs;  // low, medium, high, all
  std::filesystem::path plot_path;
  std::filesystem::path eer_path;
  std::vector<double> eer;  // low, medium, high, all
};

// DET curves for the low/medium/high q_ssim tertiles (pairs whose members
// both fall in the tertile) plus the all-data curve.
DetResult run_det(const RunContext& ctx,
                  const std::optional<std::filesystem::path>& scores_csv,
                  const std::optional<std::filesystem::path>& similarities_csv);

}  // namespace faceqr
