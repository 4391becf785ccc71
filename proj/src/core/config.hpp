#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "core/metrics.hpp"
#include "core/net.hpp"
#include "core/synth.hpp"
#include "core/train.hpp"

namespace faceqr {

struct EvaluationConfig {
  double target_fnmr = 0.10;
  std::vector<double> fractions;  // defaults to 0, 0.05, ..., 0.95
  int n_nonmated_per_image = 4;
};

std::vector<double> default_rejection_fractions();

struct RunConfig {
  // Input dataset. Relative paths resolve against the config file's
  // directory; when empty, commands fall back to <output_dir>/dataset/manifest.json
  // (where the synth command writes it).
  std::string manifest;

  // Checkpoint paths; relative paths resolve against the output directory.
  std::string generator_checkpoint = "generator.ckpt";
  std::string discriminator_checkpoint = "discriminator.ckpt";

  TrainingConfig training;
  SsimParams scoring_ssim;  // windowed by default
  EvaluationConfig evaluation;
  SynthConfig synth;

  std::string output_dir = "out";
  std::uint64_t seed = 1;

  // "default" or "small"; explicit specs win when present.
  std::string model_preset = "default";
  std::optional<NetworkSpec> generator_spec;
  std::optional<NetworkSpec> discriminator_spec;
};

RunConfig default_run_config();
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json_string(const RunConfig& cfg);

NetworkSpec generator_spec_for(const RunConfig& cfg);
NetworkSpec discriminator_spec_for(const RunConfig& cfg);

const char* ssim_window_name(SsimWindow window);
SsimWindow ssim_window_from_name(const std::string& name);

}  // namespace faceqr
