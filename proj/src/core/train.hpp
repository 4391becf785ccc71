#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/net.hpp"

namespace faceqr {

enum class IterationUnit { epoch, batch_step };
const char* iteration_unit_name(IterationUnit unit);
IterationUnit iteration_unit_from_name(const std::string& name);

struct TrainingConfig {
  int stage1_iterations = 50;
  int stage2_iterations = 50;
  int batch_size = 64;
  double learning_rate = 0.001;
  double clip_c = 0.05;
  std::uint64_t seed = 1;
  // Weight of the SSIM reconstruction term added to the adversarial
  // generator loss in stage 2. 0 keeps the pure adversarial objective.
  double adversarial_recon_weight = 0.0;
  IterationUnit iteration_unit = IterationUnit::epoch;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  SsimParams stage1_ssim{};
};

void validate_training_config(const TrainingConfig& cfg);

struct TrainingPair {
  FaceImage input;   // variant of unknown quality
  FaceImage target;  // the subject's anchor
};

// One pair per variant; anchors never appear as inputs.
std::vector<TrainingPair> make_training_pairs(const DatasetManifest& manifest);
std::vector<FaceImage> load_anchor_faces(const DatasetManifest& manifest);

struct TrainingLogEntry {
  int iteration = 0;
  int stage = 0;
  std::string loss_name;
  double value = 0.0;
  double wall_clock_seconds = 0.0;  // in-memory only, never serialized
};

struct TrainingLog {
  std::vector<TrainingLogEntry> entries;
};

void write_training_log_csv(const TrainingLog& log, const std::filesystem::path& path);

struct AdamSlotState {
  Tensor m;
  Tensor v;
};

struct AdamState {
  // Four slots per layer: weight, bias, gamma, beta.
  std::vector<std::array<AdamSlotState, 4>> layers;
  std::int64_t step = 0;
};

AdamState make_adam_state(const Parameters& params);
void adam_step(Parameters& params, const Gradients& grads, AdamState& state,
               const TrainingConfig& cfg);

struct Stage1Result {
  Parameters g_params;
  TrainingLog log;
};

Stage1Result train_stage1(const Parameters& g_params, const std::vector<TrainingPair>& pairs,
                          const TrainingConfig& cfg);

// Observers fired inside the stage-2 loop so invariants can be checked at
// every update, not just at the end.
struct Stage2Hooks {
  std::function<void(const Parameters& d_params)> after_d_update;
  std::function<void(const Parameters& d_params)> after_g_update;
};

struct Stage2Result {
  Parameters g_params;
  Parameters d_params;
  TrainingLog log;
};

Stage2Result train_stage2(const Parameters& g_params, const Parameters& d_params,
                          const std::vector<TrainingPair>& pairs,
                          const std::vector<FaceImage>& anchors, const TrainingConfig& cfg,
                          const Stage2Hooks& hooks = {});

}  // namespace faceqr
