#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "core/dataset.hpp"
#include "core/degrade.hpp"

namespace faceqr {

struct SynthConfig {
  int n_subjects = 50;
  int n_variants = 6;
  std::uint64_t seed = 1;
};

void validate_synth_config(const SynthConfig& cfg);

// Degradation plan for one subject: severities span a fixed grid while the
// degradation kind rotates with the subject index, so severity and kind are
// decorrelated across the corpus.
std::vector<DegradationSpec> variant_specs(const SynthConfig& cfg, int subject_index);

// Procedural face-like composite (oval head, eyes, nose, mouth) with
// per-subject geometry and colors; 64x64 8-bit RGB. Pure in (cfg, index).
RawImage render_anchor(const SynthConfig& cfg, int subject_index);

// Writes images/ and manifest.json under out_dir, plus degradations.csv
// recording each variant's kind and severity. Returns the loaded manifest.
DatasetManifest synthesize_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace faceqr
