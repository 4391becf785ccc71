#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "core/dataset.hpp"

namespace faceqr {

// Pluggable face comparator: higher similarity = more similar. Must be
// symmetric and deterministic.
using Comparator = std::function<double(const FaceImage&, const FaceImage&)>;

// Training-free baseline: bilinear downsample to 8x8x3, mean-variance
// normalize, cosine similarity.
Comparator default_comparator();

struct VerificationPair {
  std::string id_a;
  std::string id_b;
  bool mated = false;
  double similarity = 0.0;
};

// All within-subject mated pairs plus a seeded sample of cross-subject
// non-mated pairs (n per image). Similarities are left at 0; fill them with
// compute_similarities or from a similarity CSV.
std::vector<VerificationPair> build_pairs(const DatasetManifest& manifest,
                                          int n_nonmated_per_image, std::uint64_t seed);

void compute_similarities(std::vector<VerificationPair>& pairs,
                          const std::map<std::string, FaceImage>& images,
                          const Comparator& comparator);

void write_similarity_csv(const std::vector<VerificationPair>& pairs,
                          const std::filesystem::path& path);
std::vector<VerificationPair> read_similarity_csv(const std::filesystem::path& path);

struct CalibratedThreshold {
  double threshold = 0.0;
  double achieved_fnmr = 0.0;
};

// Smallest threshold t such that the fraction of similarities strictly below
// t is the largest achievable value not exceeding target_fnmr.
CalibratedThreshold calibrate_threshold(const std::vector<double>& mated_similarities,
                                        double target_fnmr);

struct ErcCurve {
  std::vector<double> fractions;
  std::vector<double> fnmr;
  double threshold = 0.0;
  double initial_fnmr = 0.0;
};

// Error-versus-reject: for each rejection fraction r, drop the floor(r*n)
// lowest-quality images (ties broken by id), then FNMR over surviving mated
// pairs. A mated pair fails when similarity < threshold.
ErcCurve compute_erc(const std::vector<VerificationPair>& pairs,
                     const std::map<std::string, double>& image_qualities, double threshold,
                     const std::vector<double>& fractions);

// Reference curve max(initial_fnmr - r, 0).
ErcCurve perfect_curve(double initial_fnmr, const std::vector<double>& fractions);

struct DetCurve {
  std::vector<double> thresholds;
  std::vector<double> fmr;   // P(non-mated similarity >= t)
  std::vector<double> fnmr;  // P(mated similarity < t)
};

DetCurve compute_det(const std::vector<VerificationPair>& pairs,
                     const std::vector<double>& thresholds);

// Sorted unique similarity values plus one value above the maximum, so the
// swept curve spans both endpoints.
std::vector<double> det_threshold_sweep(const std::vector<VerificationPair>& pairs);

double equal_error_rate(const std::vector<VerificationPair>& pairs);

// Ascending-quality split into k contiguous, size-balanced groups; the
// remainder goes to the lowest bins. groups.front() is the lowest-quality bin.
std::vector<std::vector<std::string>> bin_by_quality(
    const std::map<std::string, double>& image_qualities, int k = 3);

}  // namespace faceqr
