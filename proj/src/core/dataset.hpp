#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "core/image.hpp"

namespace faceqr {

// One subject: a high-quality anchor image plus variant images of unknown
// quality. Paths are stored relative to the manifest's directory and double
// as image ids.
struct SubjectRecord {
  std::string subject_id;
  std::string anchor;
  std::vector<std::string> variants;
};

struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<SubjectRecord> subjects;

  std::filesystem::path resolve(const std::string& image_id) const {
    return base_dir / std::filesystem::path(image_id);
  }
};

DatasetManifest load_manifest(const std::filesystem::path& manifest_path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& manifest_path);

// All image ids in file order: per subject, anchor first, then variants.
std::vector<std::string> manifest_image_ids(const DatasetManifest& manifest);

// image id -> subject_id for every image in the manifest.
std::map<std::string, std::string> image_subject_map(const DatasetManifest& manifest);

// Loads an image by id and preprocesses the whole frame to 32x32x3.
FaceImage load_face(const DatasetManifest& manifest, const std::string& image_id);

}  // namespace faceqr
