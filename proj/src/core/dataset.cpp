#include "core/dataset.hpp"

#include <fstream>
#include <json.hpp>
#include <set>

#include "core/common.hpp"

namespace faceqr {

namespace {

using nlohmann::json;

void check_unique_id(std::set<std::string>& seen, const std::string& id,
                     const std::string& subject_id) {
  require(seen.insert(id).second, ErrorCode::format,
          "manifest: duplicate image path \"" + id + "\" (subject \"" + subject_id + "\")");
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream f(manifest_path);
  require(f.good(), ErrorCode::io, "cannot open manifest: " + manifest_path.string());
  json j = json::parse(f, nullptr, false);
  require(!j.is_discarded(), ErrorCode::format,
          "manifest is not valid JSON: " + manifest_path.string());
  require(j.is_array(), ErrorCode::format, "manifest must be a top-level JSON list of subjects");

  DatasetManifest manifest;
  manifest.base_dir = manifest_path.has_parent_path() ? manifest_path.parent_path()
                                                      : std::filesystem::path(".");
  std::set<std::string> subject_ids;
  std::set<std::string> image_ids;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& js = j[i];
    auto fail = [&](const std::string& why) {
      raise(ErrorCode::format, "manifest subject entry " + std::to_string(i) + ": " + why);
    };
    if (!js.is_object()) fail("must be a JSON object");
    if (!js.contains("subject_id") || !js.at("subject_id").is_string() ||
        js.at("subject_id").get<std::string>().empty())
      fail("missing non-empty string \"subject_id\"");
    SubjectRecord rec;
    rec.subject_id = js.at("subject_id").get<std::string>();
    if (!subject_ids.insert(rec.subject_id).second)
      fail("duplicate subject_id \"" + rec.subject_id + "\"");
    if (!js.contains("anchor") || !js.at("anchor").is_string() ||
        js.at("anchor").get<std::string>().empty())
      fail("subject \"" + rec.subject_id + "\" is missing a non-empty \"anchor\" path");
    rec.anchor = js.at("anchor").get<std::string>();
    check_unique_id(image_ids, rec.anchor, rec.subject_id);
    if (!js.contains("variants") || !js.at("variants").is_array())
      fail("subject \"" + rec.subject_id + "\" is missing a \"variants\" list");
    for (const json& v : js.at("variants")) {
      if (!v.is_string() || v.get<std::string>().empty())
        fail("subject \"" + rec.subject_id + "\" has a non-string or empty variant path");
      rec.variants.push_back(v.get<std::string>());
      check_unique_id(image_ids, rec.variants.back(), rec.subject_id);
    }
    manifest.subjects.push_back(std::move(rec));
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& manifest_path) {
  json j = json::array();
  for (const SubjectRecord& rec : manifest.subjects) {
    json js;
    js["subject_id"] = rec.subject_id;
    js["anchor"] = rec.anchor;
    js["variants"] = rec.variants;
    j.push_back(js);
  }
  std::ofstream f(manifest_path, std::ios::trunc);
  require(f.good(), ErrorCode::io, "cannot write manifest: " + manifest_path.string());
  f << j.dump(2) << '\n';
  require(f.good(), ErrorCode::io, "failed writing manifest: " + manifest_path.string());
}

std::vector<std::string> manifest_image_ids(const DatasetManifest& manifest) {
  std::vector<std::string> ids;
  for (const SubjectRecord& rec : manifest.subjects) {
    ids.push_back(rec.anchor);
    for (const std::string& v : rec.variants) ids.push_back(v);
  }
  return ids;
}

std::map<std::string, std::string> image_subject_map(const DatasetManifest& manifest) {
  std::map<std::string, std::string> m;
  for (const SubjectRecord& rec : manifest.subjects) {
    m[rec.anchor] = rec.subject_id;
    for (const std::string& v : rec.variants) m[v] = rec.subject_id;
  }
  return m;
}

FaceImage load_face(const DatasetManifest& manifest, const std::string& image_id) {
  RawImage raw = load_image(manifest.resolve(image_id));
  return preprocess(raw);
}

}  // namespace faceqr
