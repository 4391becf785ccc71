#include "core/scoring.hpp"

#include "core/csvio.hpp"

namespace faceqr {

namespace {

constexpr std::size_t kScoreBatch = 64;

ScoreRow score_one(const Parameters& g_params, const Parameters& d_params,
                   const std::string& image_id, const FaceImage& face,
                   const SsimParams& scoring_ssim) {
  ScoreRow row;
  row.image_id = image_id;
  QualityReport report = score_quality(g_params, d_params, face, scoring_ssim);
  row.ok = true;
  row.q_mse = report.q_mse;
  row.q_ssim = report.q_ssim;
  row.q_disc = report.q_disc;
  return row;
}

}  // namespace

SsimParams default_scoring_ssim() {
  SsimParams p;
  p.window = SsimWindow::gaussian_11x11;
  return p;
}

FaceImage restore(const Parameters& g_params, const FaceImage& face) {
  return restore_batch(g_params, {face}).front();
}

std::vector<FaceImage> restore_batch(const Parameters& g_params,
                                     const std::vector<FaceImage>& faces) {
  return generator_forward(g_params, faces, Mode::eval);
}

QualityReport score_quality(const Parameters& g_params, const Parameters& d_params,
                            const FaceImage& face, const SsimParams& scoring_ssim) {
  QualityReport report;
  report.restored = restore(g_params, face);
  report.q_mse = 1.0 - mse(face, report.restored);
  report.q_ssim = ssim(face, report.restored, scoring_ssim);
  report.q_disc = discriminator_forward(d_params, {report.restored}, Mode::eval).front();
  return report;
}

std::vector<ScoreRow> score_corpus(const Parameters& g_params, const Parameters& d_params,
                                   const DatasetManifest& manifest,
                                   const SsimParams& scoring_ssim) {
  std::vector<std::pair<std::string, std::filesystem::path>> images;
  for (const std::string& id : manifest_image_ids(manifest))
    images.emplace_back(id, manifest.resolve(id));
  return score_images(g_params, d_params, images, scoring_ssim);
}

std::vector<ScoreRow> score_images(
    const Parameters& g_params, const Parameters& d_params,
    const std::vector<std::pair<std::string, std::filesystem::path>>& images,
    const SsimParams& scoring_ssim) {
  std::vector<ScoreRow> rows(images.size());

  // Scoring is per image, but restorations and discriminator scores run in
  // batches for throughput.
  std::vector<std::size_t> pending;
  std::vector<FaceImage> faces;
  auto flush = [&]() {
    if (pending.empty()) return;
    std::vector<FaceImage> restored = restore_batch(g_params, faces);
    std::vector<double> disc = discriminator_forward(d_params, restored, Mode::eval);
    for (std::size_t k = 0; k < pending.size(); ++k) {
      ScoreRow& row = rows[pending[k]];
      row.ok = true;
      row.q_mse = 1.0 - mse(faces[k], restored[k]);
      row.q_ssim = ssim(faces[k], restored[k], scoring_ssim);
      row.q_disc = disc[k];
    }
    pending.clear();
    faces.clear();
  };

  for (std::size_t i = 0; i < images.size(); ++i) {
    rows[i].image_id = images[i].first;
    try {
      RawImage raw = load_image(images[i].second);
      faces.push_back(preprocess(raw));
      pending.push_back(i);
      if (pending.size() == kScoreBatch) flush();
    } catch (const Error& e) {
      rows[i].ok = false;
      rows[i].error = e.what();
    }
  }
  flush();
  return rows;
}

void write_score_csv(const std::vector<ScoreRow>& rows, const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> out;
  out.reserve(rows.size());
  for (const ScoreRow& row : rows) {
    if (row.ok)
      out.push_back({row.image_id, format_double(row.q_mse), format_double(row.q_ssim),
                     format_double(row.q_disc)});
    else
      out.push_back({row.image_id, "", "", ""});
  }
  write_csv(path, {"image_id", "q_mse", "q_ssim", "q_disc"}, out);
}

std::map<std::string, double> read_quality_map(const std::filesystem::path& score_csv,
                                               const std::string& measure) {
  CsvTable table = read_csv(score_csv);
  int id_col = table.column("image_id");
  int q_col = table.column(measure);
  require(id_col >= 0, ErrorCode::format, "score CSV has no image_id column");
  require(q_col >= 0, ErrorCode::format, "score CSV has no column named " + measure);
  std::map<std::string, double> qualities;
  for (const auto& row : table.rows) {
    const std::string& value = row[static_cast<std::size_t>(q_col)];
    if (value.empty()) continue;  // error row
    const std::string& id = row[static_cast<std::size_t>(id_col)];
    require(qualities.emplace(id, parse_double(value, "score CSV " + measure)).second,
            ErrorCode::format, "score CSV has duplicate image_id: " + id);
  }
  return qualities;
}

}  // namespace faceqr
