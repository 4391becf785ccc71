// Exercises the public C surface only: faceqr.h plus the shared library.
#include <doctest.h>
#include <faceqr.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "faceqr_capi" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  fs::path path = dir / "config.json";
  std::ofstream out(path, std::ios::trunc);
  out << text;
  return path;
}

const char* kTinyConfig = R"({
  "model": {"preset": "small"},
  "training": {"stage1_iterations": 1, "stage2_iterations": 1, "batch_size": 8},
  "synth": {"n_subjects": 6, "n_variants": 3},
  "evaluation": {"target_fnmr": 0.2, "rejection_fractions": [0.0, 0.25],
                 "n_nonmated_per_image": 3}
})";

}  // namespace

TEST_CASE("version and constants") {
  REQUIRE(fqr_version() != nullptr);
  CHECK(std::string(fqr_version()).find('.') != std::string::npos);
  CHECK(fqr_face_size() == 32);
}

TEST_CASE("null arguments are rejected with a message, not a crash") {
  CHECK(fqr_engine_open(nullptr, "d.ckpt", nullptr) == FQR_ERR_INVALID_ARGUMENT);
  REQUIRE(fqr_last_error() != nullptr);
  CHECK(std::string(fqr_last_error()).size() > 0);

  fqr_engine* engine = nullptr;
  CHECK(fqr_engine_open("g.ckpt", "d.ckpt", &engine) == FQR_ERR_IO);
  CHECK(engine == nullptr);
  CHECK(std::string(fqr_last_error()).find("g.ckpt") != std::string::npos);

  CHECK(fqr_engine_score_file(nullptr, "x.png", nullptr, nullptr, nullptr) ==
        FQR_ERR_INVALID_ARGUMENT);
  CHECK(fqr_run_open(nullptr, nullptr, 0, 0, nullptr) == FQR_ERR_INVALID_ARGUMENT);
  fqr_run* run = nullptr;
  CHECK(fqr_run_open("/does/not/exist.json", nullptr, 0, 0, &run) == FQR_ERR_IO);
  CHECK(run == nullptr);
  CHECK(fqr_run_synth(nullptr) == FQR_ERR_INVALID_ARGUMENT);
  CHECK(std::string(fqr_run_output_dir(nullptr)).empty());

  fqr_engine_close(nullptr);  // must be a harmless no-op
  fqr_run_close(nullptr);
}

TEST_CASE("a bad config reports its offending key") {
  auto dir = fresh_dir("badcfg");
  auto cfg = write_config(dir, R"({"sede": 1})");
  fqr_run* run = nullptr;
  CHECK(fqr_run_open(cfg.string().c_str(), nullptr, 0, 0, &run) == FQR_ERR_FORMAT);
  CHECK(run == nullptr);
  CHECK(std::string(fqr_last_error()).find("sede") != std::string::npos);
}

TEST_CASE("full pipeline and scoring engine through the C api") {
  auto dir = fresh_dir("pipeline");
  auto cfg = write_config(dir, kTinyConfig);
  fs::path out = dir / "out";

  fqr_run* run = nullptr;
  REQUIRE(fqr_run_open(cfg.string().c_str(), out.string().c_str(), 1, 5, &run) == FQR_OK);
  REQUIRE(run != nullptr);
  CHECK(fs::path(fqr_run_output_dir(run)) == out);
  CHECK(std::string(fqr_last_error()).empty());

  REQUIRE(fqr_run_synth(run) == FQR_OK);
  CHECK(fs::exists(out / "dataset" / "manifest.json"));

  // Scoring before training must fail cleanly: no checkpoints yet.
  CHECK(fqr_run_score(run, nullptr, 0) == FQR_ERR_IO);
  CHECK(!std::string(fqr_last_error()).empty());

  REQUIRE(fqr_run_train(run) == FQR_OK);
  CHECK(fs::exists(out / "generator.ckpt"));
  CHECK(fs::exists(out / "discriminator.ckpt"));
  CHECK(fs::exists(out / "training_log.csv"));

  REQUIRE(fqr_run_score(run, nullptr, 0) == FQR_OK);
  CHECK(fs::exists(out / "scores.csv"));

  REQUIRE(fqr_run_erc(run, nullptr, nullptr) == FQR_OK);
  CHECK(fs::exists(out / "erc_q_mse.csv"));
  CHECK(fs::exists(out / "erc_q_ssim.csv"));
  CHECK(fs::exists(out / "erc_q_disc.csv"));
  CHECK(fs::exists(out / "erc_perfect.csv"));
  CHECK(fs::exists(out / "erc.svg"));
  CHECK(fs::exists(out / "similarities.csv"));

  REQUIRE(fqr_run_det(run, nullptr, nullptr) == FQR_OK);
  CHECK(fs::exists(out / "det_low.csv"));
  CHECK(fs::exists(out / "det_all.csv"));
  CHECK(fs::exists(out / "det.svg"));
  CHECK(fs::exists(out / "eer_summary.csv"));

  // Scoring an explicit file list, including one unreadable path, succeeds
  // with an error row rather than failing the call.
  fs::path anchor = out / "dataset" / "images" / "s000" / "anchor.png";
  REQUIRE(fs::exists(anchor));
  std::string anchor_str = anchor.string();
  const char* listed[2] = {anchor_str.c_str(), "/no/such/image.png"};
  CHECK(fqr_run_score(run, listed, 2) == FQR_OK);

  fqr_run_close(run);

  // The checkpoints drive the in-memory engine.
  fqr_engine* engine = nullptr;
  fs::path gpath = out / "generator.ckpt";
  fs::path dpath = out / "discriminator.ckpt";
  REQUIRE(fqr_engine_open(gpath.string().c_str(), dpath.string().c_str(), &engine) == FQR_OK);
  REQUIRE(engine != nullptr);

  double q_mse = -9, q_ssim = -9, q_disc = -9;
  REQUIRE(fqr_engine_score_file(engine, anchor_str.c_str(), &q_mse, &q_ssim, &q_disc) == FQR_OK);
  CHECK(std::isfinite(q_mse));
  CHECK(q_mse <= 1.0);
  CHECK(q_ssim > -1.0);
  CHECK(q_ssim <= 1.0);
  CHECK(q_disc >= 0.0);
  CHECK(q_disc <= 1.0);

  // Output pointers are individually optional.
  CHECK(fqr_engine_score_file(engine, anchor_str.c_str(), nullptr, nullptr, nullptr) == FQR_OK);
  CHECK(fqr_engine_score_file(engine, "/no/such/image.png", &q_mse, nullptr, nullptr) ==
        FQR_ERR_IO);

  std::vector<double> rgb(3072, 0.5);
  double q2 = -9;
  REQUIRE(fqr_engine_score_rgb(engine, rgb.data(), nullptr, &q2, nullptr) == FQR_OK);
  CHECK(std::isfinite(q2));

  std::vector<double> restored(3072, -1.0);
  REQUIRE(fqr_engine_restore_rgb(engine, rgb.data(), restored.data()) == FQR_OK);
  for (double v : restored) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  // Same buffer in and out is allowed.
  std::vector<double> inplace = rgb;
  REQUIRE(fqr_engine_restore_rgb(engine, inplace.data(), inplace.data()) == FQR_OK);
  CHECK(inplace == restored);

  rgb[7] = 2.0;  // outside [0,1]
  CHECK(fqr_engine_score_rgb(engine, rgb.data(), &q2, nullptr, nullptr) ==
        FQR_ERR_INVALID_ARGUMENT);
  CHECK(fqr_engine_score_rgb(engine, nullptr, &q2, nullptr, nullptr) ==
        FQR_ERR_INVALID_ARGUMENT);

  fqr_engine_close(engine);
}

TEST_CASE("seed override changes outputs, reuse reproduces them") {
  auto dir = fresh_dir("seeds");
  auto cfg = write_config(dir, kTinyConfig);

  auto corpus_bytes = [&](const fs::path& out, uint64_t seed) {
    fqr_run* run = nullptr;
    REQUIRE(fqr_run_open(cfg.string().c_str(), out.string().c_str(), 1, seed, &run) == FQR_OK);
    REQUIRE(fqr_run_synth(run) == FQR_OK);
    fqr_run_close(run);
    std::ifstream in(out / "dataset" / "images" / "s000" / "anchor.png", std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
  };

  auto a = corpus_bytes(dir / "a", 11);
  auto b = corpus_bytes(dir / "b", 11);
  auto c = corpus_bytes(dir / "c", 12);
  REQUIRE(!a.empty());
  CHECK(a == b);
  CHECK(a != c);
}
