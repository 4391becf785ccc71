#include <doctest.h>

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/degrade.hpp"
#include "core/metrics.hpp"
#include "core/rng.hpp"
#include "core/scoring.hpp"
#include "core/synth.hpp"
#include "core/train.hpp"
#include "test_util.hpp"

using namespace faceqr;

namespace {

struct Models {
  Parameters g;
  Parameters d;
};

Models quick_models() {
  Models m;
  m.g = build_generator(NetworkSpec::small_generator(), 20);
  m.d = build_discriminator(NetworkSpec::small_discriminator(), 21);
  return m;
}

}  // namespace

TEST_CASE("quality measures are restoration similarity and realism") {
  Models m = quick_models();
  Rng rng(501);
  FaceImage face = testutil::random_face(rng);

  QualityReport rep = score_quality(m.g, m.d, face, default_scoring_ssim());
  FaceImage restored = restore(m.g, face);
  CHECK(restored.provenance == Provenance::restored);
  CHECK(rep.q_mse == doctest::Approx(1.0 - mse(face, restored)).epsilon(1e-12));
  CHECK(rep.q_ssim ==
        doctest::Approx(ssim(face, restored, default_scoring_ssim())).epsilon(1e-12));
  double d_score = discriminator_forward(m.d, {restored}, Mode::eval)[0];
  CHECK(rep.q_disc == doctest::Approx(d_score).epsilon(1e-12));
  CHECK(rep.restored.values == restored.values);
}

TEST_CASE("the default scoring ssim uses the gaussian window") {
  CHECK(default_scoring_ssim().window == SsimWindow::gaussian_11x11);
}

TEST_CASE("corpus scoring is deterministic and follows manifest order") {
  auto dir = testutil::fresh_dir("score_corpus");
  SynthConfig synth;
  synth.n_subjects = 3;
  synth.n_variants = 2;
  synth.seed = 77;
  DatasetManifest manifest = synthesize_corpus(synth, dir);
  Models m = quick_models();

  auto rows1 = score_corpus(m.g, m.d, manifest, default_scoring_ssim());
  auto rows2 = score_corpus(m.g, m.d, manifest, default_scoring_ssim());
  auto ids = manifest_image_ids(manifest);
  REQUIRE(rows1.size() == ids.size());
  for (std::size_t i = 0; i < rows1.size(); ++i) {
    CHECK(rows1[i].image_id == ids[i]);
    CHECK(rows1[i].ok);
    CHECK(rows1[i].q_mse == rows2[i].q_mse);
    CHECK(rows1[i].q_ssim == rows2[i].q_ssim);
    CHECK(rows1[i].q_disc == rows2[i].q_disc);
  }
}

TEST_CASE("an unreadable image becomes an error row and the run continues") {
  auto dir = testutil::fresh_dir("score_badfile");
  SynthConfig synth;
  synth.n_subjects = 2;
  synth.n_variants = 2;
  synth.seed = 78;
  DatasetManifest manifest = synthesize_corpus(synth, dir);

  const std::string bad_id = manifest.subjects[0].variants[1];
  {
    std::ofstream out(manifest.resolve(bad_id), std::ios::binary | std::ios::trunc);
    out << "not a png";
  }
  Models m = quick_models();
  auto rows = score_corpus(m.g, m.d, manifest, default_scoring_ssim());
  REQUIRE(rows.size() == 6);
  int n_errors = 0;
  for (const auto& r : rows) {
    if (!r.ok) {
      ++n_errors;
      CHECK(r.image_id == bad_id);
      CHECK(!r.error.empty());
    }
  }
  CHECK(n_errors == 1);

  // Error rows serialize with empty value fields and are skipped on read.
  write_score_csv(rows, dir / "scores.csv");
  auto quality = read_quality_map(dir / "scores.csv", "q_ssim");
  CHECK(quality.size() == 5);
  CHECK(quality.count(bad_id) == 0);

  std::ifstream in(dir / "scores.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "image_id,q_mse,q_ssim,q_disc");
  bool saw_empty = false;
  while (std::getline(in, line))
    if (line == bad_id + ",,,") saw_empty = true;
  CHECK(saw_empty);
}

TEST_CASE("explicitly listed images keep their ids and order") {
  auto dir = testutil::fresh_dir("score_listed");
  SynthConfig synth;
  synth.n_subjects = 2;
  synth.n_variants = 1;
  synth.seed = 79;
  DatasetManifest manifest = synthesize_corpus(synth, dir);
  Models m = quick_models();

  std::vector<std::pair<std::string, std::filesystem::path>> images;
  images.emplace_back("second", manifest.resolve(manifest.subjects[1].anchor));
  images.emplace_back("first", manifest.resolve(manifest.subjects[0].anchor));
  images.emplace_back("missing", dir / "nope.png");
  auto rows = score_images(m.g, m.d, images, default_scoring_ssim());
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].image_id == "second");
  CHECK(rows[1].image_id == "first");
  CHECK(rows[2].image_id == "missing");
  CHECK(rows[0].ok);
  CHECK(rows[1].ok);
  CHECK(!rows[2].ok);
}

TEST_CASE("read_quality_map rejects duplicate ids and unknown measures") {
  auto dir = testutil::fresh_dir("score_readmap");
  {
    std::ofstream out(dir / "dup.csv");
    out << "image_id,q_mse,q_ssim,q_disc\n";
    out << "a,0.5,0.6,0.7\n";
    out << "a,0.1,0.2,0.3\n";
  }
  CHECK_THROWS_AS(read_quality_map(dir / "dup.csv", "q_ssim"), Error);
  {
    std::ofstream out(dir / "ok.csv");
    out << "image_id,q_mse,q_ssim,q_disc\n";
    out << "a,0.5,0.6,0.7\n";
  }
  CHECK_THROWS_AS(read_quality_map(dir / "ok.csv", "q_typo"), Error);
  auto map = read_quality_map(dir / "ok.csv", "q_disc");
  REQUIRE(map.size() == 1);
  CHECK(map.at("a") == 0.7);
}

// After brief reconstruction training, mildly degraded images should score
// higher than heavily degraded ones on average.
TEST_CASE("scores order mild vs heavy degradation after light training") {
  Rng rng(502);
  std::vector<TrainingPair> pairs;
  std::vector<FaceImage> mild, heavy;
  for (int s = 0; s < 10; ++s) {
    FaceImage anchor;
    double phase = rng.uniform(0.0, 6.28);
    double level = 0.3 + 0.4 * rng.uniform();
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        for (int c = 0; c < 3; ++c)
          anchor.at(y, x, c) = std::clamp(
              level + 0.2 * std::sin(0.4 * x + phase) * std::cos(0.3 * y + c), 0.0, 1.0);
    auto variant = [&](double sev, std::uint64_t seed) {
      return degrade(anchor, DegradationSpec{DegradationKind::blur, sev, seed});
    };
    pairs.push_back({variant(0.5, static_cast<std::uint64_t>(s)), anchor});
    mild.push_back(variant(0.05, static_cast<std::uint64_t>(100 + s)));
    heavy.push_back(variant(1.0, static_cast<std::uint64_t>(200 + s)));
  }
  Parameters g0 = build_generator(NetworkSpec::small_generator(), 22);
  TrainingConfig cfg;
  cfg.stage1_iterations = 100;
  cfg.stage2_iterations = 1;
  cfg.batch_size = 5;
  Parameters g = train_stage1(g0, pairs, cfg).g_params;
  Parameters d = build_discriminator(NetworkSpec::small_discriminator(), 23);

  double mild_mean = 0.0, heavy_mean = 0.0;
  for (int i = 0; i < 10; ++i) {
    mild_mean +=
        score_quality(g, d, mild[static_cast<std::size_t>(i)], default_scoring_ssim()).q_ssim / 10;
    heavy_mean +=
        score_quality(g, d, heavy[static_cast<std::size_t>(i)], default_scoring_ssim()).q_ssim / 10;
  }
  CHECK(mild_mean > heavy_mean + 0.01);
}
