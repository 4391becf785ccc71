#include <doctest.h>

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/net.hpp"
#include "core/rng.hpp"
#include "core/train.hpp"
#include "test_util.hpp"

using namespace faceqr;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

// A short stage-2 run so batch-norm running statistics move off their
// initial values before persisting.
Parameters trained_discriminator() {
  Rng rng(401);
  std::vector<TrainingPair> pairs;
  std::vector<FaceImage> anchors;
  for (int s = 0; s < 3; ++s) {
    FaceImage anchor = testutil::random_face(rng);
    anchors.push_back(anchor);
    pairs.push_back({testutil::random_face(rng), anchor});
    pairs.push_back({testutil::random_face(rng), anchor});
  }
  Parameters g = build_generator(NetworkSpec::small_generator(), 1);
  Parameters d = build_discriminator(NetworkSpec::small_discriminator(), 2);
  TrainingConfig cfg;
  cfg.stage1_iterations = 1;
  cfg.stage2_iterations = 1;
  cfg.batch_size = 6;
  return train_stage2(g, d, pairs, anchors, cfg).d_params;
}

}  // namespace

TEST_CASE("checkpoints round-trip bit-exactly") {
  auto dir = testutil::fresh_dir("ckpt_roundtrip");
  Parameters g = build_generator(NetworkSpec::small_generator(), 123);
  save_checkpoint(g, dir / "g.ckpt");
  Parameters g2 = load_checkpoint(dir / "g.ckpt");
  CHECK(g.bitwise_equal(g2));
  CHECK(g2.spec.role == NetworkRole::generator);
  CHECK(g2.spec.layers.size() == g.spec.layers.size());

  Parameters d = trained_discriminator();
  save_checkpoint(d, dir / "d.ckpt");
  Parameters d2 = load_checkpoint(dir / "d.ckpt");
  CHECK(d.bitwise_equal(d2));

  // Save -> load -> save produces identical bytes.
  save_checkpoint(d2, dir / "d_again.ckpt");
  CHECK(slurp(dir / "d.ckpt") == slurp(dir / "d_again.ckpt"));
}

TEST_CASE("an unexpected format version is rejected by number") {
  auto dir = testutil::fresh_dir("ckpt_version");
  Parameters g = build_generator(NetworkSpec::small_generator(), 9);
  save_checkpoint(g, dir / "g.ckpt");
  std::string bytes = slurp(dir / "g.ckpt");
  bytes[8] = 42;  // version u32 little-endian follows the 8-byte magic
  spit(dir / "g.ckpt", bytes);
  try {
    load_checkpoint(dir / "g.ckpt");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::format);
    CHECK(std::string(e.what()).find("format-version") != std::string::npos);
    CHECK(std::string(e.what()).find("42") != std::string::npos);
  }
}

TEST_CASE("truncated and padded checkpoints are rejected") {
  auto dir = testutil::fresh_dir("ckpt_trunc");
  Parameters g = build_generator(NetworkSpec::small_generator(), 10);
  save_checkpoint(g, dir / "g.ckpt");
  std::string bytes = slurp(dir / "g.ckpt");

  spit(dir / "short.ckpt", bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), Error);
  spit(dir / "tiny.ckpt", bytes.substr(0, 10));
  CHECK_THROWS_AS(load_checkpoint(dir / "tiny.ckpt"), Error);
  spit(dir / "padded.ckpt", bytes + "x");
  CHECK_THROWS_AS(load_checkpoint(dir / "padded.ckpt"), Error);

  std::string wrong_magic = bytes;
  wrong_magic[0] = 'X';
  spit(dir / "magic.ckpt", wrong_magic);
  try {
    load_checkpoint(dir / "magic.ckpt");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::format);
  }
}

TEST_CASE("a missing checkpoint file is an io error") {
  try {
    load_checkpoint("/nonexistent/model.ckpt");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
  }
}
