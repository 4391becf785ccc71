#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "faceqr.h"

namespace {

int fail(const char* what) {
  std::fprintf(stderr, "error: %s\n", (what != nullptr && *what != '\0') ? what : "unknown failure");
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"faceqr: restoration-based face quality assessment"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fqr_version()));

  std::string config;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string scores;
  std::string similarities;
  std::vector<std::string> images;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON run config file")->required();
    sub->add_option("--seed", seed, "Override the config's seed");
    sub->add_option("--out", out_dir, "Override the config's output directory");
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate the synthetic face corpus");
  add_common(synth);

  CLI::App* train = app.add_subcommand("train", "Train the restoration and realism networks");
  add_common(train);

  CLI::App* score = app.add_subcommand("score", "Write per-image quality scores");
  add_common(score);
  score->add_option("images", images, "Image files; omit to score the manifest corpus");

  CLI::App* erc = app.add_subcommand("erc", "Error-versus-reject curves per quality measure");
  add_common(erc);
  erc->add_option("--scores", scores, "Existing score CSV (default: <out>/scores.csv)");
  erc->add_option("--similarities", similarities,
                  "Existing similarity CSV (default: computed with the bundled comparator)");

  CLI::App* det = app.add_subcommand("det", "DET curves by quality tertile");
  add_common(det);
  det->add_option("--scores", scores, "Existing score CSV (default: <out>/scores.csv)");
  det->add_option("--similarities", similarities,
                  "Existing similarity CSV (default: computed with the bundled comparator)");

  CLI11_PARSE(app, argc, argv);

  CLI::App* sub = app.get_subcommands().front();
  int use_seed = sub->count("--seed") > 0 ? 1 : 0;
  const char* out_override = sub->count("--out") > 0 ? out_dir.c_str() : nullptr;

  fqr_run* run = nullptr;
  if (fqr_run_open(config.c_str(), out_override, use_seed, seed, &run) != FQR_OK)
    return fail(fqr_last_error());

  fqr_status status = FQR_OK;
  if (sub == synth) {
    status = fqr_run_synth(run);
  } else if (sub == train) {
    status = fqr_run_train(run);
  } else if (sub == score) {
    std::vector<const char*> paths;
    paths.reserve(images.size());
    for (const std::string& p : images) paths.push_back(p.c_str());
    status = fqr_run_score(run, paths.empty() ? nullptr : paths.data(), paths.size());
  } else if (sub == erc) {
    status = fqr_run_erc(run, scores.empty() ? nullptr : scores.c_str(),
                         similarities.empty() ? nullptr : similarities.c_str());
  } else if (sub == det) {
    status = fqr_run_det(run, scores.empty() ? nullptr : scores.c_str(),
                         similarities.empty() ? nullptr : similarities.c_str());
  }

  int rc = 0;
  if (status != FQR_OK)
    rc = fail(fqr_last_error());
  else
    std::printf("wrote outputs to %s\n", fqr_run_output_dir(run));
  fqr_run_close(run);
  return rc;
}
