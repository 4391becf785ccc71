#include "core/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>

#include "core/netjson.hpp"

namespace faceqr {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    require(allowed.count(it.key()) > 0, ErrorCode::format,
            "unknown config key \"" + it.key() + "\" in " + where);
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

void parse_ssim(const json& j, SsimParams& p, const std::string& where) {
  check_keys(j, {"k1", "k2", "dynamic_range", "window"}, where);
  get_to(j, "k1", p.k1);
  get_to(j, "k2", p.k2);
  get_to(j, "dynamic_range", p.dynamic_range);
  if (j.contains("window")) p.window = ssim_window_from_name(j.at("window").get<std::string>());
  require(p.k1 > 0.0 && p.k2 > 0.0 && p.dynamic_range > 0.0, ErrorCode::invalid_argument,
          where + ": k1, k2 and dynamic_range must be positive");
}

json ssim_to_json(const SsimParams& p) {
  json j;
  j["k1"] = p.k1;
  j["k2"] = p.k2;
  j["dynamic_range"] = p.dynamic_range;
  j["window"] = ssim_window_name(p.window);
  return j;
}

}  // namespace

std::vector<double> default_rejection_fractions() {
  std::vector<double> fractions;
  for (int i = 0; i < 20; ++i) fractions.push_back(static_cast<double>(i) * 0.05);
  return fractions;
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.scoring_ssim.window = SsimWindow::gaussian_11x11;
  cfg.evaluation.fractions = default_rejection_fractions();
  return cfg;
}

const char* ssim_window_name(SsimWindow window) {
  return window == SsimWindow::global ? "global" : "gaussian_11x11";
}

SsimWindow ssim_window_from_name(const std::string& name) {
  if (name == "global") return SsimWindow::global;
  if (name == "gaussian_11x11" || name == "gaussian_11x11_sigma1.5")
    return SsimWindow::gaussian_11x11;
  raise(ErrorCode::invalid_argument, "unknown SSIM window: " + name);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  require(f.good(), ErrorCode::io, "cannot open config: " + path.string());
  json j = json::parse(f, nullptr, false);
  require(!j.is_discarded(), ErrorCode::format, "config is not valid JSON: " + path.string());
  require(j.is_object(), ErrorCode::format, "config must be a JSON object");

  check_keys(j,
             {"manifest", "generator_checkpoint", "discriminator_checkpoint", "training",
              "ssim", "evaluation", "synth", "output_dir", "seed", "model"},
             "config");

  RunConfig cfg = default_run_config();
  get_to(j, "manifest", cfg.manifest);
  get_to(j, "generator_checkpoint", cfg.generator_checkpoint);
  get_to(j, "discriminator_checkpoint", cfg.discriminator_checkpoint);
  get_to(j, "output_dir", cfg.output_dir);
  get_to(j, "seed", cfg.seed);
  require(!cfg.generator_checkpoint.empty() && !cfg.discriminator_checkpoint.empty(),
          ErrorCode::invalid_argument, "checkpoint paths cannot be empty");
  require(!cfg.output_dir.empty(), ErrorCode::invalid_argument, "output_dir cannot be empty");

  if (j.contains("training")) {
    const json& jt = j.at("training");
    check_keys(jt,
               {"stage1_iterations", "stage2_iterations", "batch_size", "learning_rate",
                "clip_c", "adversarial_recon_weight", "iteration_unit", "adam_beta1",
                "adam_beta2", "adam_epsilon", "stage1_ssim"},
               "config.training");
    get_to(jt, "stage1_iterations", cfg.training.stage1_iterations);
    get_to(jt, "stage2_iterations", cfg.training.stage2_iterations);
    get_to(jt, "batch_size", cfg.training.batch_size);
    get_to(jt, "learning_rate", cfg.training.learning_rate);
    get_to(jt, "clip_c", cfg.training.clip_c);
    get_to(jt, "adversarial_recon_weight", cfg.training.adversarial_recon_weight);
    if (jt.contains("iteration_unit"))
      cfg.training.iteration_unit =
          iteration_unit_from_name(jt.at("iteration_unit").get<std::string>());
    get_to(jt, "adam_beta1", cfg.training.adam_beta1);
    get_to(jt, "adam_beta2", cfg.training.adam_beta2);
    get_to(jt, "adam_epsilon", cfg.training.adam_epsilon);
    if (jt.contains("stage1_ssim"))
      parse_ssim(jt.at("stage1_ssim"), cfg.training.stage1_ssim, "config.training.stage1_ssim");
    validate_training_config(cfg.training);
  }

  if (j.contains("ssim")) parse_ssim(j.at("ssim"), cfg.scoring_ssim, "config.ssim");

  if (j.contains("evaluation")) {
    const json& je = j.at("evaluation");
    check_keys(je, {"target_fnmr", "rejection_fractions", "n_nonmated_per_image"}, "config.evaluation");
    get_to(je, "target_fnmr", cfg.evaluation.target_fnmr);
    get_to(je, "rejection_fractions", cfg.evaluation.fractions);
    get_to(je, "n_nonmated_per_image", cfg.evaluation.n_nonmated_per_image);
    require(cfg.evaluation.target_fnmr > 0.0 && cfg.evaluation.target_fnmr < 1.0,
            ErrorCode::invalid_argument, "evaluation.target_fnmr must lie in (0,1)");
    require(!cfg.evaluation.fractions.empty(), ErrorCode::invalid_argument,
            "evaluation.fractions cannot be empty");
    for (double r : cfg.evaluation.fractions)
      require(r >= 0.0 && r < 1.0, ErrorCode::invalid_argument,
              "evaluation.fractions must lie in [0,1)");
    for (std::size_t i = 1; i < cfg.evaluation.fractions.size(); ++i)
      require(cfg.evaluation.fractions[i] > cfg.evaluation.fractions[i - 1],
              ErrorCode::invalid_argument, "evaluation.fractions must be strictly increasing");
    require(cfg.evaluation.n_nonmated_per_image >= 0, ErrorCode::invalid_argument,
            "evaluation.n_nonmated_per_image must be >= 0");
  }

  if (j.contains("synth")) {
    const json& js = j.at("synth");
    check_keys(js, {"n_subjects", "n_variants"}, "config.synth");
    get_to(js, "n_subjects", cfg.synth.n_subjects);
    get_to(js, "n_variants", cfg.synth.n_variants);
    validate_synth_config(cfg.synth);
  }

  if (j.contains("model")) {
    const json& jm = j.at("model");
    check_keys(jm, {"preset", "generator", "discriminator"}, "config.model");
    get_to(jm, "preset", cfg.model_preset);
    require(cfg.model_preset == "default" || cfg.model_preset == "small",
            ErrorCode::invalid_argument, "model.preset must be \"default\" or \"small\"");
    if (jm.contains("generator"))
      cfg.generator_spec = network_spec_from_json(jm.at("generator"));
    if (jm.contains("discriminator"))
      cfg.discriminator_spec = network_spec_from_json(jm.at("discriminator"));
  }
  return cfg;
}

std::string run_config_to_json_string(const RunConfig& cfg) {
  json j;
  j["manifest"] = cfg.manifest;
  j["generator_checkpoint"] = cfg.generator_checkpoint;
  j["discriminator_checkpoint"] = cfg.discriminator_checkpoint;
  json jt;
  jt["stage1_iterations"] = cfg.training.stage1_iterations;
  jt["stage2_iterations"] = cfg.training.stage2_iterations;
  jt["batch_size"] = cfg.training.batch_size;
  jt["learning_rate"] = cfg.training.learning_rate;
  jt["clip_c"] = cfg.training.clip_c;
  jt["adversarial_recon_weight"] = cfg.training.adversarial_recon_weight;
  jt["iteration_unit"] = iteration_unit_name(cfg.training.iteration_unit);
  jt["adam_beta1"] = cfg.training.adam_beta1;
  jt["adam_beta2"] = cfg.training.adam_beta2;
  jt["adam_epsilon"] = cfg.training.adam_epsilon;
  jt["stage1_ssim"] = ssim_to_json(cfg.training.stage1_ssim);
  j["training"] = jt;
  j["ssim"] = ssim_to_json(cfg.scoring_ssim);
  json je;
  je["target_fnmr"] = cfg.evaluation.target_fnmr;
  je["rejection_fractions"] = cfg.evaluation.fractions;
  je["n_nonmated_per_image"] = cfg.evaluation.n_nonmated_per_image;
  j["evaluation"] = je;
  json js;
  js["n_subjects"] = cfg.synth.n_subjects;
  js["n_variants"] = cfg.synth.n_variants;
  j["synth"] = js;
  j["output_dir"] = cfg.output_dir;
  j["seed"] = cfg.seed;
  json jm;
  jm["preset"] = cfg.model_preset;
  if (cfg.generator_spec) jm["generator"] = network_spec_to_json(*cfg.generator_spec);
  if (cfg.discriminator_spec)
    jm["discriminator"] = network_spec_to_json(*cfg.discriminator_spec);
  j["model"] = jm;
  return j.dump(2) + "\n";
}

NetworkSpec generator_spec_for(const RunConfig& cfg) {
  if (cfg.generator_spec) return *cfg.generator_spec;
  return cfg.model_preset == "small" ? NetworkSpec::small_generator()
                                     : NetworkSpec::default_generator();
}

NetworkSpec discriminator_spec_for(const RunConfig& cfg) {
  if (cfg.discriminator_spec) return *cfg.discriminator_spec;
  return cfg.model_preset == "small" ? NetworkSpec::small_discriminator()
                                     : NetworkSpec::default_discriminator();
}

}  // namespace faceqr
