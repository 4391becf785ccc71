#include "core/pipeline.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "core/checkpoint.hpp"
#include "core/csvio.hpp"
#include "core/eval.hpp"
#include "core/net.hpp"
#include "core/scoring.hpp"
#include "core/svgplot.hpp"
#include "core/synth.hpp"
#include "core/train.hpp"

namespace faceqr {

namespace fs = std::filesystem;

namespace {

fs::path apply_output_root(const fs::path& dir) {
  if (dir.is_absolute()) return dir;
  const char* root = std::getenv(kOutputRootEnv);
  if (root != nullptr && *root != '\0') return fs::path(root) / dir;
  return dir;
}

void copy_file_bytes(const fs::path& from, const fs::path& to) {
  std::ifstream in(from, std::ios::binary);
  require(in.good(), ErrorCode::io, "cannot read " + from.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::ofstream out(to, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::io, "cannot write " + to.string());
  out << buf.str();
  out.flush();
  require(out.good(), ErrorCode::io, "failed writing " + to.string());
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::io, "cannot write " + path.string());
  out << text;
  out.flush();
  require(out.good(), ErrorCode::io, "failed writing " + path.string());
}

RunContext finish_context(RunContext ctx) {
  ctx.output_dir = apply_output_root(fs::path(ctx.config.output_dir));
  std::error_code ec;
  fs::create_directories(ctx.output_dir, ec);
  require(!ec && fs::is_directory(ctx.output_dir), ErrorCode::io,
          "cannot create output directory " + ctx.output_dir.string());
  if (!ctx.config_path.empty())
    copy_file_bytes(ctx.config_path, ctx.output_dir / "config.json");
  write_text_file(ctx.output_dir / "resolved_config.json",
                  run_config_to_json_string(ctx.config));
  return ctx;
}

std::map<std::string, FaceImage> load_face_map(const DatasetManifest& manifest) {
  std::map<std::string, FaceImage> faces;
  for (const std::string& id : manifest_image_ids(manifest))
    faces.emplace(id, load_face(manifest, id));
  return faces;
}

struct EvalInputs {
  fs::path scores_path;
  fs::path similarities_path;
  std::vector<VerificationPair> pairs;
};

// Scores must already exist (from run_score or an external file). Pair
// similarities are computed with the bundled comparator when no similarity
// file is supplied, and the result is written for reuse.
EvalInputs prepare_eval_inputs(const RunContext& ctx,
                               const std::optional<fs::path>& scores_csv,
                               const std::optional<fs::path>& similarities_csv) {
  EvalInputs in;
  in.scores_path = scores_csv.value_or(ctx.output_dir / "scores.csv");
  require(fs::exists(in.scores_path), ErrorCode::io,
          "score file not found: " + in.scores_path.string() +
              " (run the score command first or pass an explicit file)");
  if (similarities_csv) {
    in.similarities_path = *similarities_csv;
    in.pairs = read_similarity_csv(in.similarities_path);
  } else {
    in.similarities_path = ctx.output_dir / "similarities.csv";
    DatasetManifest manifest = load_manifest(resolve_manifest_path(ctx));
    in.pairs = build_pairs(manifest, ctx.config.evaluation.n_nonmated_per_image,
                           ctx.config.seed);
    compute_similarities(in.pairs, load_face_map(manifest), default_comparator());
    write_similarity_csv(in.pairs, in.similarities_path);
  }
  require(!in.pairs.empty(), ErrorCode::invalid_argument, "no verification pairs to evaluate");
  return in;
}

std::vector<double> mated_similarities(const std::vector<VerificationPair>& pairs) {
  std::vector<double> sims;
  for (const auto& p : pairs)
    if (p.mated) sims.push_back(p.similarity);
  return sims;
}

void write_erc_csv(const ErcCurve& curve, const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < curve.fractions.size(); ++i)
    rows.push_back({format_double(curve.fractions[i]), format_double(curve.fnmr[i])});
  write_csv(path, {"fraction", "fnmr"}, rows);
}

void write_det_csv(const DetCurve& curve, const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i)
    rows.push_back({format_double(curve.thresholds[i]), format_double(curve.fmr[i]),
                    format_double(curve.fnmr[i])});
  write_csv(path, {"threshold", "fmr", "fnmr"}, rows);
}

std::vector<VerificationPair> pairs_within(const std::vector<VerificationPair>& pairs,
                                           const std::set<std::string>& ids) {
  std::vector<VerificationPair> kept;
  for (const auto& p : pairs)
    if (ids.count(p.id_a) > 0 && ids.count(p.id_b) > 0) kept.push_back(p);
  return kept;
}

double eer_of(const DetCurve& curve) {
  double best = 1.0;
  double eer = 1.0;
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    double gap = std::abs(curve.fnmr[i] - curve.fmr[i]);
    if (gap < best) {
      best = gap;
      eer = 0.5 * (curve.fnmr[i] + curve.fmr[i]);
    }
  }
  return eer;
}

}  // namespace

RunContext make_run_context(const fs::path& config_path,
                            const std::optional<std::uint64_t>& seed_override,
                            const std::optional<std::string>& output_override) {
  RunContext ctx;
  ctx.config = load_run_config(config_path);
  ctx.config_path = config_path;
  ctx.config_dir = config_path.has_parent_path() ? config_path.parent_path() : fs::path(".");
  if (seed_override) ctx.config.seed = *seed_override;
  if (output_override) {
    require(!output_override->empty(), ErrorCode::invalid_argument,
            "output directory override cannot be empty");
    ctx.config.output_dir = *output_override;
  }
  return finish_context(std::move(ctx));
}

RunContext make_run_context(const RunConfig& config) {
  RunContext ctx;
  ctx.config = config;
  ctx.config_dir = ".";
  return finish_context(std::move(ctx));
}

fs::path resolve_manifest_path(const RunContext& ctx) {
  if (ctx.config.manifest.empty()) return ctx.output_dir / "dataset" / "manifest.json";
  fs::path p(ctx.config.manifest);
  if (p.is_absolute()) return p;
  return ctx.config_dir / p;
}

fs::path resolve_checkpoint_path(const RunContext& ctx, const std::string& name) {
  fs::path p(name);
  if (p.is_absolute()) return p;
  return ctx.output_dir / p;
}

SynthResult run_synth(const RunContext& ctx) {
  SynthConfig cfg = ctx.config.synth;
  cfg.seed = ctx.config.seed;
  DatasetManifest manifest = synthesize_corpus(cfg, ctx.output_dir / "dataset");
  SynthResult res;
  res.manifest_path = ctx.output_dir / "dataset" / "manifest.json";
  res.n_subjects = static_cast<int>(manifest.subjects.size());
  res.n_images = static_cast<int>(manifest_image_ids(manifest).size());
  return res;
}

TrainResult run_train(const RunContext& ctx) {
  DatasetManifest manifest = load_manifest(resolve_manifest_path(ctx));
  std::vector<TrainingPair> pairs = make_training_pairs(manifest);
  std::vector<FaceImage> anchors = load_anchor_faces(manifest);

  TrainingConfig cfg = ctx.config.training;
  cfg.seed = ctx.config.seed;
  validate_training_config(cfg);

  Parameters g0 = build_generator(generator_spec_for(ctx.config), cfg.seed);
  Parameters d0 = build_discriminator(discriminator_spec_for(ctx.config), cfg.seed + 1);

  Stage1Result s1 = train_stage1(g0, pairs, cfg);
  Stage2Result s2 = train_stage2(s1.g_params, d0, pairs, anchors, cfg);

  TrainResult res;
  res.generator_path = resolve_checkpoint_path(ctx, ctx.config.generator_checkpoint);
  res.discriminator_path = resolve_checkpoint_path(ctx, ctx.config.discriminator_checkpoint);
  res.log_path = ctx.output_dir / "training_log.csv";
  save_checkpoint(s2.g_params, res.generator_path);
  save_checkpoint(s2.d_params, res.discriminator_path);

  TrainingLog log;
  log.entries = s1.log.entries;
  log.entries.insert(log.entries.end(), s2.log.entries.begin(), s2.log.entries.end());
  write_training_log_csv(log, res.log_path);
  return res;
}

ScoreResult run_score(const RunContext& ctx, const std::vector<std::string>& images) {
  Parameters g = load_checkpoint(resolve_checkpoint_path(ctx, ctx.config.generator_checkpoint));
  Parameters d =
      load_checkpoint(resolve_checkpoint_path(ctx, ctx.config.discriminator_checkpoint));
  validate_generator_spec(g.spec);
  validate_discriminator_spec(d.spec);

  std::vector<ScoreRow> rows;
  if (images.empty()) {
    DatasetManifest manifest = load_manifest(resolve_manifest_path(ctx));
    rows = score_corpus(g, d, manifest, ctx.config.scoring_ssim);
  } else {
    std::vector<std::pair<std::string, fs::path>> listed;
    for (const std::string& path : images) listed.emplace_back(path, fs::path(path));
    rows = score_images(g, d, listed, ctx.config.scoring_ssim);
  }

  ScoreResult res;
  res.scores_path = ctx.output_dir / "scores.csv";
  res.n_rows = static_cast<int>(rows.size());
  for (const auto& r : rows)
    if (!r.ok) ++res.n_errors;
  write_score_csv(rows, res.scores_path);
  return res;
}

ErcResult run_erc(const RunContext& ctx, const std::optional<fs::path>& scores_csv,
                  const std::optional<fs::path>& similarities_csv) {
  EvalInputs in = prepare_eval_inputs(ctx, scores_csv, similarities_csv);

  std::vector<double> mated = mated_similarities(in.pairs);
  require(!mated.empty(), ErrorCode::invalid_argument,
          "cannot calibrate a threshold without mated pairs");
  CalibratedThreshold cal =
      calibrate_threshold(mated, ctx.config.evaluation.target_fnmr);
  const std::vector<double>& fractions = ctx.config.evaluation.fractions;

  ErcResult res;
  res.similarities_path = in.similarities_path;
  res.threshold = cal.threshold;

  std::vector<PlotSeries> overlay;
  static const char* kMeasures[] = {"q_mse", "q_ssim", "q_disc"};
  for (const char* measure : kMeasures) {
    std::map<std::string, double> quality = read_quality_map(in.scores_path, measure);
    ErcCurve curve = compute_erc(in.pairs, quality, cal.threshold, fractions);
    res.initial_fnmr = curve.initial_fnmr;
    fs::path csv = ctx.output_dir / (std::string("erc_") + measure + ".csv");
    write_erc_csv(curve, csv);
    res.curve_csvs.push_back(csv);
    overlay.push_back({measure, curve.fractions, curve.fnmr});
  }

  ErcCurve perfect = perfect_curve(res.initial_fnmr, fractions);
  fs::path perfect_csv = ctx.output_dir / "erc_perfect.csv";
  write_erc_csv(perfect, perfect_csv);
  res.curve_csvs.push_back(perfect_csv);
  overlay.push_back({"perfect", perfect.fractions, perfect.fnmr});

  for (std::size_t i = 0; i + 1 < overlay.size(); ++i) {
    fs::path svg = ctx.output_dir / (std::string("erc_") + kMeasures[i] + ".svg");
    write_line_plot_svg(svg, std::string("Error vs reject, ") + kMeasures[i],
                        "fraction rejected", "FNMR", {overlay[i], overlay.back()});
    res.plots.push_back(svg);
  }
  fs::path all_svg = ctx.output_dir / "erc.svg";
  write_line_plot_svg(all_svg, "Error vs reject", "fraction rejected", "FNMR", overlay);
  res.plots.push_back(all_svg);
  return res;
}

DetResult run_det(const RunContext& ctx, const std::optional<fs::path>& scores_csv,
                  const std::optional<fs::path>& similarities_csv) {
  EvalInputs in = prepare_eval_inputs(ctx, scores_csv, similarities_csv);

  std::map<std::string, double> quality = read_quality_map(in.scores_path, "q_ssim");
  for (const auto& p : in.pairs) {
    require(quality.count(p.id_a) > 0, ErrorCode::invalid_argument,
            "no quality entry for image " + p.id_a);
    require(quality.count(p.id_b) > 0, ErrorCode::invalid_argument,
            "no quality entry for image " + p.id_b);
  }

  std::vector<std::vector<std::string>> groups = bin_by_quality(quality, 3);
  std::vector<double> thresholds = det_threshold_sweep(in.pairs);

  DetResult res;
  static const char* kNames[] = {"low", "medium", "high"};
  std::vector<PlotSeries> series;
  std::vector<std::vector<std::string>> eer_rows;
  for (int g = 0; g < 3; ++g) {
    std::set<std::string> ids(groups[g].begin(), groups[g].end());
    std::vector<VerificationPair> subset = pairs_within(in.pairs, ids);
    DetCurve curve = compute_det(subset, thresholds);
    fs::path csv = ctx.output_dir / (std::string("det_") + kNames[g] + ".csv");
    write_det_csv(curve, csv);
    res.curve_csvs.push_back(csv);
    series.push_back({kNames[g], curve.fmr, curve.fnmr});
    double eer = eer_of(curve);
    res.eer.push_back(eer);
    eer_rows.push_back({kNames[g], format_double(eer)});
  }
  DetCurve all = compute_det(in.pairs, thresholds);
  fs::path all_csv = ctx.output_dir / "det_all.csv";
  write_det_csv(all, all_csv);
  res.curve_csvs.push_back(all_csv);
  series.push_back({"all", all.fmr, all.fnmr});
  double all_eer = eer_of(all);
  res.eer.push_back(all_eer);
  eer_rows.push_back({"all", format_double(all_eer)});

  res.plot_path = ctx.output_dir / "det.svg";
  write_line_plot_svg(res.plot_path, "DET by quality tertile", "FMR", "FNMR", series);
  res.eer_path = ctx.output_dir / "eer_summary.csv";
  write_csv(res.eer_path, {"curve", "eer"}, eer_rows);
  return res;
}

}  // namespace faceqr
