// Acceptance gate: one pass/fail line per criterion with measured values.
// Exit status is the number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/config.hpp"
#include "core/csvio.hpp"
#include "core/dataset.hpp"
#include "core/eval.hpp"
#include "core/metrics.hpp"
#include "core/net.hpp"
#include "core/pipeline.hpp"
#include "core/rng.hpp"
#include "core/scoring.hpp"
#include "core/synth.hpp"
#include "core/train.hpp"

namespace fs = std::filesystem;
using namespace faceqr;

namespace {

// ---- tunable testbed parameters ----------------------------------------
constexpr int kSubjects = 50;
constexpr int kVariants = 6;
constexpr std::uint64_t kCorpusSeed = 7;
constexpr double kTargetFnmr = 0.10;
constexpr int kStage1EpochsHoldout = 12;  // criterion 4
constexpr int kStage1EpochsFull = 16;     // criteria 6 and 7
constexpr int kTrainBatch = 32;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in.good()) return {};
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

FaceImage random_face(Rng& rng) {
  FaceImage img;
  for (double& v : img.values) v = rng.uniform();
  return img;
}

// ---- shared synthetic testbed -------------------------------------------

struct Testbed {
  fs::path dir;
  DatasetManifest manifest;
  std::map<std::string, FaceImage> faces;
  std::map<std::string, std::string> owner;  // image id -> subject id
  std::vector<VerificationPair> pairs;       // similarities filled
  std::vector<double> mated;
  std::map<std::string, double> severity_quality;  // anchors 0, variants -severity
  // Ground-truth restoration quality: ssim of each image against its own
  // subject's true anchor, i.e. q_ssim with a perfect restorer.
  std::map<std::string, double> reference_quality;

  // Produced by criterion 6, reused by 7 and 8.
  std::map<std::string, double> q_ssim;
  Parameters trained_g;
  Parameters trained_d;
  bool has_trained = false;
};

Testbed build_testbed() {
  Testbed tb;
  tb.dir = fs::temp_directory_path() / "faceqr_acceptance";
  fs::remove_all(tb.dir);
  fs::create_directories(tb.dir);

  SynthConfig synth;
  synth.n_subjects = kSubjects;
  synth.n_variants = kVariants;
  synth.seed = kCorpusSeed;
  tb.manifest = synthesize_corpus(synth, tb.dir / "dataset");
  tb.owner = image_subject_map(tb.manifest);

  for (const std::string& id : manifest_image_ids(tb.manifest))
    tb.faces[id] = load_face(tb.manifest, id);

  tb.pairs = build_pairs(tb.manifest, 4, 99);
  compute_similarities(tb.pairs, tb.faces, default_comparator());
  for (const auto& p : tb.pairs)
    if (p.mated) tb.mated.push_back(p.similarity);

  for (const auto& [id, face] : tb.faces) tb.severity_quality[id] = 0.0;
  CsvTable side = read_csv(tb.dir / "dataset" / "degradations.csv");
  for (const auto& row : side.rows)
    tb.severity_quality[row[0]] = -parse_double(row[2], "degradations.csv severity");

  SsimParams sp = default_scoring_ssim();
  for (const auto& subject : tb.manifest.subjects) {
    const FaceImage& anchor = tb.faces.at(subject.anchor);
    tb.reference_quality[subject.anchor] = ssim(anchor, anchor, sp);
    for (const std::string& id : subject.variants)
      tb.reference_quality[id] = ssim(tb.faces.at(id), anchor, sp);
  }
  return tb;
}

// ---- independent oracles -------------------------------------------------

// Fresh per-window SSIM loop with its own gaussian kernel, kept free of the
// library's accumulation order: uses E[x^2]-mu^2 style moments.
double windowed_ssim_oracle(const FaceImage& a, const FaceImage& b, const SsimParams& p) {
  const int n = FaceImage::kSize, win = 11;
  std::vector<double> g(static_cast<std::size_t>(win) * win);
  double gsum = 0.0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      double dy = i - 5.0, dx = j - 5.0;
      g[static_cast<std::size_t>(i * win + j)] = std::exp(-(dx * dx + dy * dy) / 4.5);
      gsum += g[static_cast<std::size_t>(i * win + j)];
    }
  for (double& v : g) v /= gsum;
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  double total = 0.0;
  int count = 0;
  for (int c = 0; c < 3; ++c)
    for (int y0 = 0; y0 + win <= n; ++y0)
      for (int x0 = 0; x0 + win <= n; ++x0) {
        double ex = 0, ey = 0, exx = 0, eyy = 0, exy = 0;
        for (int i = 0; i < win; ++i)
          for (int j = 0; j < win; ++j) {
            double wgt = g[static_cast<std::size_t>(i * win + j)];
            double va = a.at(y0 + i, x0 + j, c), vb = b.at(y0 + i, x0 + j, c);
            ex += wgt * va;
            ey += wgt * vb;
            exx += wgt * va * va;
            eyy += wgt * vb * vb;
            exy += wgt * va * vb;
          }
        double vx = exx - ex * ex, vy = eyy - ey * ey, cov = exy - ex * ey;
        total += ((2 * ex * ey + c1) * (2 * cov + c2)) /
                 ((ex * ex + ey * ey + c1) * (vx + vy + c2));
        ++count;
      }
  return total / count;
}

// Fresh recount of one ERC point straight from the definitions.
double erc_point_oracle(const std::vector<VerificationPair>& pairs,
                        const std::map<std::string, double>& qualities, double threshold,
                        double fraction) {
  std::vector<std::pair<double, std::string>> order;
  for (const auto& [id, q] : qualities) order.emplace_back(q, id);
  std::sort(order.begin(), order.end());
  std::size_t n_rejected =
      static_cast<std::size_t>(std::floor(fraction * static_cast<double>(order.size())));
  std::set<std::string> rejected;
  for (std::size_t i = 0; i < n_rejected; ++i) rejected.insert(order[i].second);
  long survivors = 0, failures = 0;
  for (const auto& p : pairs) {
    if (!p.mated || rejected.count(p.id_a) || rejected.count(p.id_b)) continue;
    ++survivors;
    if (p.similarity < threshold) ++failures;
  }
  return survivors == 0 ? 0.0 : static_cast<double>(failures) / static_cast<double>(survivors);
}

double rel_err(double analytic, double numeric) {
  double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

// ---- criterion harness ----------------------------------------------------

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void run_criterion(int number, const std::string& name, double budget_seconds,
                   const std::function<Outcome()>& body) {
  auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool in_budget = elapsed < budget_seconds;
  bool pass = out.pass && in_budget;
  if (!pass) ++g_failures;
  std::printf("[%s] criterion %d (%s): %s [%.1f s / %.0f s]%s\n", pass ? "PASS" : "FAIL", number,
              name.c_str(), out.detail.c_str(), elapsed, budget_seconds,
              !out.pass ? "" : (in_budget ? "" : " OVER TIME BUDGET"));
  std::fflush(stdout);
}

// ---- criteria --------------------------------------------------------------

Outcome criterion1_ssim() {
  Rng rng(11);
  SsimParams global;
  global.window = SsimWindow::global;
  SsimParams windowed;
  windowed.window = SsimWindow::gaussian_11x11;

  double worst_identity = 0.0;
  for (int i = 0; i < 10; ++i) {
    FaceImage x = random_face(rng);
    worst_identity = std::max(worst_identity, std::abs(ssim(x, x, global) - 1.0));
    worst_identity = std::max(worst_identity, std::abs(ssim(x, x, windowed) - 1.0));
  }

  FaceImage black, white;
  black.values.assign(black.values.size(), 0.0);
  white.values.assign(white.values.size(), 1.0);
  const double c1 = 1e-4;  // (k1 * L)^2
  const double closed_form = c1 / (1.0 + c1);
  double const_err = std::max(std::abs(ssim(black, white, global) - closed_form),
                              std::abs(ssim(black, white, windowed) - closed_form));

  double worst_window = 0.0;
  for (int i = 0; i < 20; ++i) {
    FaceImage a = random_face(rng);
    FaceImage b = random_face(rng);
    worst_window =
        std::max(worst_window, std::abs(ssim(a, b, windowed) - windowed_ssim_oracle(a, b, windowed)));
  }

  Outcome out;
  out.pass = worst_identity <= 1e-9 && const_err <= 1e-6 && worst_window <= 1e-6;
  out.detail = "identity err " + fmt("%.2e", worst_identity) + " (<=1e-9), constant err " +
               fmt("%.2e", const_err) + " (<=1e-6), window-oracle err " +
               fmt("%.2e", worst_window) + " (<=1e-6) over 20 pairs";
  return out;
}

Outcome criterion2_gradients() {
  Rng rng(22);
  const double eps = 1e-5;
  double worst = 0.0;

  auto fd_check = [&](NetworkSpec spec, const Tensor& input, LossKind kind,
                      const Tensor& targets, const SsimParams& sp) {
    Parameters params = init_parameters(spec, 33);
    LossBackward lb = net_loss_backward(params, input, kind, targets, Mode::eval, sp);
    auto loss_at = [&](const Parameters& p, const Tensor& in) {
      return net_loss_backward(p, in, kind, targets, Mode::eval, sp).loss;
    };
    for (int grid = 0; grid < 2; ++grid) {
      Tensor& g = grid == 0 ? lb.grads.layers[0].weight : lb.grads.layers[0].bias;
      for (std::size_t i = 0; i < g.size(); ++i) {
        Parameters plus = params, minus = params;
        Tensor& tp = grid == 0 ? plus.layers[0].weight : plus.layers[0].bias;
        Tensor& tm = grid == 0 ? minus.layers[0].weight : minus.layers[0].bias;
        tp[i] += eps;
        tm[i] -= eps;
        double numeric = (loss_at(plus, input) - loss_at(minus, input)) / (2 * eps);
        worst = std::max(worst, rel_err(g[i], numeric));
      }
    }
    // Input gradient on a strided subset.
    for (std::size_t i = 0; i < input.size(); i += 101) {
      Tensor plus = input, minus = input;
      plus[i] += eps;
      minus[i] -= eps;
      double numeric = (loss_at(params, plus) - loss_at(params, minus)) / (2 * eps);
      worst = std::max(worst, rel_err(lb.input_grad[i], numeric));
    }
  };

  // 1 - SSIM through a single convolution (+ output sigmoid).
  NetworkSpec ssim_net;
  ssim_net.role = NetworkRole::generator;
  ssim_net.layers = {LayerSpec::conv2d(3, 3, 1), LayerSpec::sigmoid_out()};
  Tensor input({1, 3, 32, 32});
  for (std::size_t i = 0; i < input.size(); ++i) input[i] = rng.uniform();
  Tensor target({1, 3, 32, 32});
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = rng.uniform();
  SsimParams global;
  global.window = SsimWindow::global;
  fd_check(ssim_net, input, LossKind::ssim_recon, target, global);
  double worst_ssim = worst;

  // Binary cross-entropy through a single convolution (+ output sigmoid).
  NetworkSpec bce_net;
  bce_net.role = NetworkRole::generator;  // role only gates validators, unused here
  bce_net.layers = {LayerSpec::conv2d(2, 3, 2), LayerSpec::sigmoid_out()};
  Tensor binary({1, 2, 16, 16});
  for (std::size_t i = 0; i < binary.size(); ++i) binary[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  worst = 0.0;
  fd_check(bce_net, input, LossKind::bce, binary, global);
  double worst_bce = worst;

  Outcome out;
  out.pass = worst_ssim < 1e-4 && worst_bce < 1e-4;
  out.detail = "max rel err: 1-ssim " + fmt("%.2e", worst_ssim) + ", bce " +
               fmt("%.2e", worst_bce) + " (<1e-4, central differences, eps 1e-5)";
  return out;
}

Outcome criterion3_training_protocol() {
  fs::path dir = fs::temp_directory_path() / "faceqr_acceptance_smoke";
  fs::remove_all(dir);
  SynthConfig synth;
  synth.n_subjects = 8;
  synth.n_variants = 2;
  synth.seed = 3;
  DatasetManifest manifest = synthesize_corpus(synth, dir);
  auto pairs = make_training_pairs(manifest);
  auto anchors = load_anchor_faces(manifest);

  TrainingConfig cfg;
  cfg.stage1_iterations = 2;
  cfg.stage2_iterations = 4;
  cfg.batch_size = 8;
  cfg.seed = 5;
  Parameters g0 = build_generator(NetworkSpec::small_generator(), 50);
  Parameters d0 = build_discriminator(NetworkSpec::small_discriminator(), 51);

  double worst_weight = 0.0;
  int d_updates = 0;
  bool frozen_ok = true;
  Parameters last_d;
  bool have_last = false;
  Stage2Hooks hooks;
  hooks.after_d_update = [&](const Parameters& d) {
    worst_weight = std::max(worst_weight, max_abs_clippable_weight(d));
    ++d_updates;
    last_d = d;
    have_last = true;
  };
  hooks.after_g_update = [&](const Parameters& d) {
    if (!have_last || !d.bitwise_equal(last_d)) frozen_ok = false;
  };

  Stage1Result s1a = train_stage1(g0, pairs, cfg);
  Stage1Result s1b = train_stage1(g0, pairs, cfg);
  Stage2Result s2a = train_stage2(s1a.g_params, d0, pairs, anchors, cfg, hooks);
  Stage2Result s2b = train_stage2(s1b.g_params, d0, pairs, anchors, cfg);

  auto logs_equal = [](const TrainingLog& a, const TrainingLog& b) {
    if (a.entries.size() != b.entries.size()) return false;
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
      const auto& x = a.entries[i];
      const auto& y = b.entries[i];
      if (x.iteration != y.iteration || x.stage != y.stage || x.loss_name != y.loss_name ||
          x.value != y.value)
        return false;
    }
    return true;
  };
  bool reproducible = logs_equal(s1a.log, s1b.log) && logs_equal(s2a.log, s2b.log) &&
                      s2a.g_params.bitwise_equal(s2b.g_params) &&
                      s2a.d_params.bitwise_equal(s2b.d_params);

  Outcome out;
  out.pass = worst_weight <= 0.05 && d_updates >= 8 && frozen_ok && reproducible;
  out.detail = "max |D weight| " + fmt("%.6f", worst_weight) + " (<=0.05) over " +
               std::to_string(d_updates) + " D updates; frozen-D " +
               (frozen_ok ? "bit-stable" : "CHANGED") + "; rerun logs+params " +
               (reproducible ? "identical" : "DIFFER");
  return out;
}

Outcome criterion4_restoration(Testbed& tb) {
  // Hold out the final (most severe) variant of every subject.
  std::vector<TrainingPair> train_pairs;
  std::vector<FaceImage> held_inputs, held_targets;
  for (const auto& rec : tb.manifest.subjects) {
    const FaceImage& anchor = tb.faces.at(rec.anchor);
    for (std::size_t v = 0; v < rec.variants.size(); ++v) {
      if (v + 1 == rec.variants.size()) {
        held_inputs.push_back(tb.faces.at(rec.variants[v]));
        held_targets.push_back(anchor);
      } else {
        train_pairs.push_back({tb.faces.at(rec.variants[v]), anchor});
      }
    }
  }

  SsimParams global;
  global.window = SsimWindow::global;
  double baseline = 0.0;
  for (std::size_t i = 0; i < held_inputs.size(); ++i)
    baseline += ssim(held_inputs[i], held_targets[i], global);
  baseline /= static_cast<double>(held_inputs.size());

  double gain_sum = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    TrainingConfig cfg;
    cfg.stage1_iterations = kStage1EpochsHoldout;
    cfg.batch_size = kTrainBatch;
    cfg.seed = seed;
    Parameters g0 = build_generator(NetworkSpec::small_generator(), 1000 + seed);
    Stage1Result res = train_stage1(g0, train_pairs, cfg);
    std::vector<FaceImage> restored = restore_batch(res.g_params, held_inputs);
    double restored_mean = 0.0;
    for (std::size_t i = 0; i < restored.size(); ++i)
      restored_mean += ssim(restored[i], held_targets[i], global);
    restored_mean /= static_cast<double>(restored.size());
    gain_sum += restored_mean - baseline;
    per_seed += (per_seed.empty() ? "" : "/") + fmt("%.3f", restored_mean - baseline);
  }
  double mean_gain = gain_sum / 3.0;

  Outcome out;
  out.pass = mean_gain >= 0.05;
  out.detail = "held-out ssim gain per seed " + per_seed + ", mean " + fmt("%.4f", mean_gain) +
               " (>=0.05; baseline " + fmt("%.4f", baseline) + ")";
  return out;
}

Outcome criterion5_erc_machinery(Testbed& tb) {
  CalibratedThreshold cal = calibrate_threshold(tb.mated, kTargetFnmr);
  double granularity = 1.0 / static_cast<double>(tb.mated.size());
  bool cal_ok = std::abs(cal.achieved_fnmr - kTargetFnmr) <= granularity + 1e-12;

  std::vector<double> fractions = default_rejection_fractions();

  // Reference curve agrees with its closed form exactly.
  ErcCurve perfect = perfect_curve(cal.achieved_fnmr, fractions);
  bool perfect_ok = true;
  for (std::size_t i = 0; i < fractions.size(); ++i)
    if (perfect.fnmr[i] != std::max(cal.achieved_fnmr - fractions[i], 0.0)) perfect_ok = false;

  // Library curve equals a fresh brute-force recount at every point, for both
  // an informative and a random quality assignment.
  bool exact_ok = true;
  Rng rng(55);
  for (int source = 0; source < 2; ++source) {
    std::map<std::string, double> qualities = tb.severity_quality;
    if (source == 1)
      for (auto& [id, q] : qualities) q = rng.uniform();
    ErcCurve curve = compute_erc(tb.pairs, qualities, cal.threshold, fractions);
    for (std::size_t i = 0; i < fractions.size(); ++i)
      if (curve.fnmr[i] != erc_point_oracle(tb.pairs, qualities, cal.threshold, fractions[i]))
        exact_ok = false;
    if (curve.initial_fnmr != erc_point_oracle(tb.pairs, qualities, cal.threshold, 0.0))
      exact_ok = false;
  }

  // Random quality must not systematically move FNMR for r <= 0.5.
  std::vector<double> mean_fnmr(fractions.size(), 0.0);
  const int n_seeds = 5;
  for (int s = 0; s < n_seeds; ++s) {
    Rng qrng(700 + static_cast<std::uint64_t>(s));
    std::map<std::string, double> random_q;
    for (const auto& [id, f] : tb.faces) random_q[id] = qrng.uniform();
    ErcCurve curve = compute_erc(tb.pairs, random_q, cal.threshold, fractions);
    for (std::size_t i = 0; i < fractions.size(); ++i)
      mean_fnmr[i] += curve.fnmr[i] / n_seeds;
  }
  double worst_dev = 0.0;
  for (std::size_t i = 0; i < fractions.size(); ++i)
    if (fractions[i] <= 0.5)
      worst_dev = std::max(worst_dev, std::abs(mean_fnmr[i] - kTargetFnmr));
  bool random_ok = worst_dev <= 0.03;

  Outcome out;
  out.pass = cal_ok && perfect_ok && exact_ok && random_ok;
  out.detail = "initial fnmr " + fmt("%.4f", cal.achieved_fnmr) + " (target 0.10 +- " +
               fmt("%.1e", granularity) + "), perfect curve " + (perfect_ok ? "exact" : "WRONG") +
               ", brute-force recount " + (exact_ok ? "exact" : "MISMATCH") +
               ", random-quality max dev " + fmt("%.3f", worst_dev) + " (<=0.03, r<=0.5)";
  return out;
}

Outcome criterion6_erc_trend(Testbed& tb) {
  // Train the quality model on the full corpus, then score every image.
  TrainingConfig cfg;
  cfg.stage1_iterations = kStage1EpochsFull;
  cfg.batch_size = kTrainBatch;
  cfg.seed = 1;
  auto pairs = make_training_pairs(tb.manifest);
  Parameters g0 = build_generator(NetworkSpec::small_generator(), 2001);
  Stage1Result res = train_stage1(g0, pairs, cfg);
  tb.trained_g = res.g_params;
  tb.trained_d = build_discriminator(NetworkSpec::small_discriminator(), 2002);
  tb.has_trained = true;

  SsimParams scoring = default_scoring_ssim();
  for (const auto& [id, face] : tb.faces)
    tb.q_ssim[id] = score_quality(tb.trained_g, tb.trained_d, face, scoring).q_ssim;

  CalibratedThreshold cal = calibrate_threshold(tb.mated, kTargetFnmr);
  std::vector<double> fractions = default_rejection_fractions();
  ErcCurve measured = compute_erc(tb.pairs, tb.q_ssim, cal.threshold, fractions);
  // Oracle: the same quality definition with a perfect restorer, i.e. ssim
  // against the subject's true anchor instead of the generator's restoration.
  ErcCurve oracle = compute_erc(tb.pairs, tb.reference_quality, cal.threshold, fractions);

  std::size_t at20 = 4;  // fractions[4] == 0.20
  double margin = measured.initial_fnmr - measured.fnmr[at20];
  bool drop_ok = measured.fnmr[at20] < measured.initial_fnmr && margin >= 0.01;
  bool oracle_ok = oracle.fnmr[at20] <= measured.fnmr[at20];

  Outcome out;
  out.pass = drop_ok && oracle_ok;
  out.detail = "fnmr r=0 " + fmt("%.4f", measured.initial_fnmr) + " -> r=0.2 " +
               fmt("%.4f", measured.fnmr[at20]) + " (margin " + fmt("%.4f", margin) +
               " >= 0.01); reference oracle " + fmt("%.4f", oracle.fnmr[at20]) +
               (oracle_ok ? " lower-bounds it" : " ABOVE measured");
  return out;
}

Outcome criterion7_tertile_eer(Testbed& tb) {
  if (!tb.has_trained) return {false, "criterion 6 did not produce a trained model"};
  auto bins = bin_by_quality(tb.q_ssim, 3);
  auto subset_eer = [&](const std::vector<std::string>& ids, long* n_mated, long* n_nonmated) {
    std::set<std::string> keep(ids.begin(), ids.end());
    std::vector<VerificationPair> subset;
    for (const auto& p : tb.pairs)
      if (keep.count(p.id_a) && keep.count(p.id_b)) subset.push_back(p);
    *n_mated = 0;
    *n_nonmated = 0;
    for (const auto& p : subset) (p.mated ? *n_mated : *n_nonmated) += 1;
    return equal_error_rate(subset);
  };
  long m_low, nm_low, m_mid, nm_mid, m_high, nm_high;
  double low = subset_eer(bins[0], &m_low, &nm_low);
  double mid = subset_eer(bins[1], &m_mid, &nm_mid);
  double high = subset_eer(bins[2], &m_high, &nm_high);
  double all = equal_error_rate(tb.pairs);

  Outcome out;
  out.pass = high <= all && all <= low;
  out.detail = "eer high " + fmt("%.4f", high) + " <= all " + fmt("%.4f", all) + " <= low " +
               fmt("%.4f", low) + " (mid " + fmt("%.4f", mid) + "; tertile pairs " +
               std::to_string(m_low + nm_low) + "/" + std::to_string(m_mid + nm_mid) + "/" +
               std::to_string(m_high + nm_high) + ")";
  return out;
}

Outcome criterion8_determinism(Testbed& tb) {
  // Checkpoint round trip on trained parameters.
  fs::path dir = fs::temp_directory_path() / "faceqr_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  bool ckpt_ok = true;
  if (tb.has_trained) {
    save_checkpoint(tb.trained_g, dir / "g.ckpt");
    Parameters loaded = load_checkpoint(dir / "g.ckpt");
    ckpt_ok = loaded.bitwise_equal(tb.trained_g);
    save_checkpoint(loaded, dir / "g2.ckpt");
    ckpt_ok = ckpt_ok && file_bytes(dir / "g.ckpt") == file_bytes(dir / "g2.ckpt") &&
              !file_bytes(dir / "g.ckpt").empty();
  } else {
    ckpt_ok = false;
  }

  // Two full pipeline runs from one seed must agree byte for byte.
  auto run_once = [&](const fs::path& out_dir) {
    RunConfig cfg = default_run_config();
    cfg.model_preset = "small";
    cfg.synth.n_subjects = 4;
    cfg.synth.n_variants = 2;
    cfg.training.stage1_iterations = 1;
    cfg.training.stage2_iterations = 1;
    cfg.training.batch_size = 8;
    cfg.evaluation.n_nonmated_per_image = 2;
    cfg.seed = 909;
    cfg.output_dir = out_dir.string();
    RunContext ctx = make_run_context(cfg);
    run_synth(ctx);
    run_train(ctx);
    run_score(ctx, {});
    run_erc(ctx, std::nullopt, std::nullopt);
  };
  run_once(dir / "a");
  run_once(dir / "b");

  std::vector<std::string> files = {"dataset/degradations.csv", "training_log.csv",
                                    "scores.csv",    "similarities.csv",
                                    "erc_q_mse.csv", "erc_q_ssim.csv",
                                    "erc_q_disc.csv", "erc_perfect.csv",
                                    "generator.ckpt", "discriminator.ckpt"};
  std::string first_diff;
  for (const auto& f : files) {
    auto ba = file_bytes(dir / "a" / f);
    if (ba.empty() || ba != file_bytes(dir / "b" / f)) {
      first_diff = f;
      break;
    }
  }

  Outcome out;
  out.pass = ckpt_ok && first_diff.empty();
  out.detail = std::string("checkpoint round-trip ") + (ckpt_ok ? "bit-exact" : "MISMATCH") +
               "; rerun outputs " +
               (first_diff.empty() ? "byte-identical (" + std::to_string(files.size()) + " files)"
                                   : "differ at " + first_diff);
  return out;
}

}  // namespace

int main() {
  std::printf("building shared testbed (%d subjects x %d variants)...\n", kSubjects, kVariants);
  std::fflush(stdout);
  auto t0 = std::chrono::steady_clock::now();
  Testbed tb = build_testbed();
  std::printf("testbed ready: %zu images, %zu pairs (%zu mated) [%.1f s]\n", tb.faces.size(),
              tb.pairs.size(), tb.mated.size(),
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  std::fflush(stdout);

  run_criterion(1, "ssim correctness", 5, criterion1_ssim);
  run_criterion(2, "gradient checks", 30, criterion2_gradients);
  run_criterion(3, "training protocol invariants", 120, criterion3_training_protocol);
  run_criterion(4, "restoration learning", 600, [&] { return criterion4_restoration(tb); });
  run_criterion(5, "erc machinery", 60, [&] { return criterion5_erc_machinery(tb); });
  run_criterion(6, "erc trend with q_ssim", 300, [&] { return criterion6_erc_trend(tb); });
  run_criterion(7, "tertile eer trend", 120, [&] { return criterion7_tertile_eer(tb); });
  run_criterion(8, "determinism and persistence", 600, [&] { return criterion8_determinism(tb); });

  if (g_failures == 0)
    std::printf("all 8 acceptance criteria passed\n");
  else
    std::printf("%d of 8 acceptance criteria FAILED\n", g_failures);
  return g_failures;
}
