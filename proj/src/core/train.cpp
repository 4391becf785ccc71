#include "core/train.hpp"

#include <chrono>
#include <cmath>

#include "core/csvio.hpp"
#include "core/rng.hpp"

namespace faceqr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Deterministic shuffled index stream; the final batch of a pass may be
// shorter than batch_size.
class BatchStream {
 public:
  BatchStream(std::size_t n, int batch_size, Rng& rng)
      : batch_size_(static_cast<std::size_t>(batch_size)), rng_(rng) {
    order_.resize(n);
    for (std::size_t i = 0; i < n; ++i) order_[i] = i;
    reshuffle();
  }

  std::vector<std::size_t> next_batch() {
    if (pos_ == order_.size()) reshuffle();
    std::size_t take = std::min(batch_size_, order_.size() - pos_);
    std::vector<std::size_t> batch(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                   order_.begin() + static_cast<std::ptrdiff_t>(pos_ + take));
    pos_ += take;
    return batch;
  }

  bool at_pass_start() const { return pos_ == 0; }
  std::size_t batches_per_pass() const {
    return (order_.size() + batch_size_ - 1) / batch_size_;
  }

 private:
  void reshuffle() {
    rng_.shuffle(order_);
    pos_ = 0;
  }

  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::size_t pos_ = 0;
  Rng& rng_;
};

Tensor gather_inputs(const std::vector<TrainingPair>& pairs, const std::vector<std::size_t>& idx) {
  std::vector<FaceImage> faces;
  faces.reserve(idx.size());
  for (std::size_t i : idx) faces.push_back(pairs[i].input);
  return batch_from_faces(faces);
}

Tensor gather_targets(const std::vector<TrainingPair>& pairs, const std::vector<std::size_t>& idx) {
  std::vector<FaceImage> faces;
  faces.reserve(idx.size());
  for (std::size_t i : idx) faces.push_back(pairs[i].target);
  return batch_from_faces(faces);
}

Tensor concat_batches(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 4 && b.ndim() == 4 && a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2) &&
              a.dim(3) == b.dim(3),
          ErrorCode::shape, "cannot concatenate batches of different image shapes");
  Tensor out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2), a.dim(3)});
  std::copy(a.data(), a.data() + a.size(), out.data());
  std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
  return out;
}

void check_finite_loss(double loss, const char* what) {
  require(std::isfinite(loss), ErrorCode::diverged,
          std::string(what) + " became non-finite; training aborted");
}

void accumulate_scaled(Tensor& dst, const Tensor& src, double scale) {
  require(dst.same_shape(src), ErrorCode::shape, "gradient shape mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

}  // namespace

const char* iteration_unit_name(IterationUnit unit) {
  return unit == IterationUnit::epoch ? "epoch" : "batch_step";
}

IterationUnit iteration_unit_from_name(const std::string& name) {
  if (name == "epoch") return IterationUnit::epoch;
  if (name == "batch_step") return IterationUnit::batch_step;
  raise(ErrorCode::invalid_argument, "unknown iteration_unit: " + name);
}

void validate_training_config(const TrainingConfig& cfg) {
  require(cfg.stage1_iterations >= 1, ErrorCode::invalid_argument,
          "stage1_iterations must be >= 1");
  require(cfg.stage2_iterations >= 1, ErrorCode::invalid_argument,
          "stage2_iterations must be >= 1");
  require(cfg.batch_size >= 1, ErrorCode::invalid_argument, "batch_size must be >= 1");
  require(cfg.learning_rate > 0.0, ErrorCode::invalid_argument, "learning_rate must be > 0");
  require(cfg.clip_c > 0.0, ErrorCode::invalid_argument, "clip_c must be > 0");
  require(cfg.adversarial_recon_weight >= 0.0, ErrorCode::invalid_argument,
          "adversarial_recon_weight must be >= 0");
  require(cfg.adam_beta1 > 0.0 && cfg.adam_beta1 < 1.0 && cfg.adam_beta2 > 0.0 &&
              cfg.adam_beta2 < 1.0,
          ErrorCode::invalid_argument, "adam betas must lie in (0,1)");
  require(cfg.adam_epsilon > 0.0, ErrorCode::invalid_argument, "adam_epsilon must be > 0");
}

std::vector<TrainingPair> make_training_pairs(const DatasetManifest& manifest) {
  require(!manifest.subjects.empty(), ErrorCode::invalid_argument, "manifest has no subjects");
  std::vector<TrainingPair> pairs;
  for (const SubjectRecord& rec : manifest.subjects) {
    require(!rec.variants.empty(), ErrorCode::invalid_argument,
            "subject \"" + rec.subject_id + "\" has no variants to train on");
    FaceImage anchor = load_face(manifest, rec.anchor);
    for (const std::string& v : rec.variants)
      pairs.push_back(TrainingPair{load_face(manifest, v), anchor});
  }
  return pairs;
}

std::vector<FaceImage> load_anchor_faces(const DatasetManifest& manifest) {
  std::vector<FaceImage> anchors;
  anchors.reserve(manifest.subjects.size());
  for (const SubjectRecord& rec : manifest.subjects)
    anchors.push_back(load_face(manifest, rec.anchor));
  return anchors;
}

void write_training_log_csv(const TrainingLog& log, const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(log.entries.size());
  for (const TrainingLogEntry& e : log.entries)
    rows.push_back({std::to_string(e.iteration), std::to_string(e.stage), e.loss_name,
                    format_double(e.value)});
  write_csv(path, {"iteration", "stage", "loss_name", "value"}, rows);
}

AdamState make_adam_state(const Parameters& params) {
  AdamState state;
  state.layers.resize(params.layers.size());
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const LayerParams& p = params.layers[i];
    const Tensor* slots[4] = {&p.weight, &p.bias, &p.gamma, &p.beta};
    for (int s = 0; s < 4; ++s) {
      if (slots[s]->empty()) continue;
      state.layers[i][static_cast<std::size_t>(s)].m = Tensor::zeros_like(*slots[s]);
      state.layers[i][static_cast<std::size_t>(s)].v = Tensor::zeros_like(*slots[s]);
    }
  }
  return state;
}

void adam_step(Parameters& params, const Gradients& grads, AdamState& state,
               const TrainingConfig& cfg) {
  require(grads.layers.size() == params.layers.size() &&
              state.layers.size() == params.layers.size(),
          ErrorCode::shape, "optimizer state does not match parameters");
  state.step += 1;
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    LayerParams& p = params.layers[i];
    const LayerParams& g = grads.layers[i];
    Tensor* pslots[4] = {&p.weight, &p.bias, &p.gamma, &p.beta};
    const Tensor* gslots[4] = {&g.weight, &g.bias, &g.gamma, &g.beta};
    for (int s = 0; s < 4; ++s) {
      Tensor& pt = *pslots[s];
      if (pt.empty()) continue;
      const Tensor& gt = *gslots[s];
      require(gt.same_shape(pt), ErrorCode::shape, "gradient shape mismatch in adam_step");
      AdamSlotState& st = state.layers[i][static_cast<std::size_t>(s)];
      for (std::size_t j = 0; j < pt.size(); ++j) {
        st.m[j] = cfg.adam_beta1 * st.m[j] + (1.0 - cfg.adam_beta1) * gt[j];
        st.v[j] = cfg.adam_beta2 * st.v[j] + (1.0 - cfg.adam_beta2) * gt[j] * gt[j];
        double m_hat = st.m[j] / c1;
        double v_hat = st.v[j] / c2;
        pt[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
      }
      quantize_f32(pt);
    }
  }
}

Stage1Result train_stage1(const Parameters& g_params, const std::vector<TrainingPair>& pairs,
                          const TrainingConfig& cfg) {
  validate_training_config(cfg);
  require(!pairs.empty(), ErrorCode::invalid_argument, "stage 1 needs a non-empty pair list");

  Stage1Result result;
  result.g_params = g_params;
  AdamState adam = make_adam_state(result.g_params);
  Rng rng(Rng::splitmix(cfg.seed ^ 0x5a71c001ULL));
  BatchStream stream(pairs.size(), cfg.batch_size, rng);
  const Clock::time_point start = Clock::now();

  auto run_batch = [&]() -> double {
    std::vector<std::size_t> idx = stream.next_batch();
    Tensor x = gather_inputs(pairs, idx);
    Tensor t = gather_targets(pairs, idx);
    LossBackward lb = net_loss_backward(result.g_params, x, LossKind::ssim_recon, t, Mode::train,
                                        cfg.stage1_ssim);
    check_finite_loss(lb.loss, "stage-1 SSIM loss");
    result.g_params = fold_batchnorm_stats(result.g_params, lb.trace);
    adam_step(result.g_params, lb.grads, adam, cfg);
    return lb.loss;
  };

  for (int it = 1; it <= cfg.stage1_iterations; ++it) {
    double value = 0.0;
    if (cfg.iteration_unit == IterationUnit::epoch) {
      std::size_t batches = stream.batches_per_pass();
      double sum = 0.0;
      for (std::size_t b = 0; b < batches; ++b) sum += run_batch();
      value = sum / static_cast<double>(batches);
    } else {
      value = run_batch();
    }
    result.log.entries.push_back({it, 1, "ssim_loss", value, seconds_since(start)});
  }
  return result;
}

Stage2Result train_stage2(const Parameters& g_params, const Parameters& d_params,
                          const std::vector<TrainingPair>& pairs,
                          const std::vector<FaceImage>& anchors, const TrainingConfig& cfg,
                          const Stage2Hooks& hooks) {
  validate_training_config(cfg);
  require(!pairs.empty(), ErrorCode::invalid_argument, "stage 2 needs a non-empty pair list");
  require(!anchors.empty(), ErrorCode::invalid_argument, "stage 2 needs anchor images");

  Stage2Result result;
  result.g_params = g_params;
  result.d_params = d_params;
  AdamState g_adam = make_adam_state(result.g_params);
  AdamState d_adam = make_adam_state(result.d_params);
  Rng rng(Rng::splitmix(cfg.seed ^ 0x5a71c002ULL));
  BatchStream d_stream(pairs.size(), cfg.batch_size, rng);
  BatchStream g_stream(pairs.size(), cfg.batch_size, rng);
  BatchStream anchor_stream(anchors.size(), cfg.batch_size, rng);
  const double clip_bound = f32_clip_bound(cfg.clip_c);
  const int d_last = static_cast<int>(result.d_params.layers.size()) - 1;
  const bool d_ends_in_sigmoid =
      result.d_params.spec.layers.back().kind == LayerKind::sigmoid;
  const Clock::time_point start = Clock::now();

  // One discriminator update: anchors labelled 1 and restorations labelled 0,
  // trained jointly in a single batch, clipped immediately afterwards.
  auto run_d_batch = [&]() -> double {
    std::vector<std::size_t> idx = d_stream.next_batch();
    Tensor x = gather_inputs(pairs, idx);
    Tensor restored = net_forward(result.g_params, x, Mode::eval).output;

    std::vector<std::size_t> aidx;
    while (aidx.size() < idx.size()) {
      std::vector<std::size_t> chunk = anchor_stream.next_batch();
      for (std::size_t a : chunk) {
        aidx.push_back(a);
        if (aidx.size() == idx.size()) break;
      }
    }
    std::vector<FaceImage> anchor_faces;
    anchor_faces.reserve(aidx.size());
    for (std::size_t a : aidx) anchor_faces.push_back(anchors[a]);
    Tensor anchor_batch = batch_from_faces(anchor_faces);

    Tensor combined = concat_batches(anchor_batch, restored);
    Tensor labels({combined.dim(0), 1, 1, 1});
    for (int n = 0; n < anchor_batch.dim(0); ++n) labels[static_cast<std::size_t>(n)] = 1.0;

    LossBackward lb = net_loss_backward(result.d_params, combined, LossKind::bce, labels,
                                        Mode::train, {});
    check_finite_loss(lb.loss, "stage-2 discriminator loss");
    result.d_params = fold_batchnorm_stats(result.d_params, lb.trace);
    adam_step(result.d_params, lb.grads, d_adam, cfg);
    result.d_params = clip_weights(result.d_params, clip_bound);
    if (hooks.after_d_update) hooks.after_d_update(result.d_params);
    return lb.loss;
  };

  // One frozen-D generator update: D runs in eval mode and only supplies the
  // gradient; its parameters are never touched.
  auto run_g_batch = [&]() -> double {
    std::vector<std::size_t> idx = g_stream.next_batch();
    Tensor x = gather_inputs(pairs, idx);
    ForwardTrace g_trace = net_forward(result.g_params, x, Mode::train);
    ForwardTrace d_trace = net_forward(result.d_params, g_trace.output, Mode::eval);

    Tensor ones({d_trace.output.dim(0), 1, 1, 1});
    ones.fill(1.0);
    LossValue bce = bce_loss(d_trace.output, ones, d_ends_in_sigmoid);
    double loss = bce.loss;
    BackwardResult through_d =
        d_ends_in_sigmoid
            ? net_backward_from(result.d_params, d_trace, bce.d_output, d_last - 1)
            : net_backward(result.d_params, d_trace, bce.d_output);
    Tensor d_restored = std::move(through_d.input_grad);

    if (cfg.adversarial_recon_weight > 0.0) {
      Tensor targets = gather_targets(pairs, idx);
      LossValue recon = ssim_recon_loss(g_trace.output, targets, cfg.stage1_ssim);
      loss += cfg.adversarial_recon_weight * recon.loss;
      accumulate_scaled(d_restored, recon.d_output, cfg.adversarial_recon_weight);
    }
    check_finite_loss(loss, "stage-2 generator loss");

    BackwardResult through_g = net_backward(result.g_params, g_trace, d_restored);
    result.g_params = fold_batchnorm_stats(result.g_params, g_trace);
    adam_step(result.g_params, through_g.grads, g_adam, cfg);
    if (hooks.after_g_update) hooks.after_g_update(result.d_params);
    return loss;
  };

  for (int it = 1; it <= cfg.stage2_iterations; ++it) {
    double d_value = 0.0;
    double g_value = 0.0;
    if (cfg.iteration_unit == IterationUnit::epoch) {
      std::size_t batches = d_stream.batches_per_pass();
      double d_sum = 0.0;
      for (std::size_t b = 0; b < batches; ++b) d_sum += run_d_batch();
      d_value = d_sum / static_cast<double>(batches);
      double g_sum = 0.0;
      for (std::size_t b = 0; b < batches; ++b) g_sum += run_g_batch();
      g_value = g_sum / static_cast<double>(batches);
    } else {
      d_value = run_d_batch();
      g_value = run_g_batch();
    }
    result.log.entries.push_back({it, 2, "d_loss", d_value, seconds_since(start)});
    result.log.entries.push_back({it, 2, "g_loss", g_value, seconds_since(start)});
  }
  return result;
}

}  // namespace faceqr
