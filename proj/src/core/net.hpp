#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "core/image.hpp"
#include "core/metrics.hpp"
#include "core/tensor.hpp"

namespace faceqr {

enum class LayerKind {
  conv,
  transposed_conv,
  fully_connected,
  leaky_relu,
  batch_norm,
  sigmoid,
};

const char* layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  int filters = 0;       // conv / transposed_conv output channels
  int kernel_h = 0;
  int kernel_w = 0;
  int stride = 1;
  int out_features = 0;  // fully_connected
  double slope = 0.2;    // leaky_relu

  static LayerSpec conv2d(int filters, int kernel, int stride);
  static LayerSpec tconv2d(int filters, int kernel, int stride);
  static LayerSpec fc(int out_features);
  static LayerSpec lrelu(double slope = 0.2);
  static LayerSpec batchnorm();
  static LayerSpec sigmoid_out();
};

enum class NetworkRole { generator, discriminator };

struct NetworkSpec {
  NetworkRole role = NetworkRole::generator;
  std::vector<LayerSpec> layers;

  static NetworkSpec default_generator();
  static NetworkSpec default_discriminator();
  // Reduced filter counts for desk-scale corpora; same topology and strides.
  static NetworkSpec small_generator();
  static NetworkSpec small_discriminator();
};

// Shape of a feature map as (channels, height, width).
using FeatureShape = std::array<int, 3>;

constexpr FeatureShape kInputShape{FaceImage::kChannels, FaceImage::kSize,
                                   FaceImage::kSize};

// Walks the spec and returns each layer's output shape; throws a shape error
// naming the first offending layer index.
std::vector<FeatureShape> infer_shapes(const NetworkSpec& spec);

void validate_generator_spec(const NetworkSpec& spec);
void validate_discriminator_spec(const NetworkSpec& spec);

struct LayerParams {
  Tensor weight;        // conv: [outC,inC,kh,kw]; tconv: [inC,outC,kh,kw]; fc: [out,in]
  Tensor bias;          // [outC] / [out]; batch_norm scale+shift live in gamma/beta
  Tensor gamma, beta;   // batch_norm parameters
  Tensor running_mean;  // batch_norm statistics (not trained, not clipped)
  Tensor running_var;
};

// Value-semantic parameter set; the owning spec travels with the grids so a
// Parameters object is runnable on its own.
struct Parameters {
  NetworkSpec spec;
  std::vector<LayerParams> layers;

  bool bitwise_equal(const Parameters& other) const;
};

// Deterministic fan-in-scaled initialization. All parameter values are kept
// exactly representable in 32-bit floats so checkpoints round-trip bit-exactly.
Parameters init_parameters(const NetworkSpec& spec, std::uint64_t seed);
Parameters build_generator(const NetworkSpec& spec, std::uint64_t seed);
Parameters build_discriminator(const NetworkSpec& spec, std::uint64_t seed);

// Clamps conv / transposed_conv / fully_connected weight grids to [-c, c].
// Biases and batch-norm parameters/statistics are untouched. Idempotent.
Parameters clip_weights(const Parameters& params, double c);
double max_abs_clippable_weight(const Parameters& params);

// Rounds every value to the nearest float32. Parameters are kept
// float32-representable at all times so checkpoints round-trip bit-exactly.
void quantize_f32(Tensor& t);

// Largest float32-representable bound not exceeding c. Clipping at this
// bound keeps parameters float32-representable without ever exceeding c.
double f32_clip_bound(double c);

enum class Mode { train, eval };

struct LayerTrace {
  std::array<int, 4> in_shape{};  // NCHW input dims, recorded for every layer
  Tensor input;       // layer input (lrelu/tconv/fc backward)
  Tensor output;      // layer output (sigmoid backward)
  Tensor col;         // im2col buffer (conv backward)
  Tensor xhat;        // batch_norm normalized input
  Tensor inv_std;     // [C]
  Tensor batch_mean;  // [C], train mode only
  Tensor batch_var;   // [C], train mode only
};

struct ForwardTrace {
  Mode mode = Mode::eval;
  std::vector<LayerTrace> layers;
  Tensor output;
};

// Pure with respect to params: train mode normalizes with batch statistics
// but the running statistics inside params are not touched. The trace carries
// the batch statistics so a training step can fold them in explicitly.
ForwardTrace net_forward(const Parameters& params, const Tensor& input,
                         Mode mode);

struct Gradients {
  std::vector<LayerParams> layers;  // same grid shapes as Parameters
};

// Backpropagates d_output (gradient at the network output) through all
// layers; returns parameter gradients and the gradient at the input.
struct BackwardResult {
  Gradients grads;
  Tensor input_grad;
};
BackwardResult net_backward(const Parameters& params, const ForwardTrace& trace,
                            const Tensor& d_output);
// Starts below the final layer (used to fuse sigmoid + binary cross-entropy).
BackwardResult net_backward_from(const Parameters& params,
                                 const ForwardTrace& trace,
                                 const Tensor& d_at_layer, int top_layer);

// Returns new Parameters with batch-norm running statistics advanced by the
// batch statistics captured in `trace` (momentum 0.1).
Parameters fold_batchnorm_stats(const Parameters& params,
                                const ForwardTrace& trace);

enum class LossKind { ssim_recon, bce };

struct LossValue {
  double loss = 0.0;
  Tensor d_output;          // gradient at the network output
  bool fused_bce = false;   // when set, d_output is w.r.t. the pre-sigmoid input
};

// Binary cross-entropy over scalar outputs; targets shaped like outputs.
// When the network ends in a sigmoid the gradient is fused through it.
LossValue bce_loss(const Tensor& outputs, const Tensor& targets,
                   bool fuse_through_sigmoid);
// Mean (1 - SSIM) over the batch; outputs/targets are [N,3,32,32].
LossValue ssim_recon_loss(const Tensor& outputs, const Tensor& targets,
                          const SsimParams& ssim_params);

// Spec-level convenience: forward + loss + full backward in one call.
struct LossBackward {
  double loss = 0.0;
  Gradients grads;
  Tensor input_grad;
  ForwardTrace trace;
};
LossBackward net_loss_backward(const Parameters& params, const Tensor& input,
                               LossKind kind, const Tensor& targets, Mode mode,
                               const SsimParams& ssim_params);

// Batch conversion helpers (FaceImage HWC <-> network NCHW).
Tensor batch_from_faces(const std::vector<FaceImage>& faces);
std::vector<FaceImage> faces_from_batch(const Tensor& batch,
                                        Provenance provenance);

// Eval-mode forwards exposed at FaceImage granularity.
std::vector<FaceImage> generator_forward(const Parameters& params,
                                         const std::vector<FaceImage>& batch,
                                         Mode mode);
std::vector<double> discriminator_forward(const Parameters& params,
                                          const std::vector<FaceImage>& batch,
                                          Mode mode);

}  // namespace faceqr
