#include "core/net.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "core/rng.hpp"

namespace faceqr {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

// Geometry of a strided "same" convolution between a large (pre-stride) space
// and a small (post-stride) space. Transposed convolutions reuse it with the
// roles of the two spaces swapped.
struct ConvGeom {
  int k_h, k_w, stride;
  int big_h, big_w;      // large space
  int small_h, small_w;  // small space
  int pad_top, pad_left;
};

ConvGeom conv_geom(int big_h, int big_w, int k_h, int k_w, int stride) {
  ConvGeom g;
  g.k_h = k_h;
  g.k_w = k_w;
  g.stride = stride;
  g.big_h = big_h;
  g.big_w = big_w;
  g.small_h = (big_h + stride - 1) / stride;
  g.small_w = (big_w + stride - 1) / stride;
  int pad_h = std::max(0, (g.small_h - 1) * stride + k_h - big_h);
  int pad_w = std::max(0, (g.small_w - 1) * stride + k_w - big_w);
  g.pad_top = pad_h / 2;
  g.pad_left = pad_w / 2;
  return g;
}

// Gathers the big-space tensor x [N,C,big_h,big_w] into
// col[(c*kh+ki)*kw+kj, n*sh*sw + sy*sw + sx] with zero padding.
Tensor im2col(const Tensor& x, const ConvGeom& g) {
  const int n = x.dim(0), c = x.dim(1);
  const int rows = c * g.k_h * g.k_w;
  const std::size_t small_plane = static_cast<std::size_t>(g.small_h) * g.small_w;
  const int cols = n * static_cast<int>(small_plane);
  Tensor col({rows, cols});
  const std::size_t big_plane = static_cast<std::size_t>(g.big_h) * g.big_w;
  for (int ch = 0; ch < c; ++ch)
    for (int ki = 0; ki < g.k_h; ++ki)
      for (int kj = 0; kj < g.k_w; ++kj) {
        double* dst =
            col.data() +
            static_cast<std::size_t>((ch * g.k_h + ki) * g.k_w + kj) * cols;
        for (int ni = 0; ni < n; ++ni) {
          const double* src =
              x.data() + (static_cast<std::size_t>(ni) * c + ch) * big_plane;
          for (int sy = 0; sy < g.small_h; ++sy) {
            int by = sy * g.stride + ki - g.pad_top;
            double* d = dst + static_cast<std::size_t>(ni) * small_plane +
                        static_cast<std::size_t>(sy) * g.small_w;
            if (by < 0 || by >= g.big_h) {
              std::fill(d, d + g.small_w, 0.0);
              continue;
            }
            for (int sx = 0; sx < g.small_w; ++sx) {
              int bx = sx * g.stride + kj - g.pad_left;
              d[sx] = (bx >= 0 && bx < g.big_w)
                          ? src[static_cast<std::size_t>(by) * g.big_w + bx]
                          : 0.0;
            }
          }
        }
      }
  return col;
}

// Adjoint of im2col: scatter-adds a column buffer back into the big space.
Tensor col2im(const Tensor& col, const ConvGeom& g, int n, int c) {
  Tensor x({n, c, g.big_h, g.big_w});
  const std::size_t small_plane = static_cast<std::size_t>(g.small_h) * g.small_w;
  const int cols = n * static_cast<int>(small_plane);
  const std::size_t big_plane = static_cast<std::size_t>(g.big_h) * g.big_w;
  for (int ch = 0; ch < c; ++ch)
    for (int ki = 0; ki < g.k_h; ++ki)
      for (int kj = 0; kj < g.k_w; ++kj) {
        const double* src =
            col.data() +
            static_cast<std::size_t>((ch * g.k_h + ki) * g.k_w + kj) * cols;
        for (int ni = 0; ni < n; ++ni) {
          double* dst = x.data() + (static_cast<std::size_t>(ni) * c + ch) * big_plane;
          for (int sy = 0; sy < g.small_h; ++sy) {
            int by = sy * g.stride + ki - g.pad_top;
            if (by < 0 || by >= g.big_h) continue;
            const double* s = src + static_cast<std::size_t>(ni) * small_plane +
                              static_cast<std::size_t>(sy) * g.small_w;
            for (int sx = 0; sx < g.small_w; ++sx) {
              int bx = sx * g.stride + kj - g.pad_left;
              if (bx >= 0 && bx < g.big_w)
                dst[static_cast<std::size_t>(by) * g.big_w + bx] += s[sx];
            }
          }
        }
      }
  return x;
}

// Repacks NCHW <-> [C, N*H*W] matrices (channel-major views used for GEMM).
Tensor nchw_to_cm(const Tensor& x) {
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  const int cols = n * static_cast<int>(plane);
  Tensor m({c, cols});
  for (int ch = 0; ch < c; ++ch)
    for (int ni = 0; ni < n; ++ni)
      std::copy(x.data() + (static_cast<std::size_t>(ni) * c + ch) * plane,
                x.data() + (static_cast<std::size_t>(ni) * c + ch + 1) * plane,
                m.data() + static_cast<std::size_t>(ch) * cols +
                    static_cast<std::size_t>(ni) * plane);
  return m;
}

Tensor cm_to_nchw(const Tensor& m, int n, int c, int h, int w) {
  Tensor x({n, c, h, w});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t cols = static_cast<std::size_t>(n) * plane;
  for (int ch = 0; ch < c; ++ch)
    for (int ni = 0; ni < n; ++ni)
      std::copy(m.data() + static_cast<std::size_t>(ch) * cols +
                    static_cast<std::size_t>(ni) * plane,
                m.data() + static_cast<std::size_t>(ch) * cols +
                    static_cast<std::size_t>(ni + 1) * plane,
                x.data() + (static_cast<std::size_t>(ni) * c + ch) * plane);
  return x;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void quantize_f32(Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<double>(static_cast<float>(t[i]));
}

double f32_clip_bound(double c) {
  require(c > 0.0, ErrorCode::invalid_argument, "clip bound must be positive");
  float fc = static_cast<float>(c);
  while (static_cast<double>(fc) > c) fc = std::nextafter(fc, 0.0f);
  return static_cast<double>(fc);
}

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::transposed_conv: return "transposed_conv";
    case LayerKind::fully_connected: return "fully_connected";
    case LayerKind::leaky_relu: return "leaky_relu";
    case LayerKind::batch_norm: return "batch_norm";
    case LayerKind::sigmoid: return "sigmoid";
  }
  raise(ErrorCode::internal, "unknown layer kind");
}

LayerKind layer_kind_from_name(const std::string& name) {
  for (auto k : {LayerKind::conv, LayerKind::transposed_conv,
                 LayerKind::fully_connected, LayerKind::leaky_relu,
                 LayerKind::batch_norm, LayerKind::sigmoid})
    if (name == layer_kind_name(k)) return k;
  raise(ErrorCode::invalid_argument, "unknown layer kind: " + name);
}

LayerSpec LayerSpec::conv2d(int filters, int kernel, int stride) {
  LayerSpec l;
  l.kind = LayerKind::conv;
  l.filters = filters;
  l.kernel_h = l.kernel_w = kernel;
  l.stride = stride;
  return l;
}

LayerSpec LayerSpec::tconv2d(int filters, int kernel, int stride) {
  LayerSpec l = conv2d(filters, kernel, stride);
  l.kind = LayerKind::transposed_conv;
  return l;
}

LayerSpec LayerSpec::fc(int out_features) {
  LayerSpec l;
  l.kind = LayerKind::fully_connected;
  l.out_features = out_features;
  return l;
}

LayerSpec LayerSpec::lrelu(double slope) {
  LayerSpec l;
  l.kind = LayerKind::leaky_relu;
  l.slope = slope;
  return l;
}

LayerSpec LayerSpec::batchnorm() {
  LayerSpec l;
  l.kind = LayerKind::batch_norm;
  return l;
}

LayerSpec LayerSpec::sigmoid_out() {
  LayerSpec l;
  l.kind = LayerKind::sigmoid;
  return l;
}

namespace {

NetworkSpec make_generator(int f1, int f2, int f3) {
  NetworkSpec s;
  s.role = NetworkRole::generator;
  s.layers = {
      LayerSpec::conv2d(f1, 3, 2),  LayerSpec::lrelu(),
      LayerSpec::conv2d(f2, 3, 2),  LayerSpec::lrelu(),
      LayerSpec::conv2d(f3, 3, 2),  LayerSpec::lrelu(),
      LayerSpec::tconv2d(f2, 3, 2), LayerSpec::lrelu(),
      LayerSpec::tconv2d(f1, 3, 2), LayerSpec::lrelu(),
      LayerSpec::tconv2d(3, 3, 2),  LayerSpec::sigmoid_out(),
  };
  return s;
}

NetworkSpec make_discriminator(int f1, int f2, int fc1) {
  NetworkSpec s;
  s.role = NetworkRole::discriminator;
  s.layers = {
      LayerSpec::conv2d(f1, 4, 3), LayerSpec::lrelu(), LayerSpec::batchnorm(),
      LayerSpec::conv2d(f2, 4, 3), LayerSpec::lrelu(), LayerSpec::batchnorm(),
      LayerSpec::fc(fc1),          LayerSpec::lrelu(),
      LayerSpec::fc(1),            LayerSpec::sigmoid_out(),
  };
  return s;
}

}  // namespace

NetworkSpec NetworkSpec::default_generator() { return make_generator(64, 128, 256); }
NetworkSpec NetworkSpec::default_discriminator() { return make_discriminator(64, 128, 128); }
NetworkSpec NetworkSpec::small_generator() { return make_generator(16, 32, 64); }
NetworkSpec NetworkSpec::small_discriminator() { return make_discriminator(16, 32, 32); }

std::vector<FeatureShape> infer_shapes(const NetworkSpec& spec) {
  require(!spec.layers.empty(), ErrorCode::shape, "network has no layers");
  std::vector<FeatureShape> shapes;
  FeatureShape cur = kInputShape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    auto fail = [&](const std::string& why) {
      raise(ErrorCode::shape,
            "layer " + std::to_string(i) + " (" + layer_kind_name(l.kind) +
                "): " + why);
    };
    switch (l.kind) {
      case LayerKind::conv: {
        if (l.filters < 1) fail("filters must be >= 1");
        if (l.kernel_h < 1 || l.kernel_w < 1) fail("kernel dims must be >= 1");
        if (l.stride < 1) fail("stride must be >= 1");
        ConvGeom g = conv_geom(cur[1], cur[2], l.kernel_h, l.kernel_w, l.stride);
        cur = {l.filters, g.small_h, g.small_w};
        break;
      }
      case LayerKind::transposed_conv: {
        if (l.filters < 1) fail("filters must be >= 1");
        if (l.kernel_h < 1 || l.kernel_w < 1) fail("kernel dims must be >= 1");
        if (l.stride < 1) fail("stride must be >= 1");
        if (l.kernel_h < l.stride || l.kernel_w < l.stride)
          fail("kernel must cover the stride");
        cur = {l.filters, cur[1] * l.stride, cur[2] * l.stride};
        break;
      }
      case LayerKind::fully_connected: {
        if (l.out_features < 1) fail("out_features must be >= 1");
        cur = {l.out_features, 1, 1};
        break;
      }
      case LayerKind::leaky_relu:
      case LayerKind::batch_norm:
      case LayerKind::sigmoid:
        break;
    }
    shapes.push_back(cur);
  }
  return shapes;
}

void validate_generator_spec(const NetworkSpec& spec) {
  require(spec.role == NetworkRole::generator, ErrorCode::invalid_argument,
          "spec role is not generator");
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if ((l.kind == LayerKind::conv || l.kind == LayerKind::transposed_conv) &&
        l.stride != 2)
      raise(ErrorCode::invalid_argument,
            "layer " + std::to_string(i) +
                ": generator conv/transposed_conv stride must be 2");
  }
  auto shapes = infer_shapes(spec);
  if (shapes.back() != kInputShape)
    raise(ErrorCode::shape,
          "layer " + std::to_string(spec.layers.size() - 1) +
              ": generator output shape must be 3x32x32");
  require(spec.layers.back().kind == LayerKind::sigmoid,
          ErrorCode::invalid_argument,
          "generator must end in a sigmoid so outputs lie in [0,1]");
}

void validate_discriminator_spec(const NetworkSpec& spec) {
  require(spec.role == NetworkRole::discriminator, ErrorCode::invalid_argument,
          "spec role is not discriminator");
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (l.kind == LayerKind::conv && l.stride != 3)
      raise(ErrorCode::invalid_argument,
            "layer " + std::to_string(i) +
                ": discriminator conv stride must be 3");
    if (l.kind == LayerKind::transposed_conv)
      raise(ErrorCode::invalid_argument,
            "layer " + std::to_string(i) +
                ": discriminator cannot contain transposed_conv");
  }
  auto shapes = infer_shapes(spec);
  if (shapes.back() != FeatureShape{1, 1, 1})
    raise(ErrorCode::shape,
          "layer " + std::to_string(spec.layers.size() - 1) +
              ": discriminator output must be a single scalar");
  require(spec.layers.back().kind == LayerKind::sigmoid,
          ErrorCode::invalid_argument,
          "discriminator must end in a sigmoid so scores lie in [0,1]");
}

Parameters init_parameters(const NetworkSpec& spec, std::uint64_t seed) {
  auto shapes = infer_shapes(spec);
  Parameters params;
  params.spec = spec;
  params.layers.resize(spec.layers.size());
  Rng rng(Rng::splitmix(seed ^ 0x5eed0001u));

  FeatureShape in = kInputShape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    LayerParams& p = params.layers[i];
    auto he_init = [&](Tensor& w, int fan_in) {
      double stddev = std::sqrt(2.0 / fan_in);
      for (std::size_t j = 0; j < w.size(); ++j) w[j] = rng.normal(0.0, stddev);
      quantize_f32(w);
    };
    switch (l.kind) {
      case LayerKind::conv:
        p.weight = Tensor({l.filters, in[0], l.kernel_h, l.kernel_w});
        he_init(p.weight, in[0] * l.kernel_h * l.kernel_w);
        p.bias = Tensor({l.filters});
        break;
      case LayerKind::transposed_conv:
        p.weight = Tensor({in[0], l.filters, l.kernel_h, l.kernel_w});
        he_init(p.weight, in[0] * l.kernel_h * l.kernel_w);
        p.bias = Tensor({l.filters});
        break;
      case LayerKind::fully_connected: {
        int features = in[0] * in[1] * in[2];
        p.weight = Tensor({l.out_features, features});
        he_init(p.weight, features);
        p.bias = Tensor({l.out_features});
        break;
      }
      case LayerKind::batch_norm:
        p.gamma = Tensor({in[0]});
        p.gamma.fill(1.0);
        p.beta = Tensor({in[0]});
        p.running_mean = Tensor({in[0]});
        p.running_var = Tensor({in[0]});
        p.running_var.fill(1.0);
        break;
      case LayerKind::leaky_relu:
      case LayerKind::sigmoid:
        break;
    }
    in = shapes[i];
  }
  return params;
}

Parameters build_generator(const NetworkSpec& spec, std::uint64_t seed) {
  validate_generator_spec(spec);
  return init_parameters(spec, seed);
}

Parameters build_discriminator(const NetworkSpec& spec, std::uint64_t seed) {
  validate_discriminator_spec(spec);
  return init_parameters(spec, seed);
}

bool Parameters::bitwise_equal(const Parameters& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerParams& a = layers[i];
    const LayerParams& b = other.layers[i];
    if (!(a.weight == b.weight && a.bias == b.bias && a.gamma == b.gamma &&
          a.beta == b.beta && a.running_mean == b.running_mean &&
          a.running_var == b.running_var))
      return false;
  }
  return true;
}

Parameters clip_weights(const Parameters& params, double c) {
  require(c > 0.0, ErrorCode::invalid_argument, "clip bound must be positive");
  Parameters out = params;
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    LayerKind kind = out.spec.layers[i].kind;
    if (kind == LayerKind::conv || kind == LayerKind::transposed_conv ||
        kind == LayerKind::fully_connected) {
      Tensor& w = out.layers[i].weight;
      for (std::size_t j = 0; j < w.size(); ++j)
        w[j] = std::clamp(w[j], -c, c);
    }
  }
  return out;
}

double max_abs_clippable_weight(const Parameters& params) {
  double m = 0.0;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    LayerKind kind = params.spec.layers[i].kind;
    if (kind == LayerKind::conv || kind == LayerKind::transposed_conv ||
        kind == LayerKind::fully_connected) {
      const Tensor& w = params.layers[i].weight;
      for (std::size_t j = 0; j < w.size(); ++j)
        m = std::max(m, std::abs(w[j]));
    }
  }
  return m;
}

ForwardTrace net_forward(const Parameters& params, const Tensor& input,
                         Mode mode) {
  require(input.ndim() == 4 && input.dim(0) >= 1, ErrorCode::shape,
          "network input must be a non-empty NCHW batch");
  ForwardTrace trace;
  trace.mode = mode;
  trace.layers.resize(params.layers.size());
  Tensor x = input;

  for (std::size_t i = 0; i < params.spec.layers.size(); ++i) {
    const LayerSpec& l = params.spec.layers[i];
    const LayerParams& p = params.layers[i];
    LayerTrace& t = trace.layers[i];
    t.in_shape = {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
    const int n = x.dim(0);

    switch (l.kind) {
      case LayerKind::conv: {
        require(x.dim(1) == p.weight.dim(1), ErrorCode::shape,
                "conv input channels mismatch at layer " + std::to_string(i));
        ConvGeom g = conv_geom(x.dim(2), x.dim(3), l.kernel_h, l.kernel_w, l.stride);
        t.col = im2col(x, g);
        const int out_c = p.weight.dim(0);
        const int inner = t.col.dim(0);
        const int cols = t.col.dim(1);
        CMapMat wm(p.weight.data(), out_c, inner);
        CMapMat cm(t.col.data(), inner, cols);
        Tensor ym({out_c, cols});
        MapMat y(ym.data(), out_c, cols);
        y.noalias() = wm * cm;
        Tensor out = cm_to_nchw(ym, n, out_c, g.small_h, g.small_w);
        const std::size_t plane = static_cast<std::size_t>(g.small_h) * g.small_w;
        for (int ni = 0; ni < n; ++ni)
          for (int oc = 0; oc < out_c; ++oc) {
            double* dst = out.data() + (static_cast<std::size_t>(ni) * out_c + oc) * plane;
            const double b = p.bias[static_cast<std::size_t>(oc)];
            for (std::size_t j = 0; j < plane; ++j) dst[j] += b;
          }
        x = std::move(out);
        break;
      }
      case LayerKind::transposed_conv: {
        require(x.dim(1) == p.weight.dim(0), ErrorCode::shape,
                "transposed_conv input channels mismatch at layer " + std::to_string(i));
        t.input = x;
        ConvGeom g = conv_geom(x.dim(2) * l.stride, x.dim(3) * l.stride,
                               l.kernel_h, l.kernel_w, l.stride);
        const int in_c = p.weight.dim(0);
        const int out_c = p.weight.dim(1);
        Tensor xm_t = nchw_to_cm(x);
        CMapMat vm(p.weight.data(), in_c, out_c * l.kernel_h * l.kernel_w);
        CMapMat xm(xm_t.data(), in_c, xm_t.dim(1));
        Tensor col({out_c * l.kernel_h * l.kernel_w, xm_t.dim(1)});
        MapMat colm(col.data(), col.dim(0), col.dim(1));
        colm.noalias() = vm.transpose() * xm;
        Tensor out = col2im(col, g, n, out_c);
        const std::size_t plane = static_cast<std::size_t>(g.big_h) * g.big_w;
        for (int ni = 0; ni < n; ++ni)
          for (int oc = 0; oc < out_c; ++oc) {
            double* dst = out.data() + (static_cast<std::size_t>(ni) * out_c + oc) * plane;
            const double b = p.bias[static_cast<std::size_t>(oc)];
            for (std::size_t j = 0; j < plane; ++j) dst[j] += b;
          }
        x = std::move(out);
        break;
      }
      case LayerKind::fully_connected: {
        const int features = x.dim(1) * x.dim(2) * x.dim(3);
        require(features == p.weight.dim(1), ErrorCode::shape,
                "fully_connected input size mismatch at layer " + std::to_string(i));
        t.input = x;
        const int out = p.weight.dim(0);
        Tensor y({n, out, 1, 1});
        CMapMat wm(p.weight.data(), out, features);
        CMapMat xm(x.data(), n, features);
        MapMat ym(y.data(), n, out);
        ym.noalias() = xm * wm.transpose();
        for (int ni = 0; ni < n; ++ni)
          for (int o = 0; o < out; ++o)
            y[static_cast<std::size_t>(ni) * out + o] += p.bias[static_cast<std::size_t>(o)];
        x = std::move(y);
        break;
      }
      case LayerKind::leaky_relu: {
        t.input = x;
        for (std::size_t j = 0; j < x.size(); ++j)
          if (x[j] < 0.0) x[j] *= l.slope;
        break;
      }
      case LayerKind::batch_norm: {
        const int c = x.dim(1);
        require(c == p.gamma.dim(0), ErrorCode::shape,
                "batch_norm channel mismatch at layer " + std::to_string(i));
        const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
        const double m = static_cast<double>(n) * static_cast<double>(plane);
        Tensor mean({c}), var({c}), inv_std({c});
        if (mode == Mode::train) {
          for (int ch = 0; ch < c; ++ch) {
            double s = 0.0;
            for (int ni = 0; ni < n; ++ni) {
              const double* src = x.data() + (static_cast<std::size_t>(ni) * c + ch) * plane;
              for (std::size_t j = 0; j < plane; ++j) s += src[j];
            }
            mean[static_cast<std::size_t>(ch)] = s / m;
          }
          for (int ch = 0; ch < c; ++ch) {
            double s = 0.0, mu = mean[static_cast<std::size_t>(ch)];
            for (int ni = 0; ni < n; ++ni) {
              const double* src = x.data() + (static_cast<std::size_t>(ni) * c + ch) * plane;
              for (std::size_t j = 0; j < plane; ++j) {
                double dv = src[j] - mu;
                s += dv * dv;
              }
            }
            var[static_cast<std::size_t>(ch)] = s / m;
          }
          t.batch_mean = mean;
          t.batch_var = var;
        } else {
          mean = p.running_mean;
          var = p.running_var;
        }
        for (int ch = 0; ch < c; ++ch)
          inv_std[static_cast<std::size_t>(ch)] =
              1.0 / std::sqrt(var[static_cast<std::size_t>(ch)] + kBnEps);
        t.inv_std = inv_std;
        t.xhat = Tensor(x.shape());
        for (int ni = 0; ni < n; ++ni)
          for (int ch = 0; ch < c; ++ch) {
            const double mu = mean[static_cast<std::size_t>(ch)];
            const double is = inv_std[static_cast<std::size_t>(ch)];
            const double ga = p.gamma[static_cast<std::size_t>(ch)];
            const double be = p.beta[static_cast<std::size_t>(ch)];
            double* xp = x.data() + (static_cast<std::size_t>(ni) * c + ch) * plane;
            double* hp = t.xhat.data() + (static_cast<std::size_t>(ni) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
              double hh = (xp[j] - mu) * is;
              hp[j] = hh;
              xp[j] = ga * hh + be;
            }
          }
        break;
      }
      case LayerKind::sigmoid: {
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = stable_sigmoid(x[j]);
        t.output = x;
        break;
      }
    }
  }
  trace.output = x;
  return trace;
}

BackwardResult net_backward_from(const Parameters& params,
                                 const ForwardTrace& trace,
                                 const Tensor& d_at_layer, int top_layer) {
  require(top_layer >= -1 && top_layer < static_cast<int>(params.layers.size()),
          ErrorCode::invalid_argument, "top_layer out of range");
  BackwardResult res;
  res.grads.layers.resize(params.layers.size());
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const LayerParams& p = params.layers[i];
    LayerParams& g = res.grads.layers[i];
    if (!p.weight.empty()) g.weight = Tensor::zeros_like(p.weight);
    if (!p.bias.empty()) g.bias = Tensor::zeros_like(p.bias);
    if (!p.gamma.empty()) g.gamma = Tensor::zeros_like(p.gamma);
    if (!p.beta.empty()) g.beta = Tensor::zeros_like(p.beta);
  }

  Tensor d = d_at_layer;
  for (int li = top_layer; li >= 0; --li) {
    const std::size_t i = static_cast<std::size_t>(li);
    const LayerSpec& l = params.spec.layers[i];
    const LayerParams& p = params.layers[i];
    const LayerTrace& t = trace.layers[i];
    LayerParams& g = res.grads.layers[i];
    const int n = t.in_shape[0];
    const int in_c = t.in_shape[1], in_h = t.in_shape[2], in_w = t.in_shape[3];

    switch (l.kind) {
      case LayerKind::conv: {
        ConvGeom geom = conv_geom(in_h, in_w, l.kernel_h, l.kernel_w, l.stride);
        const int out_c = p.weight.dim(0);
        const int inner = in_c * l.kernel_h * l.kernel_w;
        Tensor dym_t = nchw_to_cm(d);
        const int cols = dym_t.dim(1);
        CMapMat dym(dym_t.data(), out_c, cols);
        CMapMat cm(t.col.data(), inner, cols);
        MapMat gwm(g.weight.data(), out_c, inner);
        gwm.noalias() = dym * cm.transpose();
        for (int oc = 0; oc < out_c; ++oc)
          g.bias[static_cast<std::size_t>(oc)] = dym.row(oc).sum();
        CMapMat wm(p.weight.data(), out_c, inner);
        Tensor dcol({inner, cols});
        MapMat dcolm(dcol.data(), inner, cols);
        dcolm.noalias() = wm.transpose() * dym;
        d = col2im(dcol, geom, n, in_c);
        break;
      }
      case LayerKind::transposed_conv: {
        ConvGeom geom = conv_geom(in_h * l.stride, in_w * l.stride, l.kernel_h,
                                  l.kernel_w, l.stride);
        const int out_c = p.weight.dim(1);
        const int inner = out_c * l.kernel_h * l.kernel_w;
        // dV = x_mat * im2col(dY)^T ; dX = V * im2col(dY)
        Tensor col_dy = im2col(d, geom);
        const int cols = col_dy.dim(1);
        Tensor xm_t = nchw_to_cm(t.input);
        CMapMat xm(xm_t.data(), in_c, cols);
        CMapMat cdy(col_dy.data(), inner, cols);
        MapMat gvm(g.weight.data(), in_c, inner);
        gvm.noalias() = xm * cdy.transpose();
        const std::size_t out_plane = static_cast<std::size_t>(d.dim(2)) * d.dim(3);
        for (int oc = 0; oc < out_c; ++oc) {
          double s = 0.0;
          for (int ni = 0; ni < n; ++ni) {
            const double* src = d.data() + (static_cast<std::size_t>(ni) * out_c + oc) * out_plane;
            for (std::size_t j = 0; j < out_plane; ++j) s += src[j];
          }
          g.bias[static_cast<std::size_t>(oc)] = s;
        }
        CMapMat vm(p.weight.data(), in_c, inner);
        Tensor dxm({in_c, cols});
        MapMat dxmm(dxm.data(), in_c, cols);
        dxmm.noalias() = vm * cdy;
        d = cm_to_nchw(dxm, n, in_c, in_h, in_w);
        break;
      }
      case LayerKind::fully_connected: {
        const int features = in_c * in_h * in_w;
        const int out = p.weight.dim(0);
        CMapMat dym(d.data(), n, out);
        CMapMat xm(t.input.data(), n, features);
        MapMat gwm(g.weight.data(), out, features);
        gwm.noalias() = dym.transpose() * xm;
        for (int o = 0; o < out; ++o)
          g.bias[static_cast<std::size_t>(o)] = dym.col(o).sum();
        CMapMat wm(p.weight.data(), out, features);
        Tensor dx({n, in_c, in_h, in_w});
        MapMat dxm(dx.data(), n, features);
        dxm.noalias() = dym * wm;
        d = std::move(dx);
        break;
      }
      case LayerKind::leaky_relu: {
        for (std::size_t j = 0; j < d.size(); ++j)
          if (t.input[j] < 0.0) d[j] *= l.slope;
        break;
      }
      case LayerKind::batch_norm: {
        const int c = in_c;
        const std::size_t plane = static_cast<std::size_t>(in_h) * in_w;
        const double m = static_cast<double>(n) * static_cast<double>(plane);
        Tensor sum_dy({c}), sum_dy_xhat({c});
        for (int ni = 0; ni < n; ++ni)
          for (int ch = 0; ch < c; ++ch) {
            const double* dp = d.data() + (static_cast<std::size_t>(ni) * c + ch) * plane;
            const double* hp = t.xhat.data() + (static_cast<std::size_t>(ni) * c + ch) * plane;
            double s0 = 0.0, s1 = 0.0;
            for (std::size_t j = 0; j < plane; ++j) {
              s0 += dp[j];
              s1 += dp[j] * hp[j];
            }
            sum_dy[static_cast<std::size_t>(ch)] += s0;
            sum_dy_xhat[static_cast<std::size_t>(ch)] += s1;
          }
        for (int ch = 0; ch < c; ++ch) {
          g.beta[static_cast<std::size_t>(ch)] = sum_dy[static_cast<std::size_t>(ch)];
          g.gamma[static_cast<std::size_t>(ch)] = sum_dy_xhat[static_cast<std::size_t>(ch)];
        }
        Tensor dx(d.shape());
        if (trace.mode == Mode::train) {
          for (int ni = 0; ni < n; ++ni)
            for (int ch = 0; ch < c; ++ch) {
              const double ga = p.gamma[static_cast<std::size_t>(ch)];
              const double is = t.inv_std[static_cast<std::size_t>(ch)];
              const double mean_dy = sum_dy[static_cast<std::size_t>(ch)] / m;
              const double mean_dy_xhat = sum_dy_xhat[static_cast<std::size_t>(ch)] / m;
              const double* dp = d.data() + (static_cast<std::size_t>(ni) * c + ch) * plane;
              const double* hp = t.xhat.data() + (static_cast<std::size_t>(ni) * c + ch) * plane;
              double* op = dx.data() + (static_cast<std::size_t>(ni) * c + ch) * plane;
              for (std::size_t j = 0; j < plane; ++j)
                op[j] = ga * is * (dp[j] - mean_dy - hp[j] * mean_dy_xhat);
            }
        } else {
          // Running statistics are constants in eval mode.
          for (int ni = 0; ni < n; ++ni)
            for (int ch = 0; ch < c; ++ch) {
              const double gis = p.gamma[static_cast<std::size_t>(ch)] *
                                 t.inv_std[static_cast<std::size_t>(ch)];
              const double* dp = d.data() + (static_cast<std::size_t>(ni) * c + ch) * plane;
              double* op = dx.data() + (static_cast<std::size_t>(ni) * c + ch) * plane;
              for (std::size_t j = 0; j < plane; ++j) op[j] = dp[j] * gis;
            }
        }
        d = std::move(dx);
        break;
      }
      case LayerKind::sigmoid: {
        for (std::size_t j = 0; j < d.size(); ++j) {
          double y = t.output[j];
          d[j] *= y * (1.0 - y);
        }
        break;
      }
    }
  }
  res.input_grad = std::move(d);
  return res;
}

BackwardResult net_backward(const Parameters& params, const ForwardTrace& trace,
                            const Tensor& d_output) {
  return net_backward_from(params, trace, d_output,
                           static_cast<int>(params.layers.size()) - 1);
}

Parameters fold_batchnorm_stats(const Parameters& params,
                                const ForwardTrace& trace) {
  Parameters out = params;
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    if (out.spec.layers[i].kind != LayerKind::batch_norm) continue;
    const LayerTrace& t = trace.layers[i];
    if (t.batch_mean.empty()) continue;  // eval-mode trace
    LayerParams& p = out.layers[i];
    for (std::size_t c = 0; c < p.running_mean.size(); ++c) {
      p.running_mean[c] = (1.0 - kBnMomentum) * p.running_mean[c] +
                          kBnMomentum * t.batch_mean[c];
      p.running_var[c] = (1.0 - kBnMomentum) * p.running_var[c] +
                         kBnMomentum * t.batch_var[c];
    }
    quantize_f32(p.running_mean);
    quantize_f32(p.running_var);
  }
  return out;
}

LossValue bce_loss(const Tensor& outputs, const Tensor& targets,
                   bool fuse_through_sigmoid) {
  require(outputs.same_shape(targets), ErrorCode::shape,
          "bce outputs/targets shape mismatch");
  require(outputs.size() > 0, ErrorCode::shape, "bce on empty batch");
  constexpr double kEps = 1e-12;
  LossValue lv;
  lv.d_output = Tensor::zeros_like(outputs);
  lv.fused_bce = fuse_through_sigmoid;
  const double inv_n = 1.0 / static_cast<double>(outputs.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    double p = std::clamp(outputs[i], kEps, 1.0 - kEps);
    double tv = targets[i];
    loss -= tv * std::log(p) + (1.0 - tv) * std::log(1.0 - p);
    lv.d_output[i] = fuse_through_sigmoid
                         ? (p - tv) * inv_n
                         : (p - tv) / (p * (1.0 - p)) * inv_n;
  }
  lv.loss = loss * inv_n;
  return lv;
}

LossValue ssim_recon_loss(const Tensor& outputs, const Tensor& targets,
                          const SsimParams& ssim_params) {
  require(outputs.same_shape(targets), ErrorCode::shape,
          "ssim_recon outputs/targets shape mismatch");
  require(outputs.ndim() == 4 && outputs.dim(1) == 3 &&
              outputs.dim(2) == FaceImage::kSize && outputs.dim(3) == FaceImage::kSize,
          ErrorCode::shape, "ssim_recon expects [N,3,32,32] batches");
  const int n = outputs.dim(0);
  const int hw = FaceImage::kSize * FaceImage::kSize;
  LossValue lv;
  lv.d_output = Tensor::zeros_like(outputs);
  double total = 0.0;
  std::vector<double> a(FaceImage::kValueCount), b(FaceImage::kValueCount);
  for (int ni = 0; ni < n; ++ni) {
    const double* op = outputs.data() + static_cast<std::size_t>(ni) * FaceImage::kValueCount;
    const double* tp = targets.data() + static_cast<std::size_t>(ni) * FaceImage::kValueCount;
    // CHW -> HWC for the metric kernels
    for (int c = 0; c < 3; ++c)
      for (int j = 0; j < hw; ++j) {
        a[static_cast<std::size_t>(j) * 3 + c] = op[c * hw + j];
        b[static_cast<std::size_t>(j) * 3 + c] = tp[c * hw + j];
      }
    total += 1.0 - ssim_grid(a, b, FaceImage::kSize, FaceImage::kSize, 3, ssim_params);
    auto grad = ssim_loss_grad_grid(a, b, FaceImage::kSize, FaceImage::kSize, 3,
                                    ssim_params);
    double* dp = lv.d_output.data() + static_cast<std::size_t>(ni) * FaceImage::kValueCount;
    for (int c = 0; c < 3; ++c)
      for (int j = 0; j < hw; ++j)
        dp[c * hw + j] = grad[static_cast<std::size_t>(j) * 3 + c] / n;
  }
  lv.loss = total / n;
  return lv;
}

LossBackward net_loss_backward(const Parameters& params, const Tensor& input,
                               LossKind kind, const Tensor& targets, Mode mode,
                               const SsimParams& ssim_params) {
  LossBackward out;
  out.trace = net_forward(params, input, mode);
  const int last = static_cast<int>(params.layers.size()) - 1;
  if (kind == LossKind::bce) {
    bool fuse = params.spec.layers.back().kind == LayerKind::sigmoid;
    LossValue lv = bce_loss(out.trace.output, targets, fuse);
    out.loss = lv.loss;
    BackwardResult br = fuse
        ? net_backward_from(params, out.trace, lv.d_output, last - 1)
        : net_backward(params, out.trace, lv.d_output);
    out.grads = std::move(br.grads);
    out.input_grad = std::move(br.input_grad);
  } else {
    LossValue lv = ssim_recon_loss(out.trace.output, targets, ssim_params);
    out.loss = lv.loss;
    BackwardResult br = net_backward(params, out.trace, lv.d_output);
    out.grads = std::move(br.grads);
    out.input_grad = std::move(br.input_grad);
  }
  return out;
}

Tensor batch_from_faces(const std::vector<FaceImage>& faces) {
  require(!faces.empty(), ErrorCode::invalid_argument, "empty image batch");
  const int n = static_cast<int>(faces.size());
  const int hw = FaceImage::kSize * FaceImage::kSize;
  Tensor batch({n, 3, FaceImage::kSize, FaceImage::kSize});
  for (int ni = 0; ni < n; ++ni) {
    require(faces[static_cast<std::size_t>(ni)].values.size() == FaceImage::kValueCount,
            ErrorCode::shape, "face image has wrong value count");
    double* dst = batch.data() + static_cast<std::size_t>(ni) * FaceImage::kValueCount;
    const double* src = faces[static_cast<std::size_t>(ni)].values.data();
    for (int j = 0; j < hw; ++j)
      for (int c = 0; c < 3; ++c) dst[c * hw + j] = src[j * 3 + c];
  }
  return batch;
}

std::vector<FaceImage> faces_from_batch(const Tensor& batch,
                                        Provenance provenance) {
  require(batch.ndim() == 4 && batch.dim(1) == 3 &&
              batch.dim(2) == FaceImage::kSize && batch.dim(3) == FaceImage::kSize,
          ErrorCode::shape, "batch is not [N,3,32,32]");
  const int n = batch.dim(0);
  const int hw = FaceImage::kSize * FaceImage::kSize;
  std::vector<FaceImage> faces(static_cast<std::size_t>(n));
  for (int ni = 0; ni < n; ++ni) {
    const double* src = batch.data() + static_cast<std::size_t>(ni) * FaceImage::kValueCount;
    FaceImage& f = faces[static_cast<std::size_t>(ni)];
    for (int j = 0; j < hw; ++j)
      for (int c = 0; c < 3; ++c) f.values[static_cast<std::size_t>(j) * 3 + c] = src[c * hw + j];
    f.provenance = provenance;
  }
  return faces;
}

std::vector<FaceImage> generator_forward(const Parameters& params,
                                         const std::vector<FaceImage>& batch,
                                         Mode mode) {
  Tensor in = batch_from_faces(batch);
  ForwardTrace trace = net_forward(params, in, mode);
  return faces_from_batch(trace.output, Provenance::restored);
}

std::vector<double> discriminator_forward(const Parameters& params,
                                          const std::vector<FaceImage>& batch,
                                          Mode mode) {
  Tensor in = batch_from_faces(batch);
  ForwardTrace trace = net_forward(params, in, mode);
  require(trace.output.size() == batch.size(), ErrorCode::shape,
          "discriminator did not produce one scalar per image");
  std::vector<double> scores(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) scores[i] = trace.output[i];
  return scores;
}

}  // namespace faceqr
