#include "core/metrics.hpp"

#include <cmath>

namespace faceqr {

namespace {

constexpr int kWin = 11;
constexpr double kWinSigma = 1.5;

struct WindowStats {
  double mu_x = 0, mu_y = 0, var_x = 0, var_y = 0, cov = 0;
};

struct SsimTerms {
  double a1, a2, b1, b2, s;
};

SsimTerms ssim_terms(const WindowStats& st, double c1, double c2) {
  SsimTerms t;
  t.a1 = 2.0 * st.mu_x * st.mu_y + c1;
  t.a2 = 2.0 * st.cov + c2;
  t.b1 = st.mu_x * st.mu_x + st.mu_y * st.mu_y + c1;
  t.b2 = st.var_x + st.var_y + c2;
  t.s = (t.a1 * t.a2) / (t.b1 * t.b2);
  return t;
}

const std::vector<double>& gaussian_window() {
  static const std::vector<double> weights = [] {
    std::vector<double> w(kWin * kWin);
    double sum = 0.0;
    const double half = (kWin - 1) / 2.0;
    for (int i = 0; i < kWin; ++i)
      for (int j = 0; j < kWin; ++j) {
        double dy = i - half, dx = j - half;
        double g = std::exp(-(dx * dx + dy * dy) / (2.0 * kWinSigma * kWinSigma));
        w[static_cast<std::size_t>(i * kWin + j)] = g;
        sum += g;
      }
    for (double& v : w) v /= sum;
    return w;
  }();
  return weights;
}

void check_sizes(const std::vector<double>& a, const std::vector<double>& b,
                 std::size_t expected) {
  require(a.size() == b.size(), ErrorCode::shape,
          "metric inputs have different sizes");
  require(a.size() == expected, ErrorCode::shape,
          "metric input size does not match stated dimensions");
}

}  // namespace

double mse_grid(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size() && !a.empty(), ErrorCode::shape,
          "mse inputs must share a non-empty shape");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

double ssim_grid(const std::vector<double>& a, const std::vector<double>& b,
                 int h, int w, int channels, const SsimParams& p) {
  check_sizes(a, b, static_cast<std::size_t>(h) * w * channels);
  require(p.k1 > 0 && p.k2 > 0 && p.dynamic_range > 0,
          ErrorCode::invalid_argument, "ssim constants must be positive");
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  auto val = [&](const std::vector<double>& img, int y, int x, int c) {
    return img[static_cast<std::size_t>((y * w + x) * channels + c)];
  };

  double channel_sum = 0.0;
  if (p.window == SsimWindow::global) {
    const double n = static_cast<double>(h) * w;
    for (int c = 0; c < channels; ++c) {
      WindowStats st;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          st.mu_x += val(a, y, x, c);
          st.mu_y += val(b, y, x, c);
        }
      st.mu_x /= n;
      st.mu_y /= n;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double dx = val(a, y, x, c) - st.mu_x;
          double dy = val(b, y, x, c) - st.mu_y;
          st.var_x += dx * dx;
          st.var_y += dy * dy;
          st.cov += dx * dy;
        }
      st.var_x /= n;
      st.var_y /= n;
      st.cov /= n;
      channel_sum += ssim_terms(st, c1, c2).s;
    }
    return channel_sum / channels;
  }

  // Gaussian 11x11 window over valid positions, per-window weighted stats,
  // SSIM map averaged uniformly over positions.
  require(h >= kWin && w >= kWin, ErrorCode::shape,
          "image smaller than the 11x11 ssim window");
  const auto& win = gaussian_window();
  const int map_h = h - kWin + 1, map_w = w - kWin + 1;
  for (int c = 0; c < channels; ++c) {
    double map_sum = 0.0;
    for (int wy = 0; wy < map_h; ++wy)
      for (int wx = 0; wx < map_w; ++wx) {
        WindowStats st;
        for (int i = 0; i < kWin; ++i)
          for (int j = 0; j < kWin; ++j) {
            double g = win[static_cast<std::size_t>(i * kWin + j)];
            st.mu_x += g * val(a, wy + i, wx + j, c);
            st.mu_y += g * val(b, wy + i, wx + j, c);
          }
        for (int i = 0; i < kWin; ++i)
          for (int j = 0; j < kWin; ++j) {
            double g = win[static_cast<std::size_t>(i * kWin + j)];
            double dx = val(a, wy + i, wx + j, c) - st.mu_x;
            double dy = val(b, wy + i, wx + j, c) - st.mu_y;
            st.var_x += g * dx * dx;
            st.var_y += g * dy * dy;
            st.cov += g * dx * dy;
          }
        map_sum += ssim_terms(st, c1, c2).s;
      }
    channel_sum += map_sum / (static_cast<double>(map_h) * map_w);
  }
  return channel_sum / channels;
}

std::vector<double> ssim_loss_grad_grid(const std::vector<double>& a,
                                        const std::vector<double>& b, int h,
                                        int w, int channels,
                                        const SsimParams& p) {
  check_sizes(a, b, static_cast<std::size_t>(h) * w * channels);
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  std::vector<double> grad(a.size(), 0.0);
  auto idx = [&](int y, int x, int c) {
    return static_cast<std::size_t>((y * w + x) * channels + c);
  };

  // Accumulates dS/dx_i for one window given per-pixel weights w_i:
  //   dS/dx_i = (2 w_i / (b1 b2)) *
  //             (mu_y a2 + a1 (y_i - mu_y) - s (mu_x b2 + b1 (x_i - mu_x)))
  auto accumulate_window = [&](int y0, int x0, int wh, int ww, int c,
                               const double* weights, double scale) {
    WindowStats st;
    for (int i = 0; i < wh; ++i)
      for (int j = 0; j < ww; ++j) {
        double g = weights ? weights[i * ww + j]
                           : 1.0 / (static_cast<double>(wh) * ww);
        st.mu_x += g * a[idx(y0 + i, x0 + j, c)];
        st.mu_y += g * b[idx(y0 + i, x0 + j, c)];
      }
    for (int i = 0; i < wh; ++i)
      for (int j = 0; j < ww; ++j) {
        double g = weights ? weights[i * ww + j]
                           : 1.0 / (static_cast<double>(wh) * ww);
        double dx = a[idx(y0 + i, x0 + j, c)] - st.mu_x;
        double dy = b[idx(y0 + i, x0 + j, c)] - st.mu_y;
        st.var_x += g * dx * dx;
        st.var_y += g * dy * dy;
        st.cov += g * dx * dy;
      }
    SsimTerms t = ssim_terms(st, c1, c2);
    for (int i = 0; i < wh; ++i)
      for (int j = 0; j < ww; ++j) {
        double g = weights ? weights[i * ww + j]
                           : 1.0 / (static_cast<double>(wh) * ww);
        std::size_t k = idx(y0 + i, x0 + j, c);
        double ds = (2.0 * g / (t.b1 * t.b2)) *
                    (st.mu_y * t.a2 + t.a1 * (b[k] - st.mu_y) -
                     t.s * (st.mu_x * t.b2 + t.b1 * (a[k] - st.mu_x)));
        grad[k] -= scale * ds;  // loss = 1 - ssim
      }
  };

  if (p.window == SsimWindow::global) {
    for (int c = 0; c < channels; ++c)
      accumulate_window(0, 0, h, w, c, nullptr, 1.0 / channels);
    return grad;
  }

  require(h >= kWin && w >= kWin, ErrorCode::shape,
          "image smaller than the 11x11 ssim window");
  const auto& win = gaussian_window();
  const int map_h = h - kWin + 1, map_w = w - kWin + 1;
  const double scale = 1.0 / (static_cast<double>(channels) * map_h * map_w);
  for (int c = 0; c < channels; ++c)
    for (int wy = 0; wy < map_h; ++wy)
      for (int wx = 0; wx < map_w; ++wx)
        accumulate_window(wy, wx, kWin, kWin, c, win.data(), scale);
  return grad;
}

double mse(const FaceImage& a, const FaceImage& b) {
  check_sizes(a.values, b.values, FaceImage::kValueCount);
  return mse_grid(a.values, b.values);
}

double ssim(const FaceImage& a, const FaceImage& b, const SsimParams& p) {
  return ssim_grid(a.values, b.values, FaceImage::kSize, FaceImage::kSize,
                   FaceImage::kChannels, p);
}

double ssim_loss(const FaceImage& a, const FaceImage& b, const SsimParams& p) {
  return 1.0 - ssim(a, b, p);
}

std::vector<double> ssim_loss_grad(const FaceImage& a, const FaceImage& b,
                                   const SsimParams& p) {
  return ssim_loss_grad_grid(a.values, b.values, FaceImage::kSize,
                             FaceImage::kSize, FaceImage::kChannels, p);
}

}  // namespace faceqr
