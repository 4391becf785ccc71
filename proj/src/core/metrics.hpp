#pragma once

#include <vector>

#include "core/image.hpp"

namespace faceqr {

enum class SsimWindow { global, gaussian_11x11 };

// Constants follow the Wang et al. SSIM construction: C1=(k1*L)^2, C2=(k2*L)^2.
struct SsimParams {
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
  SsimWindow window = SsimWindow::global;
};

// Grid variants operate on HWC double data and exist so small crops can be
// metered/tested; the FaceImage overloads forward to them.
double mse_grid(const std::vector<double>& a, const std::vector<double>& b);
double ssim_grid(const std::vector<double>& a, const std::vector<double>& b,
                 int h, int w, int channels, const SsimParams& p);
// d(1 - ssim)/da, same layout as `a`.
std::vector<double> ssim_loss_grad_grid(const std::vector<double>& a,
                                        const std::vector<double>& b, int h,
                                        int w, int channels,
                                        const SsimParams& p);

double mse(const FaceImage& a, const FaceImage& b);
double ssim(const FaceImage& a, const FaceImage& b, const SsimParams& p);
double ssim_loss(const FaceImage& a, const FaceImage& b, const SsimParams& p);
std::vector<double> ssim_loss_grad(const FaceImage& a, const FaceImage& b,
                                   const SsimParams& p);

}  // namespace faceqr
