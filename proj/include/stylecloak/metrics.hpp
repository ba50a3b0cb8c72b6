#pragma once

#include "stylecloak/image.hpp"

namespace stylecloak {

// Image-similarity and perturbation-norm record. Identical inputs give
// ssim 1, mae = l2 = linf = 0 and the 100 dB PSNR cap.
struct PerceptualReport {
    double ssim = 0.0;
    double psnr_db = 0.0;
    double mae = 0.0;
    double l2 = 0.0;
    double linf = 0.0;
};

// Standard SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
// dynamic range 1.0; the map is evaluated on the fully-covered (valid)
// region, per channel, then averaged.
double ssim(const ImageTensor& a, const ImageTensor& b);

// 10 log10(1 / MSE) with MAX = 1.0, capped at 100 dB.
double psnr(const ImageTensor& a, const ImageTensor& b);

// Mean absolute difference over all elements.
double mae(const ImageTensor& a, const ImageTensor& b);

// Euclidean norm of the flattened difference on the [0,1] scale.
double l2_norm(const ImageTensor& a, const ImageTensor& b);

// Largest absolute elementwise difference.
double linf_norm(const ImageTensor& a, const ImageTensor& b);

PerceptualReport report(const ImageTensor& a, const ImageTensor& b);

}  // namespace stylecloak
