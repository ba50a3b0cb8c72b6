#pragma once

#include <string>

#include "stylecloak/image.hpp"

namespace stylecloak {

// Decode a PNG (8/16-bit) or JPEG file into an RGB tensor in [0,1], resized
// to target_size×target_size with bicubic interpolation and clamped.
// target_size == 0 keeps the native resolution.
ImageTensor load_image(const std::string& path, int target_size = 224);

// Write a pixel-valued tensor as a lossless PNG. 16-bit by default so
// sub-1/255 perturbations survive quantization. Rounds half up.
void save_image(const ImageTensor& img, const std::string& path,
                int bit_depth = 16);

// BT.601 luminance: y = 0.299 R + 0.587 G + 0.114 B. Linear, so valid on
// signed residuals as well as pixel-valued images.
ImageTensor to_grayscale(const ImageTensor& img);

// Separable Gaussian convolution. Kernel half-width ceil(2*sigma) (13x13 at
// the default sigma), normalized to sum 1, symmetric edge-repeated padding.
ImageTensor gaussian_blur(const ImageTensor& img, double sigma = 3.0);

// Content extraction: Blur(Gray(x)), replicated back to 3 channels so the
// result can be fed to the same encoder preprocessing as the style image.
ImageTensor extract_content(const ImageTensor& x_s, double sigma = 3.0);

// Replicate a 1-channel image to n identical channels.
ImageTensor replicate_channels(const ImageTensor& img, int n);

// Cubic-convolution resampling (a = -0.5), half-pixel-center mapping,
// clamped border indices. No output clamping; callers that need a
// pixel-valued result clamp afterwards.
ImageTensor resize_bicubic(const ImageTensor& img, int out_h, int out_w);

// Bilinear resampling with the same coordinate convention; differentiable.
// resize_bilinear_vjp pulls a cotangent on the output back to input pixels.
ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w);
ImageTensor resize_bilinear_vjp(const ImageTensor& cotangent, int in_h,
                                int in_w);

// Transpose of to_grayscale: spreads a 1-channel cotangent across RGB with
// the BT.601 weights.
ImageTensor grayscale_vjp(const ImageTensor& cotangent);

}  // namespace stylecloak
