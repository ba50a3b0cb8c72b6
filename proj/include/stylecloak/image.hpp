#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "stylecloak/errors.hpp"

namespace stylecloak {

// H×W×C image with interleaved channels and unit-interval pixel scale.
// Pixel-valued images live in [0,1]; signed residuals (wavelet structural
// components, differences) set `is_signed` and may leave that range.
struct ImageTensor {
    int height = 0;
    int width = 0;
    int channels = 0;
    bool is_signed = false;
    std::vector<double> data;

    ImageTensor() = default;
    ImageTensor(int h, int w, int c, bool signed_usage = false)
        : height(h), width(w), channels(c), is_signed(signed_usage),
          data(static_cast<std::size_t>(h) * w * c, 0.0) {}

    double& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    std::size_t size() const { return data.size(); }

    bool same_shape(const ImageTensor& other) const {
        return height == other.height && width == other.width &&
               channels == other.channels;
    }
};

inline ImageTensor constant_image(int h, int w, int c, double value) {
    ImageTensor img(h, w, c);
    for (double& v : img.data) v = value;
    return img;
}

inline void require_same_shape(const ImageTensor& a, const ImageTensor& b,
                               const char* what) {
    if (!a.same_shape(b))
        throw InvalidInputError(std::string(what) + ": shape mismatch");
}

inline void clamp01_inplace(ImageTensor& img) {
    for (double& v : img.data) {
        if (v < 0.0) v = 0.0;
        else if (v > 1.0) v = 1.0;
    }
}

inline bool all_finite(const ImageTensor& img) {
    for (double v : img.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace stylecloak
