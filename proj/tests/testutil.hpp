#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "stylecloak/image.hpp"
#include "stylecloak/rng.hpp"

namespace stylecloak::testutil {

inline ImageTensor random_image(int h, int w, int c, unsigned long long seed) {
    ImageTensor img(h, w, c);
    Lcg64 rng(seed);
    for (double& v : img.data) v = rng.next_uniform();
    return img;
}

// Procedural stand-in for an artwork: smooth color gradients, oriented
// stroke-like bands and a few hard-edged shapes, so both homogeneous
// regions and structural detail are present.
inline ImageTensor synthetic_art_image(int size, unsigned long long seed) {
    Lcg64 rng(seed);
    ImageTensor img(size, size, 3);

    double base[3], grad_x[3], grad_y[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = 0.25 + 0.5 * rng.next_uniform();
        grad_x[c] = 0.35 * (rng.next_uniform() - 0.5);
        grad_y[c] = 0.35 * (rng.next_uniform() - 0.5);
    }

    struct Stroke {
        double cx, cy, theta, freq, phase, width, amp, color[3];
    };
    constexpr int kStrokes = 7;
    Stroke strokes[kStrokes];
    for (auto& s : strokes) {
        s.cx = rng.next_uniform();
        s.cy = rng.next_uniform();
        s.theta = rng.next_uniform() * 3.14159265358979;
        s.freq = 12.0 + 28.0 * rng.next_uniform();
        s.phase = rng.next_uniform() * 6.2831853;
        s.width = 0.08 + 0.18 * rng.next_uniform();
        s.amp = 0.10 + 0.20 * rng.next_uniform();
        for (double& ch : s.color) ch = rng.next_uniform() - 0.5;
    }

    struct Blob {
        double cx, cy, r, color[3];
    };
    constexpr int kBlobs = 4;
    Blob blobs[kBlobs];
    for (auto& b : blobs) {
        b.cx = rng.next_uniform();
        b.cy = rng.next_uniform();
        b.r = 0.06 + 0.16 * rng.next_uniform();
        for (double& ch : b.color) ch = 0.2 + 0.6 * rng.next_uniform();
    }

    for (int y = 0; y < size; ++y) {
        const double fy = static_cast<double>(y) / size;
        for (int x = 0; x < size; ++x) {
            const double fx = static_cast<double>(x) / size;
            double px[3];
            for (int c = 0; c < 3; ++c)
                px[c] = base[c] + grad_x[c] * fx + grad_y[c] * fy;

            for (const auto& s : strokes) {
                const double dx = fx - s.cx, dy = fy - s.cy;
                const double along =
                    dx * std::cos(s.theta) + dy * std::sin(s.theta);
                const double envelope =
                    std::exp(-(dx * dx + dy * dy) / (2.0 * s.width * s.width));
                const double wave =
                    std::sin(s.freq * along * 6.2831853 + s.phase);
                for (int c = 0; c < 3; ++c)
                    px[c] += s.amp * envelope * wave * (0.5 + s.color[c]);
            }
            for (const auto& b : blobs) {
                const double dx = fx - b.cx, dy = fy - b.cy;
                if (dx * dx + dy * dy < b.r * b.r)
                    for (int c = 0; c < 3; ++c)
                        px[c] = 0.55 * px[c] + 0.45 * b.color[c];
            }
            for (int c = 0; c < 3; ++c)
                img.at(y, x, c) = std::min(std::max(px[c], 0.0), 1.0);
        }
    }
    return img;
}

// Unique per-process scratch directory under the build tree.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("stylecloak_test_" + tag + "_" +
                 std::to_string(
                     static_cast<unsigned long long>(::getpid())));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string str() const { return path_.string(); }
    std::filesystem::path path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline double max_abs_diff(const ImageTensor& a, const ImageTensor& b) {
    double mx = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        mx = std::max(mx, std::fabs(a.data[i] - b.data[i]));
    return mx;
}

}  // namespace stylecloak::testutil
