#include "stylecloak/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace stylecloak {

namespace {

constexpr double kGrayR = 0.299;
constexpr double kGrayG = 0.587;
constexpr double kGrayB = 0.114;

// Symmetric (edge-repeated) index reflection. Together with a normalized
// symmetric kernel this preserves the global mean exactly.
int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

std::vector<double> gaussian_kernel(double sigma) {
    const int half = static_cast<int>(std::ceil(2.0 * sigma));
    std::vector<double> k(2 * half + 1);
    double sum = 0.0;
    for (int i = -half; i <= half; ++i) {
        const double v = std::exp(-(static_cast<double>(i) * i) /
                                  (2.0 * sigma * sigma));
        k[i + half] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Cubic convolution weight, a = -0.5.
double cubic_weight(double t) {
    constexpr double a = -0.5;
    t = std::fabs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

}  // namespace

ImageTensor load_image(const std::string& path, int target_size) {
    cv::Mat raw = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (raw.empty())
        throw DecodeError("load_image: cannot decode '" + path + "'");
    if (raw.rows == 0 || raw.cols == 0)
        throw InvalidInputError("load_image: zero-area image '" + path + "'");

    double scale;
    switch (raw.depth()) {
        case CV_8U: scale = 1.0 / 255.0; break;
        case CV_16U: scale = 1.0 / 65535.0; break;
        default:
            throw DecodeError("load_image: unsupported sample depth in '" +
                              path + "'");
    }

    const int ch = raw.channels();
    if (ch != 1 && ch != 3 && ch != 4)
        throw DecodeError("load_image: unsupported channel count " +
                          std::to_string(ch) + " in '" + path + "'");

    ImageTensor img(raw.rows, raw.cols, 3);
    for (int y = 0; y < raw.rows; ++y) {
        for (int x = 0; x < raw.cols; ++x) {
            double r, g, b;
            if (raw.depth() == CV_8U) {
                const uchar* p = raw.ptr<uchar>(y) + static_cast<size_t>(x) * ch;
                if (ch == 1) { r = g = b = p[0]; }
                else { b = p[0]; g = p[1]; r = p[2]; }  // OpenCV is BGR(A)
            } else {
                const ushort* p =
                    raw.ptr<ushort>(y) + static_cast<size_t>(x) * ch;
                if (ch == 1) { r = g = b = p[0]; }
                else { b = p[0]; g = p[1]; r = p[2]; }
            }
            img.at(y, x, 0) = r * scale;
            img.at(y, x, 1) = g * scale;
            img.at(y, x, 2) = b * scale;
        }
    }

    if (target_size > 0 &&
        (img.height != target_size || img.width != target_size)) {
        img = resize_bicubic(img, target_size, target_size);
        clamp01_inplace(img);
    }
    return img;
}

void save_image(const ImageTensor& img, const std::string& path,
                int bit_depth) {
    if (img.is_signed)
        throw InvalidInputError("save_image: refusing signed-usage tensor");
    if (img.channels != 3 && img.channels != 1)
        throw InvalidInputError("save_image: expected 1 or 3 channels");
    if (bit_depth != 8 && bit_depth != 16)
        throw InvalidParameterError("save_image: bit_depth must be 8 or 16");

    const double maxval = bit_depth == 8 ? 255.0 : 65535.0;
    cv::Mat out(img.height, img.width,
                bit_depth == 8 ? CV_8UC3 : CV_16UC3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double rgb[3];
            for (int c = 0; c < 3; ++c) {
                const double v =
                    img.channels == 3 ? img.at(y, x, c) : img.at(y, x, 0);
                // Round half up, clamp to the representable range.
                double q = std::floor(v * maxval + 0.5);
                rgb[c] = std::min(std::max(q, 0.0), maxval);
            }
            if (bit_depth == 8) {
                uchar* p = out.ptr<uchar>(y) + static_cast<size_t>(x) * 3;
                p[0] = static_cast<uchar>(rgb[2]);
                p[1] = static_cast<uchar>(rgb[1]);
                p[2] = static_cast<uchar>(rgb[0]);
            } else {
                ushort* p = out.ptr<ushort>(y) + static_cast<size_t>(x) * 3;
                p[0] = static_cast<ushort>(rgb[2]);
                p[1] = static_cast<ushort>(rgb[1]);
                p[2] = static_cast<ushort>(rgb[0]);
            }
        }
    }
    if (!cv::imwrite(path, out))
        throw IoError("save_image: cannot write '" + path + "'");
}

ImageTensor to_grayscale(const ImageTensor& img) {
    if (img.channels != 3)
        throw InvalidInputError("to_grayscale: expected a 3-channel input");
    ImageTensor out(img.height, img.width, 1, img.is_signed);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            out.at(y, x, 0) = kGrayR * img.at(y, x, 0) +
                              kGrayG * img.at(y, x, 1) +
                              kGrayB * img.at(y, x, 2);
    return out;
}

ImageTensor grayscale_vjp(const ImageTensor& cotangent) {
    if (cotangent.channels != 1)
        throw InvalidInputError("grayscale_vjp: expected 1-channel cotangent");
    ImageTensor out(cotangent.height, cotangent.width, 3, true);
    for (int y = 0; y < cotangent.height; ++y) {
        for (int x = 0; x < cotangent.width; ++x) {
            const double g = cotangent.at(y, x, 0);
            out.at(y, x, 0) = kGrayR * g;
            out.at(y, x, 1) = kGrayG * g;
            out.at(y, x, 2) = kGrayB * g;
        }
    }
    return out;
}

ImageTensor gaussian_blur(const ImageTensor& img, double sigma) {
    if (!(sigma > 0.0))
        throw InvalidParameterError("gaussian_blur: sigma must be positive");
    const std::vector<double> k = gaussian_kernel(sigma);
    const int half = static_cast<int>(k.size() / 2);

    // Horizontal pass.
    ImageTensor tmp(img.height, img.width, img.channels, img.is_signed);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0.0;
                for (int i = -half; i <= half; ++i)
                    acc += k[i + half] *
                           img.at(y, reflect_index(x + i, img.width), c);
                tmp.at(y, x, c) = acc;
            }
        }
    }
    // Vertical pass.
    ImageTensor out(img.height, img.width, img.channels, img.is_signed);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0.0;
                for (int i = -half; i <= half; ++i)
                    acc += k[i + half] *
                           tmp.at(reflect_index(y + i, img.height), x, c);
                out.at(y, x, c) = acc;
            }
        }
    }
    return out;
}

ImageTensor replicate_channels(const ImageTensor& img, int n) {
    if (img.channels != 1)
        throw InvalidInputError("replicate_channels: expected 1 channel");
    ImageTensor out(img.height, img.width, n, img.is_signed);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < n; ++c)
                out.at(y, x, c) = img.at(y, x, 0);
    return out;
}

ImageTensor extract_content(const ImageTensor& x_s, double sigma) {
    if (x_s.channels != 3 || x_s.is_signed)
        throw InvalidInputError("extract_content: expected pixel-valued RGB");
    return replicate_channels(gaussian_blur(to_grayscale(x_s), sigma), 3);
}

ImageTensor resize_bicubic(const ImageTensor& img, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0)
        throw InvalidParameterError("resize_bicubic: non-positive size");
    if (out_h == img.height && out_w == img.width) return img;

    const double sy = static_cast<double>(img.height) / out_h;
    const double sx = static_cast<double>(img.width) / out_w;
    ImageTensor out(out_h, out_w, img.channels, img.is_signed);
    for (int oy = 0; oy < out_h; ++oy) {
        const double fy = (oy + 0.5) * sy - 0.5;
        const int y0 = static_cast<int>(std::floor(fy));
        double wy[4];
        for (int i = 0; i < 4; ++i) wy[i] = cubic_weight(fy - (y0 - 1 + i));
        for (int ox = 0; ox < out_w; ++ox) {
            const double fx = (ox + 0.5) * sx - 0.5;
            const int x0 = static_cast<int>(std::floor(fx));
            double wx[4];
            for (int i = 0; i < 4; ++i)
                wx[i] = cubic_weight(fx - (x0 - 1 + i));
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0.0;
                for (int i = 0; i < 4; ++i) {
                    const int yy = clampi(y0 - 1 + i, 0, img.height - 1);
                    double row = 0.0;
                    for (int j = 0; j < 4; ++j) {
                        const int xx = clampi(x0 - 1 + j, 0, img.width - 1);
                        row += wx[j] * img.at(yy, xx, c);
                    }
                    acc += wy[i] * row;
                }
                out.at(oy, ox, c) = acc;
            }
        }
    }
    return out;
}

namespace {

struct LinearTap {
    int i0;
    double w0, w1;  // weights for samples i0 and i0+1 (clamped)
};

LinearTap bilinear_tap(int out_i, int out_n, int in_n) {
    const double s = static_cast<double>(in_n) / out_n;
    double f = (out_i + 0.5) * s - 0.5;
    if (f < 0.0) f = 0.0;
    if (f > in_n - 1.0) f = in_n - 1.0;
    const int i0 = std::min(static_cast<int>(std::floor(f)), in_n - 2 < 0 ? 0 : in_n - 2);
    const double t = f - i0;
    return {i0, 1.0 - t, t};
}

}  // namespace

ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0)
        throw InvalidParameterError("resize_bilinear: non-positive size");
    if (out_h == img.height && out_w == img.width) return img;

    ImageTensor out(out_h, out_w, img.channels, img.is_signed);
    std::vector<LinearTap> tx(out_w), ty(out_h);
    for (int ox = 0; ox < out_w; ++ox) tx[ox] = bilinear_tap(ox, out_w, img.width);
    for (int oy = 0; oy < out_h; ++oy) ty[oy] = bilinear_tap(oy, out_h, img.height);

    for (int oy = 0; oy < out_h; ++oy) {
        const LinearTap& y = ty[oy];
        const int y1 = std::min(y.i0 + 1, img.height - 1);
        for (int ox = 0; ox < out_w; ++ox) {
            const LinearTap& x = tx[ox];
            const int x1 = std::min(x.i0 + 1, img.width - 1);
            for (int c = 0; c < img.channels; ++c) {
                out.at(oy, ox, c) =
                    y.w0 * (x.w0 * img.at(y.i0, x.i0, c) +
                            x.w1 * img.at(y.i0, x1, c)) +
                    y.w1 * (x.w0 * img.at(y1, x.i0, c) +
                            x.w1 * img.at(y1, x1, c));
            }
        }
    }
    return out;
}

ImageTensor resize_bilinear_vjp(const ImageTensor& cotangent, int in_h,
                                int in_w) {
    if (cotangent.height == in_h && cotangent.width == in_w) return cotangent;

    ImageTensor grad(in_h, in_w, cotangent.channels, true);
    std::vector<LinearTap> tx(cotangent.width), ty(cotangent.height);
    for (int ox = 0; ox < cotangent.width; ++ox)
        tx[ox] = bilinear_tap(ox, cotangent.width, in_w);
    for (int oy = 0; oy < cotangent.height; ++oy)
        ty[oy] = bilinear_tap(oy, cotangent.height, in_h);

    for (int oy = 0; oy < cotangent.height; ++oy) {
        const LinearTap& y = ty[oy];
        const int y1 = std::min(y.i0 + 1, in_h - 1);
        for (int ox = 0; ox < cotangent.width; ++ox) {
            const LinearTap& x = tx[ox];
            const int x1 = std::min(x.i0 + 1, in_w - 1);
            for (int c = 0; c < cotangent.channels; ++c) {
                const double g = cotangent.at(oy, ox, c);
                grad.at(y.i0, x.i0, c) += y.w0 * x.w0 * g;
                grad.at(y.i0, x1, c) += y.w0 * x.w1 * g;
                grad.at(y1, x.i0, c) += y.w1 * x.w0 * g;
                grad.at(y1, x1, c) += y.w1 * x.w1 * g;
            }
        }
    }
    return grad;
}

}  // namespace stylecloak
