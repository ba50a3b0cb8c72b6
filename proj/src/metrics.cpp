#include "stylecloak/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace stylecloak {

namespace {

constexpr int kWindow = 11;
constexpr int kHalf = kWindow / 2;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;
constexpr double kC1 = kK1 * kK1;  // dynamic range 1.0
constexpr double kC2 = kK2 * kK2;
constexpr double kPsnrCap = 100.0;

const std::vector<double>& ssim_kernel() {
    static const std::vector<double> k = [] {
        std::vector<double> v(kWindow);
        double sum = 0.0;
        for (int i = 0; i < kWindow; ++i) {
            const double d = i - kHalf;
            v[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
            sum += v[i];
        }
        for (double& x : v) x /= sum;
        return v;
    }();
    return k;
}

// Valid-region separable Gaussian filtering of a single plane.
// in: h x w, out: (h - 2*kHalf) x (w - 2*kHalf).
std::vector<double> filter_valid(const std::vector<double>& in, int h, int w) {
    const auto& k = ssim_kernel();
    const int ow = w - 2 * kHalf;
    const int oh = h - 2 * kHalf;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWindow; ++i)
                acc += k[i] * in[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWindow; ++i)
                acc += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    return out;
}

double ssim_channel(const ImageTensor& a, const ImageTensor& b, int c) {
    const int h = a.height, w = a.width;
    const std::size_t n = static_cast<std::size_t>(h) * w;
    std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double va = a.at(y, x, c);
            const double vb = b.at(y, x, c);
            pa[i] = va;
            pb[i] = vb;
            paa[i] = va * va;
            pbb[i] = vb * vb;
            pab[i] = va * vb;
        }
    const auto mu_a = filter_valid(pa, h, w);
    const auto mu_b = filter_valid(pb, h, w);
    const auto m_aa = filter_valid(paa, h, w);
    const auto m_bb = filter_valid(pbb, h, w);
    const auto m_ab = filter_valid(pab, h, w);

    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double va = m_aa[i] - ma * ma;
        const double vb = m_bb[i] - mb * mb;
        const double cov = m_ab[i] - ma * mb;
        sum += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
               ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
    }
    return sum / static_cast<double>(mu_a.size());
}

}  // namespace

double ssim(const ImageTensor& a, const ImageTensor& b) {
    require_same_shape(a, b, "ssim");
    if (a.height < kWindow || a.width < kWindow)
        throw InvalidInputError("ssim: image smaller than the 11x11 window");
    double sum = 0.0;
    for (int c = 0; c < a.channels; ++c) sum += ssim_channel(a, b, c);
    return sum / a.channels;
}

double psnr(const ImageTensor& a, const ImageTensor& b) {
    require_same_shape(a, b, "psnr");
    double se = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.data.size());
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double mae(const ImageTensor& a, const ImageTensor& b) {
    require_same_shape(a, b, "mae");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        sum += std::fabs(a.data[i] - b.data[i]);
    return sum / static_cast<double>(a.data.size());
}

double l2_norm(const ImageTensor& a, const ImageTensor& b) {
    require_same_shape(a, b, "l2_norm");
    double se = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        se += d * d;
    }
    return std::sqrt(se);
}

double linf_norm(const ImageTensor& a, const ImageTensor& b) {
    require_same_shape(a, b, "linf_norm");
    double mx = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        mx = std::max(mx, std::fabs(a.data[i] - b.data[i]));
    return mx;
}

PerceptualReport report(const ImageTensor& a, const ImageTensor& b) {
    PerceptualReport r;
    r.ssim = ssim(a, b);
    r.psnr_db = psnr(a, b);
    r.mae = mae(a, b);
    r.l2 = l2_norm(a, b);
    r.linf = linf_norm(a, b);
    return r;
}

}  // namespace stylecloak
