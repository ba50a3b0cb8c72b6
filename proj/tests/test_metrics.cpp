#include <doctest.h>

#include <cmath>
#include <vector>

#include "stylecloak/metrics.hpp"
#include "testutil.hpp"

using namespace stylecloak;
using testutil::random_image;
using testutil::synthetic_art_image;

namespace {

// Direct per-window SSIM oracle: no separability tricks, straight from the
// definition with an 11x11 sigma-1.5 Gaussian window on the valid region.
double ssim_oracle(const ImageTensor& a, const ImageTensor& b) {
    constexpr int W = 11, H = 5;
    constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
    double kernel[W][W];
    double ksum = 0.0;
    for (int i = 0; i < W; ++i)
        for (int j = 0; j < W; ++j) {
            const double dy = i - H, dx = j - H;
            kernel[i][j] = std::exp(-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5));
            ksum += kernel[i][j];
        }
    for (auto& row : kernel)
        for (double& v : row) v /= ksum;

    double total = 0.0;
    int count = 0;
    for (int c = 0; c < a.channels; ++c) {
        double channel_sum = 0.0;
        int channel_count = 0;
        for (int y = H; y < a.height - H; ++y)
            for (int x = H; x < a.width - H; ++x) {
                double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
                for (int i = 0; i < W; ++i)
                    for (int j = 0; j < W; ++j) {
                        const double va = a.at(y + i - H, x + j - H, c);
                        const double vb = b.at(y + i - H, x + j - H, c);
                        ma += kernel[i][j] * va;
                        mb += kernel[i][j] * vb;
                        maa += kernel[i][j] * va * va;
                        mbb += kernel[i][j] * vb * vb;
                        mab += kernel[i][j] * va * vb;
                    }
                const double var_a = maa - ma * ma;
                const double var_b = mbb - mb * mb;
                const double cov = mab - ma * mb;
                channel_sum += ((2 * ma * mb + C1) * (2 * cov + C2)) /
                               ((ma * ma + mb * mb + C1) *
                                (var_a + var_b + C2));
                ++channel_count;
            }
        total += channel_sum / channel_count;
        ++count;
    }
    return total / count;
}

}  // namespace

TEST_CASE("ssim fixtures") {
    const ImageTensor img = synthetic_art_image(64, 1);
    SUBCASE("identical images score exactly 1") {
        CHECK(ssim(img, img) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("inverted image matches the direct oracle") {
        ImageTensor inv = img;
        for (double& v : inv.data) v = 1.0 - v;
        CHECK(std::fabs(ssim(img, inv) - ssim_oracle(img, inv)) <= 1e-4);
    }
    SUBCASE("noisy pair matches the direct oracle") {
        const ImageTensor noisy = random_image(64, 64, 3, 2);
        CHECK(std::fabs(ssim(img, noisy) - ssim_oracle(img, noisy)) <= 1e-4);
    }
    SUBCASE("images narrower than the window are rejected") {
        const ImageTensor small(8, 8, 3);
        CHECK_THROWS_AS(ssim(small, small), InvalidInputError);
    }
    SUBCASE("shape mismatch is rejected") {
        CHECK_THROWS_AS(ssim(img, ImageTensor(32, 32, 3)), InvalidInputError);
    }
}

TEST_CASE("psnr closed forms") {
    const ImageTensor a = constant_image(32, 32, 3, 0.4);
    SUBCASE("uniform |delta| 0.1 is exactly 20 dB") {
        ImageTensor b = a;
        for (double& v : b.data) v += 0.1;
        CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
    }
    SUBCASE("identical images hit the 100 dB cap") {
        CHECK(psnr(a, a) == 100.0);
    }
    SUBCASE("sub-cap values never exceed 100") {
        ImageTensor b = a;
        b.data[0] += 1e-9;
        CHECK(psnr(a, b) <= 100.0);
    }
}

TEST_CASE("mae / l2 / linf closed forms at full working resolution") {
    const ImageTensor a = constant_image(224, 224, 3, 0.3);
    ImageTensor b = a;
    for (double& v : b.data) v += 0.1;
    CHECK(mae(a, b) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(l2_norm(a, b) ==
          doctest::Approx(0.1 * std::sqrt(224.0 * 224.0 * 3.0))
              .epsilon(1e-12));
    CHECK(l2_norm(a, b) == doctest::Approx(38.80).epsilon(1e-3));
    CHECK(linf_norm(a, b) == doctest::Approx(0.1).epsilon(1e-12));

    CHECK(mae(a, a) == 0.0);
    CHECK(l2_norm(a, a) == 0.0);
    CHECK(linf_norm(a, a) == 0.0);
}

TEST_CASE("metric symmetry") {
    const ImageTensor a = random_image(32, 32, 3, 3);
    const ImageTensor b = random_image(32, 32, 3, 4);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
    CHECK(psnr(a, b) == doctest::Approx(psnr(b, a)).epsilon(1e-12));
    CHECK(mae(a, b) == doctest::Approx(mae(b, a)).epsilon(1e-12));
    CHECK(l2_norm(a, b) == doctest::Approx(l2_norm(b, a)).epsilon(1e-12));
    CHECK(linf_norm(a, b) == doctest::Approx(linf_norm(b, a)).epsilon(1e-12));
}

TEST_CASE("scaling a perturbation moves every metric the right way") {
    const ImageTensor a = synthetic_art_image(48, 5);
    const ImageTensor noise = random_image(48, 48, 3, 6);
    auto perturbed = [&](double s) {
        ImageTensor out = a;
        for (std::size_t i = 0; i < out.data.size(); ++i)
            out.data[i] += s * (noise.data[i] - 0.5) * 0.1;
        return out;
    };
    const ImageTensor p1 = perturbed(1.0);
    const ImageTensor p2 = perturbed(2.5);
    CHECK(mae(a, p2) > mae(a, p1));
    CHECK(l2_norm(a, p2) > l2_norm(a, p1));
    CHECK(linf_norm(a, p2) > linf_norm(a, p1));
    CHECK(psnr(a, p2) < psnr(a, p1));
}

TEST_CASE("norm inequalities") {
    for (unsigned long long seed = 10; seed < 20; ++seed) {
        const ImageTensor a = random_image(24, 24, 3, 2 * seed);
        const ImageTensor b = random_image(24, 24, 3, 2 * seed + 1);
        const double n = static_cast<double>(a.data.size());
        CHECK(mae(a, b) <= linf_norm(a, b) + 1e-15);
        CHECK(l2_norm(a, b) <= linf_norm(a, b) * std::sqrt(n) + 1e-12);
    }
}

TEST_CASE("report aggregates all five metrics") {
    const ImageTensor a = synthetic_art_image(64, 7);
    ImageTensor b = a;
    for (double& v : b.data) v = std::min(1.0, v + 0.02);
    const PerceptualReport r = report(a, b);
    CHECK(r.ssim == doctest::Approx(ssim(a, b)));
    CHECK(r.psnr_db == doctest::Approx(psnr(a, b)));
    CHECK(r.mae == doctest::Approx(mae(a, b)));
    CHECK(r.l2 == doctest::Approx(l2_norm(a, b)));
    CHECK(r.linf == doctest::Approx(linf_norm(a, b)));

    const PerceptualReport same = report(a, a);
    CHECK(same.ssim == 1.0);
    CHECK(same.psnr_db == 100.0);
    CHECK(same.mae == 0.0);
    CHECK(same.l2 == 0.0);
    CHECK(same.linf == 0.0);
}
