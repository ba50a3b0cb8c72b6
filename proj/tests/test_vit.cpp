#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <fstream>

#include "stylecloak/encoder.hpp"
#include "stylecloak/vit.hpp"
#include "testutil.hpp"

using namespace stylecloak;
using testutil::random_image;

namespace {

VitConfig tiny_config(VitConfig::Act act) {
    VitConfig cfg;
    cfg.image_size = 16;
    cfg.patch_size = 8;
    cfg.hidden = 16;
    cfg.layers = 2;
    cfg.heads = 4;
    cfg.mlp_dim = 32;
    cfg.projection_dim = 12;
    cfg.act = act;
    return cfg;
}

template <typename S>
typename VitModel<S>::Mat random_patches(const VitConfig& cfg,
                                         unsigned long long seed) {
    typename VitModel<S>::Mat m(cfg.num_patches(), cfg.patch_dim());
    Lcg64 rng(seed);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = static_cast<S>(rng.next_uniform() * 2.0 - 1.0);
    return m;
}

void check_gradient(VitConfig::Act act) {
    const VitConfig cfg = tiny_config(act);
    VitModel<double> model(cfg, random_vit_weights<double>(cfg, 7, 0.3));
    const auto patches = random_patches<double>(cfg, 8);

    Eigen::VectorXd w(cfg.projection_dim);
    Lcg64 rng(9);
    for (int i = 0; i < cfg.projection_dim; ++i)
        w(i) = rng.next_uniform() * 2.0 - 1.0;

    VitTape<double> tape;
    const Eigen::VectorXd out = model.forward(patches, &tape);
    REQUIRE(out.size() == cfg.projection_dim);
    const auto grad = model.backward(tape, w);

    const double h = 1e-6;
    double worst = 0.0;
    int checked = 0;
    for (Eigen::Index i = 0; i < patches.rows(); ++i) {
        for (Eigen::Index j = 0; j < patches.cols(); j += 17) {
            auto p = patches;
            p(i, j) += h;
            const double fp = w.dot(model.forward(p));
            p(i, j) -= 2.0 * h;
            const double fm = w.dot(model.forward(p));
            const double fd = (fp - fm) / (2.0 * h);
            const double denom = std::max(std::fabs(fd), 1e-9);
            worst = std::max(worst, std::fabs(grad(i, j) - fd) / denom);
            ++checked;
        }
    }
    CHECK(checked >= 40);
    CHECK(worst <= 1e-5);
}

}  // namespace

TEST_CASE("tiny ViT input gradient matches finite differences (quick gelu)") {
    check_gradient(VitConfig::Act::kQuickGelu);
}

TEST_CASE("tiny ViT input gradient matches finite differences (erf gelu)") {
    check_gradient(VitConfig::Act::kGelu);
}

TEST_CASE("forward is deterministic") {
    const VitConfig cfg = tiny_config(VitConfig::Act::kQuickGelu);
    VitModel<float> model(cfg, random_vit_weights<float>(cfg, 3, 0.3));
    const auto patches = random_patches<float>(cfg, 4);
    const Eigen::VectorXf a = model.forward(patches);
    const Eigen::VectorXf b = model.forward(patches);
    for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(a(i) == b(i));
}

TEST_CASE("safetensors round trip preserves every tensor") {
    testutil::TempDir dir("st_roundtrip");
    const VitConfig cfg = tiny_config(VitConfig::Act::kQuickGelu);
    const VitWeights<float> w = random_vit_weights<float>(cfg, 12, 0.5);
    const std::string path = dir.str() + "/tiny.safetensors";
    save_clip_vision_weights(path, cfg, w);

    const VitWeights<float> r = load_clip_vision_weights(path, cfg);
    CHECK((r.patch - w.patch).cwiseAbs().maxCoeff() == 0.0f);
    CHECK((r.position - w.position).cwiseAbs().maxCoeff() == 0.0f);
    CHECK((r.proj - w.proj).cwiseAbs().maxCoeff() == 0.0f);
    for (int i = 0; i < cfg.layers; ++i) {
        CHECK((r.blocks[i].wq - w.blocks[i].wq).cwiseAbs().maxCoeff() == 0.0f);
        CHECK((r.blocks[i].fc1 - w.blocks[i].fc1).cwiseAbs().maxCoeff() ==
              0.0f);
        CHECK((r.blocks[i].bo - w.blocks[i].bo).cwiseAbs().maxCoeff() == 0.0f);
    }

    // Same file drives identical models.
    VitModel<float> m1(cfg, w);
    VitModel<float> m2(cfg, r);
    const auto patches = random_patches<float>(cfg, 5);
    CHECK((m1.forward(patches) - m2.forward(patches)).cwiseAbs().maxCoeff() ==
          0.0f);
}

TEST_CASE("loading a deeper config reports the missing tensors by name") {
    testutil::TempDir dir("st_missing");
    const VitConfig small = tiny_config(VitConfig::Act::kQuickGelu);
    const std::string path = dir.str() + "/small.safetensors";
    save_clip_vision_weights(path, small,
                             random_vit_weights<float>(small, 1, 0.5));

    VitConfig deeper = small;
    deeper.layers = 3;
    try {
        load_clip_vision_weights(path, deeper);
        FAIL("expected LoadError");
    } catch (const LoadError& e) {
        CHECK(std::string(e.what()).find("encoder.layers.2") !=
              std::string::npos);
    }
}

TEST_CASE("loading with a mismatched width is a shape error") {
    testutil::TempDir dir("st_shape");
    const VitConfig small = tiny_config(VitConfig::Act::kQuickGelu);
    const std::string path = dir.str() + "/small.safetensors";
    save_clip_vision_weights(path, small,
                             random_vit_weights<float>(small, 2, 0.5));
    VitConfig wide = small;
    wide.hidden = 24;
    CHECK_THROWS_AS(load_clip_vision_weights(path, wide), LoadError);
}

TEST_CASE("F16 and BF16 tensors widen correctly") {
    testutil::TempDir dir("st_dtypes");
    const std::string path = dir.str() + "/half.safetensors";

    // 1.0, -2.5, 0.5 in IEEE half; 1.0, -2.5 in bfloat16.
    const std::uint16_t f16[3] = {0x3c00, 0xc100, 0x3800};
    const std::uint16_t bf16[2] = {0x3f80, 0xc020};
    const std::string header =
        R"({"h":{"dtype":"F16","shape":[3],"data_offsets":[0,6]},)"
        R"("b":{"dtype":"BF16","shape":[2],"data_offsets":[6,10]}})";
    std::ofstream f(path, std::ios::binary);
    const std::uint64_t len = header.size();
    f.write(reinterpret_cast<const char*>(&len), 8);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    f.write(reinterpret_cast<const char*>(f16), 6);
    f.write(reinterpret_cast<const char*>(bf16), 4);
    f.close();

    const auto h = read_safetensors_tensor(path, "h", {3});
    CHECK(h[0] == doctest::Approx(1.0));
    CHECK(h[1] == doctest::Approx(-2.5));
    CHECK(h[2] == doctest::Approx(0.5));
    const auto b = read_safetensors_tensor(path, "b", {2});
    CHECK(b[0] == doctest::Approx(1.0));
    CHECK(b[1] == doctest::Approx(-2.5));
}

TEST_CASE("a ViT-backed Encoder produces usable pixel gradients") {
    const VitConfig cfg = tiny_config(VitConfig::Act::kQuickGelu);
    EncoderVariant variant;
    variant.id = "tiny-test";
    variant.input_resolution = cfg.image_size;
    variant.embed_dim = cfg.projection_dim;
    variant.mean = {0.48145466, 0.4578275, 0.40821073};
    variant.stddev = {0.26862954, 0.26130258, 0.27577711};
    const auto enc = make_vit_encoder(variant, cfg,
                                      random_vit_weights<float>(cfg, 21, 0.3));

    const ImageTensor x = random_image(16, 16, 3, 22);
    std::unique_ptr<EmbedTape> tape;
    const EmbeddingVector e = enc->embed(x, &tape);
    REQUIRE(e.dim() == cfg.projection_dim);

    std::vector<double> w(e.values.size());
    Lcg64 rng(23);
    for (double& v : w) v = rng.next_uniform() * 2.0 - 1.0;
    const ImageTensor grad = enc->embed_vjp(*tape, w);

    // Directional-derivative check; float forward limits the accuracy.
    Lcg64 drng(24);
    ImageTensor d(16, 16, 3, true);
    for (double& v : d.data) v = drng.next_uniform() * 2.0 - 1.0;
    const double h = 1e-3;
    ImageTensor xp = x, xm = x;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        xp.data[i] += h * d.data[i];
        xm.data[i] -= h * d.data[i];
    }
    double fp = 0.0, fm = 0.0, analytic = 0.0;
    const auto ep = enc->embed(xp);
    const auto em = enc->embed(xm);
    for (std::size_t i = 0; i < w.size(); ++i) {
        fp += w[i] * ep.values[i];
        fm += w[i] * em.values[i];
    }
    for (std::size_t i = 0; i < d.data.size(); ++i)
        analytic += grad.data[i] * d.data[i];
    const double fd = (fp - fm) / (2.0 * h);
    CHECK(std::fabs(fd - analytic) <=
          2e-2 * std::max(1.0, std::fabs(analytic)));

    // Resize path: a larger input flows gradients back to its own grid.
    const ImageTensor big = random_image(32, 32, 3, 25);
    std::unique_ptr<EmbedTape> tape2;
    enc->embed(big, &tape2);
    const ImageTensor grad_big = enc->embed_vjp(*tape2, w);
    CHECK(grad_big.height == 32);
    CHECK(grad_big.width == 32);
}
