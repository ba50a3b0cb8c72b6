#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "stylecloak/encoder.hpp"
#include "testutil.hpp"

using namespace stylecloak;
using testutil::random_image;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST_CASE("variant table") {
    CHECK(encoder_variant("toy").embed_dim == 64);
    CHECK(encoder_variant("toy").input_resolution == 8);
    CHECK(encoder_variant("vit-large").embed_dim == 768);
    CHECK(encoder_variant("vit-base").embed_dim == 512);
    CHECK(encoder_variant("vit-huge").embed_dim == 1024);
    CHECK_THROWS_AS(encoder_variant("vit-gigantic"), InvalidParameterError);
}

TEST_CASE("toy encoder loads without any files") {
    const auto enc = load_encoder("toy", "/definitely/not/a/real/dir");
    CHECK(enc->variant().id == "toy");
    CHECK(enc->variant().embed_dim == 64);
}

TEST_CASE("vit-large load from an empty dir names the missing files") {
    testutil::TempDir dir("no_weights");
    try {
        load_encoder("vit-large", dir.str());
        FAIL("expected LoadError");
    } catch (const LoadError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("vit-large/model.safetensors") != std::string::npos);
        CHECK(msg.find("vit-large.safetensors") != std::string::npos);
    }
}

TEST_CASE("a corrupt weights file is a load error") {
    testutil::TempDir dir("bad_weights");
    std::filesystem::create_directories(dir.path() / "vit-base");
    std::ofstream((dir.path() / "vit-base" / "model.safetensors").string())
        << "garbage, not safetensors";
    CHECK_THROWS_AS(load_encoder("vit-base", dir.str()), LoadError);
}

TEST_CASE("toy encoder on the zero image is the zero vector") {
    const auto enc = load_encoder("toy");
    const EmbeddingVector e = enc->embed(ImageTensor(16, 16, 3));
    CHECK(e.dim() == 64);
    for (double v : e.values) CHECK(v == 0.0);
}

TEST_CASE("toy encoder is linear: embed(2x) = 2 embed(x)") {
    const auto enc = load_encoder("toy");
    const ImageTensor x = random_image(16, 16, 3, 1);
    ImageTensor x2 = x;
    for (double& v : x2.data) v *= 2.0;
    const EmbeddingVector e1 = enc->embed(x);
    const EmbeddingVector e2 = enc->embed(x2);
    for (int i = 0; i < e1.dim(); ++i)
        CHECK(std::fabs(e2.values[i] - 2.0 * e1.values[i]) <= 1e-6);
}

TEST_CASE("embed is deterministic, bitwise") {
    const auto enc = load_encoder("toy");
    const ImageTensor x = random_image(24, 24, 3, 2);
    const EmbeddingVector a = enc->embed(x);
    const EmbeddingVector b = enc->embed(x);
    for (int i = 0; i < a.dim(); ++i) CHECK(a.values[i] == b.values[i]);
}

TEST_CASE("embedding of a [0,1] image has finite norm") {
    const auto enc = load_encoder("toy");
    const EmbeddingVector e = enc->embed(random_image(224, 224, 3, 3));
    double n2 = 0.0;
    for (double v : e.values) n2 += v * v;
    CHECK(std::isfinite(n2));
    CHECK(n2 > 0.0);
}

TEST_CASE("non-finite pixels are rejected") {
    const auto enc = load_encoder("toy");
    ImageTensor x(16, 16, 3);
    x.at(3, 3, 1) = std::nan("");
    CHECK_THROWS_AS(enc->embed(x), InvalidInputError);
}

TEST_CASE("toy embed gradient matches central finite differences") {
    const auto enc = load_encoder("toy");
    const ImageTensor x = random_image(16, 16, 3, 4);

    // Scalar probe f(x) = <w, embed(x)>.
    Lcg64 rng(99);
    std::vector<double> w(64);
    for (double& v : w) v = rng.next_uniform() * 2.0 - 1.0;

    std::unique_ptr<EmbedTape> tape;
    enc->embed(x, &tape);
    const ImageTensor grad = enc->embed_vjp(*tape, w);

    const double h = 1e-6;
    double worst_rel = 0.0;
    for (std::size_t i = 0; i < x.data.size(); i += 7) {
        ImageTensor xp = x, xm = x;
        xp.data[i] += h;
        xm.data[i] -= h;
        const double fp = dot(w, enc->embed(xp).values);
        const double fm = dot(w, enc->embed(xm).values);
        const double fd = (fp - fm) / (2.0 * h);
        const double denom = std::max(std::fabs(fd), 1e-10);
        worst_rel = std::max(worst_rel,
                             std::fabs(grad.data[i] - fd) / denom);
    }
    CHECK(worst_rel <= 1e-4);
}

TEST_CASE("toy projection matrix is pinned to the documented stream") {
    // First entries of the Lcg64(0) stream, scaled by (2u-1)/sqrt(192).
    Lcg64 rng(0);
    const double scale = 1.0 / std::sqrt(192.0);
    const double w00 = (rng.next_uniform() * 2.0 - 1.0) * scale;

    // An image whose downsample is a unit vector on feature 0: cell (0,0)
    // red channel 1, everything else 0 (16x16 -> cells of 2x2 pixels).
    ImageTensor x(16, 16, 3);
    x.at(0, 0, 0) = x.at(0, 1, 0) = x.at(1, 0, 0) = x.at(1, 1, 0) = 1.0;
    const auto enc = load_encoder("toy");
    const EmbeddingVector e = enc->embed(x);
    CHECK(e.values[0] == doctest::Approx(w00).epsilon(1e-12));
}

TEST_CASE("STYLE_CLOAK_MODELS drives the default weights dir") {
    ::setenv("STYLE_CLOAK_MODELS", "/tmp/some-models-dir", 1);
    CHECK(default_models_dir() == "/tmp/some-models-dir");
    ::unsetenv("STYLE_CLOAK_MODELS");
}
