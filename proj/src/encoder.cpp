#include "stylecloak/encoder.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "stylecloak/imaging.hpp"
#include "stylecloak/rng.hpp"
#include "stylecloak/vit.hpp"

namespace stylecloak {

namespace {

constexpr std::array<double, 3> kClipMean{0.48145466, 0.4578275, 0.40821073};
constexpr std::array<double, 3> kClipStd{0.26862954, 0.26130258, 0.27577711};

const std::vector<EncoderVariant>& variant_table() {
    static const std::vector<EncoderVariant> table = {
        {"vit-large", 224, 768, kClipMean, kClipStd},
        {"vit-huge", 224, 1024, kClipMean, kClipStd},
        {"vit-base", 224, 512, kClipMean, kClipStd},
        {"toy", 8, 64, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}},
    };
    return table;
}

VitConfig vit_config_for(const std::string& id) {
    VitConfig cfg;
    if (id == "vit-large") {
        cfg = {224, 14, 1024, 24, 16, 4096, 768, VitConfig::Act::kQuickGelu};
    } else if (id == "vit-base") {
        cfg = {224, 16, 768, 12, 12, 3072, 512, VitConfig::Act::kQuickGelu};
    } else if (id == "vit-huge") {
        cfg = {224, 14, 1280, 32, 16, 5120, 1024, VitConfig::Act::kGelu};
    } else {
        throw InvalidParameterError("no ViT architecture for variant '" + id +
                                    "'");
    }
    return cfg;
}

void require_embeddable(const ImageTensor& img) {
    if (img.channels != 3)
        throw InvalidInputError("embed: expected a 3-channel image");
    if (!all_finite(img))
        throw InvalidInputError("embed: image contains non-finite pixels");
}

// ---- toy encoder -----------------------------------------------------------

constexpr int kToyGrid = 8;
constexpr int kToyFeatures = kToyGrid * kToyGrid * 3;  // 192
constexpr int kToyDim = 64;

// Fixed projection: entries uniform in [-1,1) scaled by 1/sqrt(192), drawn
// from the Lcg64 stream seeded with 0 in row-major order. Pinned so
// cross-language fixtures agree.
const Eigen::MatrixXd& toy_projection() {
    static const Eigen::MatrixXd proj = [] {
        Eigen::MatrixXd m(kToyDim, kToyFeatures);
        Lcg64 rng(0);
        const double scale = 1.0 / std::sqrt(static_cast<double>(kToyFeatures));
        for (int i = 0; i < kToyDim; ++i)
            for (int j = 0; j < kToyFeatures; ++j)
                m(i, j) = (rng.next_uniform() * 2.0 - 1.0) * scale;
        return m;
    }();
    return proj;
}

class ToyTape : public EmbedTape {
public:
    int height = 0, width = 0;
};

class ToyEncoder : public Encoder {
public:
    ToyEncoder() : variant_(encoder_variant("toy")) {}

    ~ToyEncoder() override = default;

    const EncoderVariant& variant() const override { return variant_; }

    EmbeddingVector embed(const ImageTensor& img,
                          std::unique_ptr<EmbedTape>* tape) const override {
        require_embeddable(img);
        if (img.height < kToyGrid || img.width < kToyGrid)
            throw InvalidInputError("toy encoder: image smaller than 8x8");

        const Eigen::VectorXd features = downsample(img);
        const Eigen::VectorXd e = toy_projection() * features;

        if (tape) {
            auto t = std::make_unique<ToyTape>();
            t->height = img.height;
            t->width = img.width;
            *tape = std::move(t);
        }
        EmbeddingVector out;
        out.encoder_id = variant_.id;
        out.values.assign(e.data(), e.data() + e.size());
        return out;
    }

    ImageTensor embed_vjp(const EmbedTape& tape,
                          const std::vector<double>& cotangent) const override {
        const auto& t = dynamic_cast<const ToyTape&>(tape);
        if (static_cast<int>(cotangent.size()) != kToyDim)
            throw InvalidInputError("toy encoder: cotangent dim mismatch");

        const Eigen::Map<const Eigen::VectorXd> cot(cotangent.data(),
                                                    kToyDim);
        const Eigen::VectorXd dfeat = toy_projection().transpose() * cot;

        // Scatter cell gradients back, divided by each cell's pixel count.
        ImageTensor grad(t.height, t.width, 3, true);
        std::vector<int> counts(kToyGrid * kToyGrid, 0);
        for (int y = 0; y < t.height; ++y)
            for (int x = 0; x < t.width; ++x)
                counts[bin(y, t.height) * kToyGrid + bin(x, t.width)]++;
        for (int y = 0; y < t.height; ++y) {
            const int by = bin(y, t.height);
            for (int x = 0; x < t.width; ++x) {
                const int bx = bin(x, t.width);
                const int cell = by * kToyGrid + bx;
                for (int c = 0; c < 3; ++c)
                    grad.at(y, x, c) =
                        dfeat(cell * 3 + c) / counts[cell];
            }
        }
        return grad;
    }

private:
    static int bin(int i, int n) {
        int b = static_cast<int>((static_cast<long long>(i) * kToyGrid) / n);
        return b < kToyGrid ? b : kToyGrid - 1;
    }

    // Mean of each 8x8 grid cell, channels interleaved as (cell*3 + c).
    static Eigen::VectorXd downsample(const ImageTensor& img) {
        Eigen::VectorXd feat = Eigen::VectorXd::Zero(kToyFeatures);
        std::vector<int> counts(kToyGrid * kToyGrid, 0);
        for (int y = 0; y < img.height; ++y) {
            const int by = bin(y, img.height);
            for (int x = 0; x < img.width; ++x) {
                const int bx = bin(x, img.width);
                const int cell = by * kToyGrid + bx;
                counts[cell]++;
                for (int c = 0; c < 3; ++c)
                    feat(cell * 3 + c) += img.at(y, x, c);
            }
        }
        for (int cell = 0; cell < kToyGrid * kToyGrid; ++cell)
            for (int c = 0; c < 3; ++c) feat(cell * 3 + c) /= counts[cell];
        return feat;
    }

    EncoderVariant variant_;
};

// ---- ViT adapter ----------------------------------------------------------

class VitEmbedTape : public EmbedTape {
public:
    VitTape<float> tape;
    int orig_height = 0, orig_width = 0;
};

class VitEncoder : public Encoder {
public:
    VitEncoder(EncoderVariant variant, VitConfig cfg,
               VitWeights<float> weights)
        : variant_(std::move(variant)), cfg_(cfg),
          model_(cfg, std::move(weights)) {}

    const EncoderVariant& variant() const override { return variant_; }

    EmbeddingVector embed(const ImageTensor& img,
                          std::unique_ptr<EmbedTape>* tape) const override {
        require_embeddable(img);
        const int res = variant_.input_resolution;
        ImageTensor resized = resize_bilinear(img, res, res);

        // Normalize and pack patches as (c, py, px)-flattened rows.
        const int P = cfg_.patch_size;
        const int grid = cfg_.grid();
        typename VitModel<float>::Mat patches(cfg_.num_patches(),
                                              cfg_.patch_dim());
        for (int gy = 0; gy < grid; ++gy) {
            for (int gx = 0; gx < grid; ++gx) {
                const int row = gy * grid + gx;
                for (int c = 0; c < 3; ++c) {
                    for (int py = 0; py < P; ++py) {
                        for (int px = 0; px < P; ++px) {
                            const double v =
                                (resized.at(gy * P + py, gx * P + px, c) -
                                 variant_.mean[c]) /
                                variant_.stddev[c];
                            patches(row, (c * P + py) * P + px) =
                                static_cast<float>(v);
                        }
                    }
                }
            }
        }

        std::unique_ptr<VitEmbedTape> t;
        if (tape) {
            t = std::make_unique<VitEmbedTape>();
            t->orig_height = img.height;
            t->orig_width = img.width;
        }
        const auto e = model_.forward(patches, t ? &t->tape : nullptr);
        if (tape) *tape = std::move(t);

        EmbeddingVector out;
        out.encoder_id = variant_.id;
        out.values.resize(e.size());
        for (Eigen::Index i = 0; i < e.size(); ++i) out.values[i] = e(i);
        return out;
    }

    ImageTensor embed_vjp(const EmbedTape& tape,
                          const std::vector<double>& cotangent) const override {
        const auto& t = dynamic_cast<const VitEmbedTape&>(tape);
        typename VitModel<float>::Vec cot(cotangent.size());
        for (std::size_t i = 0; i < cotangent.size(); ++i)
            cot(static_cast<Eigen::Index>(i)) =
                static_cast<float>(cotangent[i]);

        const auto dpatches = model_.backward(t.tape, cot);

        const int res = variant_.input_resolution;
        const int P = cfg_.patch_size;
        const int grid = cfg_.grid();
        ImageTensor dresized(res, res, 3, true);
        for (int gy = 0; gy < grid; ++gy)
            for (int gx = 0; gx < grid; ++gx) {
                const int row = gy * grid + gx;
                for (int c = 0; c < 3; ++c)
                    for (int py = 0; py < P; ++py)
                        for (int px = 0; px < P; ++px)
                            dresized.at(gy * P + py, gx * P + px, c) =
                                dpatches(row, (c * P + py) * P + px) /
                                variant_.stddev[c];
            }
        return resize_bilinear_vjp(dresized, t.orig_height, t.orig_width);
    }

private:
    EncoderVariant variant_;
    VitConfig cfg_;
    VitModel<float> model_;
};

}  // namespace

std::shared_ptr<const Encoder> make_vit_encoder(EncoderVariant variant,
                                                const VitConfig& cfg,
                                                VitWeights<float> weights) {
    return std::make_shared<VitEncoder>(std::move(variant), cfg,
                                        std::move(weights));
}

const std::vector<std::string>& encoder_variant_ids() {
    static const std::vector<std::string> ids = [] {
        std::vector<std::string> v;
        for (const auto& e : variant_table()) v.push_back(e.id);
        return v;
    }();
    return ids;
}

const EncoderVariant& encoder_variant(const std::string& id) {
    for (const auto& e : variant_table())
        if (e.id == id) return e;
    throw InvalidParameterError("unknown encoder variant '" + id + "'");
}

std::string default_models_dir() {
    if (const char* env = std::getenv("STYLE_CLOAK_MODELS"); env && *env)
        return env;
    if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg)
        return std::string(xdg) + "/style-cloak/models";
    if (const char* home = std::getenv("HOME"); home && *home)
        return std::string(home) + "/.cache/style-cloak/models";
    return "./style-cloak-models";
}

std::shared_ptr<const Encoder> load_encoder(const std::string& variant_id,
                                            const std::string& weights_dir) {
    const EncoderVariant& variant = encoder_variant(variant_id);
    if (variant_id == "toy") return std::make_shared<ToyEncoder>();

    const std::string dir =
        weights_dir.empty() ? default_models_dir() : weights_dir;
    const std::string nested = dir + "/" + variant_id + "/model.safetensors";
    const std::string flat = dir + "/" + variant_id + ".safetensors";
    std::string path;
    if (std::filesystem::exists(nested)) path = nested;
    else if (std::filesystem::exists(flat)) path = flat;
    else
        throw LoadError("no weights for '" + variant_id +
                        "'; expected one of: " + nested + ", " + flat);

    const VitConfig cfg = vit_config_for(variant_id);
    VitWeights<float> w = load_clip_vision_weights(path, cfg);
    return std::make_shared<VitEncoder>(variant, cfg, std::move(w));
}

}  // namespace stylecloak
