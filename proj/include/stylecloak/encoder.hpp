#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "stylecloak/image.hpp"

namespace stylecloak {

// Fixed-length real vector produced by an image encoder.
struct EmbeddingVector {
    std::vector<double> values;
    std::string encoder_id;

    int dim() const { return static_cast<int>(values.size()); }
};

// Static description of an encoder variant. The id uniquely determines
// every other field.
struct EncoderVariant {
    std::string id;            // toy | vit-base | vit-large | vit-huge
    int input_resolution = 0;
    int embed_dim = 0;
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    std::array<double, 3> stddev{1.0, 1.0, 1.0};
};

// Per-call gradient tape. Never shared between embed calls.
class EmbedTape {
public:
    virtual ~EmbedTape() = default;
};

// Immutable differentiable image-embedding handle. embed is reentrant and
// safe for concurrent calls against one handle.
class Encoder {
public:
    virtual ~Encoder() = default;

    virtual const EncoderVariant& variant() const = 0;

    // Deterministic embedding of a pixel-valued RGB image at any size.
    // When `tape` is non-null, activations needed for embed_vjp are kept.
    virtual EmbeddingVector embed(const ImageTensor& img,
                                  std::unique_ptr<EmbedTape>* tape =
                                      nullptr) const = 0;

    // Pull an embedding-space cotangent back to pixel space.
    virtual ImageTensor embed_vjp(const EmbedTape& tape,
                                  const std::vector<double>& cotangent)
        const = 0;
};

// Known variant ids, in stable order.
const std::vector<std::string>& encoder_variant_ids();

// Look up the static description of a variant id.
const EncoderVariant& encoder_variant(const std::string& id);

// Weight cache directory: $STYLE_CLOAK_MODELS if set, otherwise the
// platform cache dir (~/.cache/style-cloak/models).
std::string default_models_dir();

// Load an encoder. The toy variant needs no files; ViT variants read
// <weights_dir>/<id>/model.safetensors (or <weights_dir>/<id>.safetensors).
// An empty weights_dir means default_models_dir().
std::shared_ptr<const Encoder> load_encoder(const std::string& variant_id,
                                            const std::string& weights_dir =
                                                "");

// Wrap an in-memory vision transformer as an Encoder. Used with custom
// checkpoints and with small seeded configurations in tests.
struct VitConfig;
template <typename S>
struct VitWeights;
std::shared_ptr<const Encoder> make_vit_encoder(EncoderVariant variant,
                                                const VitConfig& cfg,
                                                VitWeights<float> weights);

}  // namespace stylecloak
