#pragma once

#include <Eigen/Core>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace stylecloak {

// CLIP-style vision transformer: patch embedding + class token + learned
// positions, pre-LN transformer blocks, post-LN on the class token, and a
// final linear projection into the shared embedding space.
struct VitConfig {
    int image_size = 224;
    int patch_size = 14;
    int hidden = 1024;
    int layers = 24;
    int heads = 16;
    int mlp_dim = 4096;
    int projection_dim = 768;
    enum class Act { kQuickGelu, kGelu } act = Act::kQuickGelu;
    double layer_norm_eps = 1e-5;

    int grid() const { return image_size / patch_size; }
    int num_patches() const { return grid() * grid(); }
    int tokens() const { return num_patches() + 1; }
    int patch_dim() const { return 3 * patch_size * patch_size; }
};

template <typename S>
struct VitWeights {
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic,
                              Eigen::RowMajor>;
    using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

    Mat patch;             // hidden x patch_dim
    Vec class_embedding;   // hidden
    Mat position;          // tokens x hidden
    Vec pre_ln_w, pre_ln_b;

    struct Block {
        Vec ln1_w, ln1_b, ln2_w, ln2_b;
        Mat wq, wk, wv, wo;  // hidden x hidden, row-per-output convention
        Vec bq, bk, bv, bo;
        Mat fc1, fc2;        // mlp_dim x hidden, hidden x mlp_dim
        Vec fc1_b, fc2_b;
    };
    std::vector<Block> blocks;

    Vec post_ln_w, post_ln_b;
    Mat proj;              // projection_dim x hidden
};

// Activations cached by a forward pass for the input-gradient backward pass.
// Weight gradients are never computed; the encoder is frozen by contract.
template <typename S>
struct VitTape {
    using Mat = typename VitWeights<S>::Mat;
    using Vec = typename VitWeights<S>::Vec;

    struct BlockTape {
        Mat ln1_xhat, ln2_xhat;
        Vec ln1_istd, ln2_istd;
        Mat q, k, v;
        std::vector<Mat> attn;  // per head, tokens x tokens softmax output
        Mat mlp_pre;            // pre-activation fc1 output
    };

    Mat pre_ln_xhat;
    Vec pre_ln_istd;
    std::vector<BlockTape> blocks;
    Vec post_xhat;
    S post_istd = S(0);
};

template <typename S>
class VitModel {
public:
    using Mat = typename VitWeights<S>::Mat;
    using Vec = typename VitWeights<S>::Vec;

    VitModel(VitConfig cfg, VitWeights<S> weights);

    const VitConfig& config() const { return cfg_; }

    // patches: num_patches x patch_dim, each row the (c, py, px)-flattened
    // pixels of one patch. Returns the projected class-token embedding.
    Vec forward(const Mat& patches, VitTape<S>* tape = nullptr) const;

    // Cotangent on the embedding -> gradient on the patch matrix.
    Mat backward(const VitTape<S>& tape, const Vec& cotangent) const;

private:
    VitConfig cfg_;
    VitWeights<S> weights_;
};

extern template class VitModel<float>;
extern template class VitModel<double>;

// ---- safetensors ----------------------------------------------------------

struct SafetensorInfo {
    std::string dtype;                 // F32 | F16 | BF16
    std::vector<long long> shape;
    unsigned long long begin = 0, end = 0;  // offsets within the data block
};

// Parses the header of a .safetensors file. Throws LoadError on malformed
// input.
std::map<std::string, SafetensorInfo> read_safetensors_header(
    const std::string& path);

// Reads one tensor (F32/F16/BF16 widened to float) after checking its shape.
std::vector<float> read_safetensors_tensor(const std::string& path,
                                           const std::string& name,
                                           const std::vector<long long>& shape);

// Loads the vision tower + projection from an HF CLIPModel-layout
// .safetensors file (tensor names like
// "vision_model.encoder.layers.0.self_attn.q_proj.weight" and
// "visual_projection.weight"). Missing tensors are reported by name.
VitWeights<float> load_clip_vision_weights(const std::string& path,
                                           const VitConfig& cfg);

// Writes a float weight set in safetensors layout with the HF names above.
// Used to round-trip test the loader and to repackage checkpoints.
void save_clip_vision_weights(const std::string& path, const VitConfig& cfg,
                              const VitWeights<float>& w);

// Deterministic LCG-seeded weights for small test configurations.
template <typename S>
VitWeights<S> random_vit_weights(const VitConfig& cfg, unsigned long long seed,
                                 double scale = 0.05);

extern template VitWeights<float> random_vit_weights<float>(
    const VitConfig&, unsigned long long, double);
extern template VitWeights<double> random_vit_weights<double>(
    const VitConfig&, unsigned long long, double);

}  // namespace stylecloak
