#include "stylecloak/vit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "stylecloak/errors.hpp"
#include "stylecloak/rng.hpp"

namespace stylecloak {

namespace {

template <typename S>
S quick_gelu(S x) {
    const S sig = S(1) / (S(1) + std::exp(S(-1.702) * x));
    return x * sig;
}

template <typename S>
S quick_gelu_grad(S x) {
    const S sig = S(1) / (S(1) + std::exp(S(-1.702) * x));
    return sig + x * S(1.702) * sig * (S(1) - sig);
}

template <typename S>
S erf_gelu(S x) {
    return S(0.5) * x * (S(1) + std::erf(x * S(0.7071067811865475)));
}

template <typename S>
S erf_gelu_grad(S x) {
    const S cdf = S(0.5) * (S(1) + std::erf(x * S(0.7071067811865475)));
    const S pdf = S(0.3989422804014327) * std::exp(S(-0.5) * x * x);
    return cdf + x * pdf;
}

}  // namespace

namespace {

// y = gamma .* xhat + beta, xhat = (x - mu) * istd, per row.
template <typename S, typename Mat, typename Vec>
Mat layernorm(const Mat& x, const Vec& gamma, const Vec& beta, double eps,
              Mat* xhat_out, Vec* istd_out) {
    const auto rows = x.rows();
    const auto cols = x.cols();
    Mat y(rows, cols);
    Mat xhat(rows, cols);
    Vec istd(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const S mu = x.row(r).mean();
        S var = S(0);
        for (Eigen::Index c = 0; c < cols; ++c) {
            const S d = x(r, c) - mu;
            var += d * d;
        }
        var /= S(cols);
        const S is = S(1) / std::sqrt(var + S(eps));
        istd(r) = is;
        for (Eigen::Index c = 0; c < cols; ++c) {
            const S xh = (x(r, c) - mu) * is;
            xhat(r, c) = xh;
            y(r, c) = gamma(c) * xh + beta(c);
        }
    }
    if (xhat_out) *xhat_out = std::move(xhat);
    if (istd_out) *istd_out = std::move(istd);
    return y;
}

template <typename S, typename Mat, typename Vec>
Mat layernorm_backward(const Mat& dy, const Mat& xhat, const Vec& istd,
                       const Vec& gamma) {
    const auto rows = dy.rows();
    const auto cols = dy.cols();
    Mat dx(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        S m1 = S(0), m2 = S(0);
        for (Eigen::Index c = 0; c < cols; ++c) {
            const S t = dy(r, c) * gamma(c);
            m1 += t;
            m2 += t * xhat(r, c);
        }
        m1 /= S(cols);
        m2 /= S(cols);
        for (Eigen::Index c = 0; c < cols; ++c) {
            const S t = dy(r, c) * gamma(c);
            dx(r, c) = istd(r) * (t - m1 - xhat(r, c) * m2);
        }
    }
    return dx;
}

template <typename Mat>
void softmax_rows(Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        const auto mx = row.maxCoeff();
        row.array() = (row.array() - mx).exp();
        row /= row.sum();
    }
}

}  // namespace

template <typename S>
VitModel<S>::VitModel(VitConfig cfg, VitWeights<S> weights)
    : cfg_(std::move(cfg)), weights_(std::move(weights)) {}

template <typename S>
typename VitModel<S>::Vec VitModel<S>::forward(const Mat& patches,
                                               VitTape<S>* tape) const {
    const int n = cfg_.tokens();
    const int h = cfg_.hidden;
    const int heads = cfg_.heads;
    const int hd = h / heads;
    const S scale = S(1) / std::sqrt(S(hd));
    const VitWeights<S>& w = weights_;

    if (patches.rows() != cfg_.num_patches() ||
        patches.cols() != cfg_.patch_dim())
        throw InvalidInputError("vit: patch matrix shape mismatch");

    VitTape<S> local;
    VitTape<S>& t = tape ? *tape : local;
    t.blocks.resize(cfg_.layers);

    Mat x(n, h);
    x.row(0) = w.class_embedding.transpose();
    x.bottomRows(n - 1).noalias() = patches * w.patch.transpose();
    x += w.position;

    x = layernorm<S>(x, w.pre_ln_w, w.pre_ln_b, cfg_.layer_norm_eps,
                     tape ? &t.pre_ln_xhat : nullptr,
                     tape ? &t.pre_ln_istd : nullptr);

    for (int l = 0; l < cfg_.layers; ++l) {
        const auto& b = w.blocks[l];
        auto& bt = t.blocks[l];

        Mat h1 = layernorm<S>(x, b.ln1_w, b.ln1_b, cfg_.layer_norm_eps,
                              tape ? &bt.ln1_xhat : nullptr,
                              tape ? &bt.ln1_istd : nullptr);
        Mat q = (h1 * b.wq.transpose()).rowwise() + b.bq.transpose();
        Mat k = (h1 * b.wk.transpose()).rowwise() + b.bk.transpose();
        Mat v = (h1 * b.wv.transpose()).rowwise() + b.bv.transpose();

        Mat ctx(n, h);
        if (tape) bt.attn.resize(heads);
        for (int hh = 0; hh < heads; ++hh) {
            const auto qh = q.middleCols(hh * hd, hd);
            const auto kh = k.middleCols(hh * hd, hd);
            const auto vh = v.middleCols(hh * hd, hd);
            Mat scores = (qh * kh.transpose()) * scale;
            softmax_rows(scores);
            ctx.middleCols(hh * hd, hd).noalias() = scores * vh;
            if (tape) bt.attn[hh] = std::move(scores);
        }
        if (tape) {
            bt.q = std::move(q);
            bt.k = std::move(k);
            bt.v = std::move(v);
        }

        x += (ctx * b.wo.transpose()).rowwise() + b.bo.transpose();

        Mat h2 = layernorm<S>(x, b.ln2_w, b.ln2_b, cfg_.layer_norm_eps,
                              tape ? &bt.ln2_xhat : nullptr,
                              tape ? &bt.ln2_istd : nullptr);
        Mat m1 = (h2 * b.fc1.transpose()).rowwise() + b.fc1_b.transpose();
        Mat g = m1;
        if (cfg_.act == VitConfig::Act::kQuickGelu)
            g = g.unaryExpr([](S v) { return quick_gelu(v); });
        else
            g = g.unaryExpr([](S v) { return erf_gelu(v); });
        if (tape) bt.mlp_pre = std::move(m1);

        x += (g * b.fc2.transpose()).rowwise() + b.fc2_b.transpose();
    }

    // Post-LN on the class token only, then the final projection.
    Mat cls = x.row(0);
    Mat cls_hat;
    Vec cls_istd;
    Mat pooled = layernorm<S>(cls, w.post_ln_w, w.post_ln_b,
                              cfg_.layer_norm_eps, tape ? &cls_hat : nullptr,
                              tape ? &cls_istd : nullptr);
    if (tape) {
        t.post_xhat = cls_hat.row(0).transpose();
        t.post_istd = cls_istd(0);
    }
    return w.proj * pooled.row(0).transpose();
}

template <typename S>
typename VitModel<S>::Mat VitModel<S>::backward(const VitTape<S>& t,
                                                const Vec& cotangent) const {
    const int n = cfg_.tokens();
    const int h = cfg_.hidden;
    const int heads = cfg_.heads;
    const int hd = h / heads;
    const S scale = S(1) / std::sqrt(S(hd));
    const VitWeights<S>& w = weights_;

    if (cotangent.size() != cfg_.projection_dim)
        throw InvalidInputError("vit backward: cotangent dim mismatch");
    if (static_cast<int>(t.blocks.size()) != cfg_.layers ||
        (cfg_.layers > 0 && t.blocks.front().attn.empty()))
        throw InvalidInputError("vit backward: tape was not recorded");

    Mat dx = Mat::Zero(n, h);
    {
        Vec dpooled = w.proj.transpose() * cotangent;
        Mat dp(1, h), xh(1, h);
        dp.row(0) = dpooled.transpose();
        xh.row(0) = t.post_xhat.transpose();
        Vec istd(1);
        istd(0) = t.post_istd;
        dx.row(0) =
            layernorm_backward<S>(dp, xh, istd, w.post_ln_w).row(0);
    }

    for (int l = cfg_.layers - 1; l >= 0; --l) {
        const auto& b = w.blocks[l];
        const auto& bt = t.blocks[l];

        // MLP branch.
        Mat dg = dx * b.fc2;
        Mat act_grad = cfg_.act == VitConfig::Act::kQuickGelu
                           ? Mat(bt.mlp_pre.unaryExpr(
                                 [](S v) { return quick_gelu_grad(v); }))
                           : Mat(bt.mlp_pre.unaryExpr(
                                 [](S v) { return erf_gelu_grad(v); }));
        Mat dm1 = dg.cwiseProduct(act_grad);
        Mat dh2 = dm1 * b.fc1;
        dx += layernorm_backward<S>(dh2, bt.ln2_xhat, bt.ln2_istd, b.ln2_w);

        // Attention branch.
        Mat dctx = dx * b.wo;
        Mat dq(n, h), dk(n, h), dv(n, h);
        for (int hh = 0; hh < heads; ++hh) {
            const auto qh = bt.q.middleCols(hh * hd, hd);
            const auto kh = bt.k.middleCols(hh * hd, hd);
            const auto vh = bt.v.middleCols(hh * hd, hd);
            const Mat& p = bt.attn[hh];
            const auto dctx_h = dctx.middleCols(hh * hd, hd);

            Mat dp = dctx_h * vh.transpose();
            dv.middleCols(hh * hd, hd).noalias() = p.transpose() * dctx_h;

            // Softmax backward, row-wise.
            Mat ds(n, n);
            for (int r = 0; r < n; ++r) {
                const S dot = dp.row(r).cwiseProduct(p.row(r)).sum();
                ds.row(r) =
                    ((dp.row(r).array() - dot) * p.row(r).array()).matrix();
            }
            dq.middleCols(hh * hd, hd).noalias() = (ds * kh) * scale;
            dk.middleCols(hh * hd, hd).noalias() =
                (ds.transpose() * qh) * scale;
        }
        Mat dh1 = dq * b.wq + dk * b.wk + dv * b.wv;
        dx += layernorm_backward<S>(dh1, bt.ln1_xhat, bt.ln1_istd, b.ln1_w);
    }

    Mat dx0 =
        layernorm_backward<S>(dx, t.pre_ln_xhat, t.pre_ln_istd, w.pre_ln_w);
    return dx0.bottomRows(n - 1) * w.patch;
}

template class VitModel<float>;
template class VitModel<double>;

// ---- deterministic test weights -------------------------------------------

template <typename S>
VitWeights<S> random_vit_weights(const VitConfig& cfg, unsigned long long seed,
                                 double scale) {
    using Mat = typename VitWeights<S>::Mat;
    using Vec = typename VitWeights<S>::Vec;
    Lcg64 rng(seed);
    auto mat = [&](int r, int c) {
        Mat m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                m(i, j) = static_cast<S>((rng.next_uniform() * 2.0 - 1.0) *
                                         scale);
        return m;
    };
    auto vec = [&](int nn) {
        Vec v(nn);
        for (int i = 0; i < nn; ++i)
            v(i) =
                static_cast<S>((rng.next_uniform() * 2.0 - 1.0) * scale);
        return v;
    };
    auto ones = [](int nn) { return Vec::Ones(nn); };
    auto zeros = [](int nn) { return Vec::Zero(nn); };

    VitWeights<S> w;
    w.patch = mat(cfg.hidden, cfg.patch_dim());
    w.class_embedding = vec(cfg.hidden);
    w.position = mat(cfg.tokens(), cfg.hidden);
    w.pre_ln_w = ones(cfg.hidden);
    w.pre_ln_b = zeros(cfg.hidden);
    w.blocks.resize(cfg.layers);
    for (auto& b : w.blocks) {
        b.ln1_w = ones(cfg.hidden);
        b.ln1_b = zeros(cfg.hidden);
        b.ln2_w = ones(cfg.hidden);
        b.ln2_b = zeros(cfg.hidden);
        b.wq = mat(cfg.hidden, cfg.hidden);
        b.wk = mat(cfg.hidden, cfg.hidden);
        b.wv = mat(cfg.hidden, cfg.hidden);
        b.wo = mat(cfg.hidden, cfg.hidden);
        b.bq = vec(cfg.hidden);
        b.bk = vec(cfg.hidden);
        b.bv = vec(cfg.hidden);
        b.bo = vec(cfg.hidden);
        b.fc1 = mat(cfg.mlp_dim, cfg.hidden);
        b.fc1_b = vec(cfg.mlp_dim);
        b.fc2 = mat(cfg.hidden, cfg.mlp_dim);
        b.fc2_b = vec(cfg.hidden);
    }
    w.post_ln_w = ones(cfg.hidden);
    w.post_ln_b = zeros(cfg.hidden);
    w.proj = mat(cfg.projection_dim, cfg.hidden);
    return w;
}

template VitWeights<float> random_vit_weights<float>(const VitConfig&,
                                                     unsigned long long,
                                                     double);
template VitWeights<double> random_vit_weights<double>(const VitConfig&,
                                                       unsigned long long,
                                                       double);

// ---- safetensors ----------------------------------------------------------

namespace {

float half_to_float(std::uint16_t half) {
    const std::uint32_t sign = (half >> 15) & 1u;
    const std::uint32_t exp = (half >> 10) & 0x1fu;
    const std::uint32_t mant = half & 0x3ffu;
    std::uint32_t bits;
    if (exp == 0) {
        if (mant == 0) {
            bits = sign << 31;
        } else {
            // Subnormal half: renormalize.
            int e = -1;
            std::uint32_t m = mant;
            do {
                ++e;
                m <<= 1;
            } while ((m & 0x400u) == 0);
            bits = (sign << 31) | ((127 - 15 - e) << 23) |
                   ((m & 0x3ffu) << 13);
        }
    } else if (exp == 0x1f) {
        bits = (sign << 31) | 0x7f800000u | (mant << 13);
    } else {
        bits = (sign << 31) | ((exp - 15 + 127) << 23) | (mant << 13);
    }
    float out;
    std::memcpy(&out, &bits, sizeof(out));
    return out;
}

float bf16_to_float(std::uint16_t v) {
    const std::uint32_t bits = static_cast<std::uint32_t>(v) << 16;
    float out;
    std::memcpy(&out, &bits, sizeof(out));
    return out;
}

class SafetensorReader {
public:
    explicit SafetensorReader(const std::string& path)
        : path_(path), file_(path, std::ios::binary) {
        if (!file_)
            throw LoadError("cannot open weights file '" + path + "'");
        header_ = read_safetensors_header(path);
        std::uint64_t header_len = 0;
        file_.read(reinterpret_cast<char*>(&header_len), 8);
        data_start_ = 8 + header_len;
    }

    bool has(const std::string& name) const { return header_.count(name) > 0; }

    std::vector<float> tensor(const std::string& name,
                              const std::vector<long long>& want_shape) {
        auto it = header_.find(name);
        if (it == header_.end())
            throw LoadError("missing tensor '" + name + "' in " + path_);
        const SafetensorInfo& info = it->second;
        if (info.shape != want_shape) {
            std::string got = "[", want = "[";
            for (auto s : info.shape) got += std::to_string(s) + ",";
            for (auto s : want_shape) want += std::to_string(s) + ",";
            throw LoadError("tensor '" + name + "' has shape " + got +
                            "] but expected " + want + "]");
        }
        long long count = 1;
        for (auto s : info.shape) count *= s;

        const std::uint64_t nbytes = info.end - info.begin;
        std::vector<char> raw(nbytes);
        file_.seekg(static_cast<std::streamoff>(data_start_ + info.begin));
        file_.read(raw.data(), static_cast<std::streamsize>(nbytes));
        if (!file_)
            throw LoadError("short read for tensor '" + name + "' in " +
                            path_);

        std::vector<float> out(static_cast<std::size_t>(count));
        if (info.dtype == "F32") {
            if (nbytes != static_cast<std::uint64_t>(count) * 4)
                throw LoadError("tensor '" + name + "' byte-count mismatch");
            std::memcpy(out.data(), raw.data(), nbytes);
        } else if (info.dtype == "F16" || info.dtype == "BF16") {
            if (nbytes != static_cast<std::uint64_t>(count) * 2)
                throw LoadError("tensor '" + name + "' byte-count mismatch");
            const auto* u16 = reinterpret_cast<const std::uint16_t*>(raw.data());
            for (long long i = 0; i < count; ++i)
                out[static_cast<std::size_t>(i)] = info.dtype == "F16"
                                                       ? half_to_float(u16[i])
                                                       : bf16_to_float(u16[i]);
        } else {
            throw LoadError("tensor '" + name + "' has unsupported dtype " +
                            info.dtype);
        }
        return out;
    }

    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
    matrix(const std::string& name, long long rows, long long cols) {
        const std::vector<float> v = tensor(name, {rows, cols});
        Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
            m(rows, cols);
        std::memcpy(m.data(), v.data(), v.size() * sizeof(float));
        return m;
    }

    Eigen::VectorXf vector(const std::string& name, long long n) {
        const std::vector<float> v = tensor(name, {n});
        Eigen::VectorXf out(n);
        std::memcpy(out.data(), v.data(), v.size() * sizeof(float));
        return out;
    }

private:
    std::string path_;
    std::ifstream file_;
    std::map<std::string, SafetensorInfo> header_;
    std::uint64_t data_start_ = 0;
};

}  // namespace

std::vector<float> read_safetensors_tensor(
    const std::string& path, const std::string& name,
    const std::vector<long long>& shape) {
    SafetensorReader r(path);
    return r.tensor(name, shape);
}

std::map<std::string, SafetensorInfo> read_safetensors_header(
    const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw LoadError("cannot open weights file '" + path + "'");
    std::uint64_t header_len = 0;
    f.read(reinterpret_cast<char*>(&header_len), 8);
    if (!f || header_len == 0 || header_len > (1ull << 31))
        throw LoadError("'" + path + "' is not a safetensors file");
    std::string header(header_len, '\0');
    f.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!f) throw LoadError("truncated safetensors header in '" + path + "'");

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("bad safetensors header in '" + path +
                        "': " + e.what());
    }

    std::map<std::string, SafetensorInfo> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "__metadata__") continue;
        SafetensorInfo info;
        info.dtype = it.value().at("dtype").get<std::string>();
        info.shape = it.value().at("shape").get<std::vector<long long>>();
        auto off = it.value().at("data_offsets");
        info.begin = off.at(0).get<unsigned long long>();
        info.end = off.at(1).get<unsigned long long>();
        out.emplace(it.key(), std::move(info));
    }
    return out;
}

namespace {

std::string layer_prefix(int i) {
    return "vision_model.encoder.layers." + std::to_string(i) + ".";
}

std::vector<std::string> expected_tensor_names(const VitConfig& cfg) {
    std::vector<std::string> names = {
        "vision_model.embeddings.class_embedding",
        "vision_model.embeddings.patch_embedding.weight",
        "vision_model.embeddings.position_embedding.weight",
        "vision_model.pre_layrnorm.weight",
        "vision_model.pre_layrnorm.bias",
        "vision_model.post_layernorm.weight",
        "vision_model.post_layernorm.bias",
        "visual_projection.weight",
    };
    for (int i = 0; i < cfg.layers; ++i) {
        const std::string p = layer_prefix(i);
        for (const char* s :
             {"layer_norm1.weight", "layer_norm1.bias", "layer_norm2.weight",
              "layer_norm2.bias", "self_attn.q_proj.weight",
              "self_attn.q_proj.bias", "self_attn.k_proj.weight",
              "self_attn.k_proj.bias", "self_attn.v_proj.weight",
              "self_attn.v_proj.bias", "self_attn.out_proj.weight",
              "self_attn.out_proj.bias", "mlp.fc1.weight", "mlp.fc1.bias",
              "mlp.fc2.weight", "mlp.fc2.bias"})
            names.push_back(p + s);
    }
    return names;
}

}  // namespace

VitWeights<float> load_clip_vision_weights(const std::string& path,
                                           const VitConfig& cfg) {
    SafetensorReader r(path);

    // Some exports spell the embedding layernorm "pre_layernorm".
    const std::string pre_ln = r.has("vision_model.pre_layrnorm.weight")
                                   ? "vision_model.pre_layrnorm."
                                   : "vision_model.pre_layernorm.";

    std::vector<std::string> missing;
    for (auto name : expected_tensor_names(cfg)) {
        if (name.rfind("vision_model.pre_layrnorm.", 0) == 0)
            name = pre_ln + name.substr(name.rfind('.') + 1);
        if (!r.has(name)) missing.push_back(name);
    }
    if (!missing.empty()) {
        std::string msg = "weights file '" + path + "' is missing " +
                          std::to_string(missing.size()) + " tensors:";
        for (std::size_t i = 0; i < missing.size() && i < 8; ++i)
            msg += " " + missing[i];
        if (missing.size() > 8) msg += " ...";
        throw LoadError(msg);
    }

    const long long h = cfg.hidden;
    VitWeights<float> w;
    {
        // Conv-style [hidden, 3, P, P]; row-major flattening matches the
        // (c, py, px) patch layout.
        const std::vector<float> v =
            r.tensor("vision_model.embeddings.patch_embedding.weight",
                     {h, 3, cfg.patch_size, cfg.patch_size});
        w.patch.resize(h, cfg.patch_dim());
        std::memcpy(w.patch.data(), v.data(), v.size() * sizeof(float));
    }
    w.class_embedding =
        r.vector("vision_model.embeddings.class_embedding", h);
    w.position = r.matrix("vision_model.embeddings.position_embedding.weight",
                          cfg.tokens(), h);
    w.pre_ln_w = r.vector(pre_ln + "weight", h);
    w.pre_ln_b = r.vector(pre_ln + "bias", h);
    w.blocks.resize(cfg.layers);
    for (int i = 0; i < cfg.layers; ++i) {
        const std::string p = layer_prefix(i);
        auto& b = w.blocks[i];
        b.ln1_w = r.vector(p + "layer_norm1.weight", h);
        b.ln1_b = r.vector(p + "layer_norm1.bias", h);
        b.ln2_w = r.vector(p + "layer_norm2.weight", h);
        b.ln2_b = r.vector(p + "layer_norm2.bias", h);
        b.wq = r.matrix(p + "self_attn.q_proj.weight", h, h);
        b.bq = r.vector(p + "self_attn.q_proj.bias", h);
        b.wk = r.matrix(p + "self_attn.k_proj.weight", h, h);
        b.bk = r.vector(p + "self_attn.k_proj.bias", h);
        b.wv = r.matrix(p + "self_attn.v_proj.weight", h, h);
        b.bv = r.vector(p + "self_attn.v_proj.bias", h);
        b.wo = r.matrix(p + "self_attn.out_proj.weight", h, h);
        b.bo = r.vector(p + "self_attn.out_proj.bias", h);
        b.fc1 = r.matrix(p + "mlp.fc1.weight", cfg.mlp_dim, h);
        b.fc1_b = r.vector(p + "mlp.fc1.bias", cfg.mlp_dim);
        b.fc2 = r.matrix(p + "mlp.fc2.weight", h, cfg.mlp_dim);
        b.fc2_b = r.vector(p + "mlp.fc2.bias", h);
    }
    w.post_ln_w = r.vector("vision_model.post_layernorm.weight", h);
    w.post_ln_b = r.vector("vision_model.post_layernorm.bias", h);
    w.proj = r.matrix("visual_projection.weight", cfg.projection_dim, h);
    return w;
}

void save_clip_vision_weights(const std::string& path, const VitConfig& cfg,
                              const VitWeights<float>& w) {
    struct Entry {
        std::string name;
        std::vector<long long> shape;
        const float* data;
        long long count;
    };
    std::vector<Entry> entries;
    auto add_mat = [&](const std::string& name, const auto& m,
                       std::vector<long long> shape) {
        entries.push_back({name, std::move(shape), m.data(), m.size()});
    };

    add_mat("vision_model.embeddings.class_embedding", w.class_embedding,
            {cfg.hidden});
    add_mat("vision_model.embeddings.patch_embedding.weight", w.patch,
            {cfg.hidden, 3, cfg.patch_size, cfg.patch_size});
    add_mat("vision_model.embeddings.position_embedding.weight", w.position,
            {cfg.tokens(), cfg.hidden});
    add_mat("vision_model.pre_layrnorm.weight", w.pre_ln_w, {cfg.hidden});
    add_mat("vision_model.pre_layrnorm.bias", w.pre_ln_b, {cfg.hidden});
    for (int i = 0; i < cfg.layers; ++i) {
        const std::string p = layer_prefix(i);
        const auto& b = w.blocks[i];
        add_mat(p + "layer_norm1.weight", b.ln1_w, {cfg.hidden});
        add_mat(p + "layer_norm1.bias", b.ln1_b, {cfg.hidden});
        add_mat(p + "self_attn.q_proj.weight", b.wq, {cfg.hidden, cfg.hidden});
        add_mat(p + "self_attn.q_proj.bias", b.bq, {cfg.hidden});
        add_mat(p + "self_attn.k_proj.weight", b.wk, {cfg.hidden, cfg.hidden});
        add_mat(p + "self_attn.k_proj.bias", b.bk, {cfg.hidden});
        add_mat(p + "self_attn.v_proj.weight", b.wv, {cfg.hidden, cfg.hidden});
        add_mat(p + "self_attn.v_proj.bias", b.bv, {cfg.hidden});
        add_mat(p + "self_attn.out_proj.weight", b.wo,
                {cfg.hidden, cfg.hidden});
        add_mat(p + "self_attn.out_proj.bias", b.bo, {cfg.hidden});
        add_mat(p + "layer_norm2.weight", b.ln2_w, {cfg.hidden});
        add_mat(p + "layer_norm2.bias", b.ln2_b, {cfg.hidden});
        add_mat(p + "mlp.fc1.weight", b.fc1, {cfg.mlp_dim, cfg.hidden});
        add_mat(p + "mlp.fc1.bias", b.fc1_b, {cfg.mlp_dim});
        add_mat(p + "mlp.fc2.weight", b.fc2, {cfg.hidden, cfg.mlp_dim});
        add_mat(p + "mlp.fc2.bias", b.fc2_b, {cfg.hidden});
    }
    add_mat("vision_model.post_layernorm.weight", w.post_ln_w, {cfg.hidden});
    add_mat("vision_model.post_layernorm.bias", w.post_ln_b, {cfg.hidden});
    add_mat("visual_projection.weight", w.proj,
            {cfg.projection_dim, cfg.hidden});

    nlohmann::json header;
    unsigned long long offset = 0;
    for (const auto& e : entries) {
        const unsigned long long bytes =
            static_cast<unsigned long long>(e.count) * 4;
        header[e.name] = {{"dtype", "F32"},
                          {"shape", e.shape},
                          {"data_offsets", {offset, offset + bytes}}};
        offset += bytes;
    }
    const std::string hs = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write weights file '" + path + "'");
    const std::uint64_t hlen = hs.size();
    f.write(reinterpret_cast<const char*>(&hlen), 8);
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& e : entries)
        f.write(reinterpret_cast<const char*>(e.data),
                static_cast<std::streamsize>(e.count) * 4);
    if (!f) throw IoError("short write to weights file '" + path + "'");
}

}  // namespace stylecloak
