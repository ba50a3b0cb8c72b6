#include "stylecloak/losses.hpp"

#include <cmath>

#include "stylecloak/imaging.hpp"
#include "stylecloak/wavelet.hpp"

namespace stylecloak {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::vector<double> diff(const std::vector<double>& a,
                         const std::vector<double>& b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na <= kStyleNormGuard || nb <= kStyleNormGuard)
        throw DegenerateStyleError(
            "cosine undefined: embedding-space vector norm below guard");
    return dot(a, b) / (na * nb);
}

// d/du Cos(u, v) for fixed v.
std::vector<double> cosine_grad_u(const std::vector<double>& u,
                                  const std::vector<double>& v) {
    const double nu = norm(u);
    const double nv = norm(v);
    const double c = dot(u, v) / (nu * nv);
    std::vector<double> g(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        g[i] = v[i] / (nu * nv) - c * u[i] / (nu * nu);
    return g;
}

}  // namespace

DestyleMode destyle_mode_from_string(const std::string& s) {
    if (s == "sita") return DestyleMode::kSita;
    if (s == "a") return DestyleMode::kA;
    if (s == "b") return DestyleMode::kB;
    throw InvalidParameterError("unknown destyle mode '" + s + "'");
}

std::string to_string(DestyleMode m) {
    switch (m) {
        case DestyleMode::kSita: return "sita";
        case DestyleMode::kA: return "a";
        case DestyleMode::kB: return "b";
    }
    return "sita";
}

EmbeddingVector style_distance(const Encoder& enc, const ImageTensor& x,
                               const ImageTensor& x_c) {
    EmbeddingVector ex = enc.embed(x);
    const EmbeddingVector ec = enc.embed(x_c);
    for (std::size_t i = 0; i < ex.values.size(); ++i)
        ex.values[i] -= ec.values[i];
    return ex;
}

double destylization_loss(const Encoder& enc, const ImageTensor& x_adv,
                          const ImageTensor& x_s, const ImageTensor& x_c,
                          DestyleMode mode) {
    const EmbeddingVector e_adv = enc.embed(x_adv);
    const EmbeddingVector e_s = enc.embed(x_s);
    switch (mode) {
        case DestyleMode::kSita: {
            const EmbeddingVector e_c = enc.embed(x_c);
            const std::vector<double> d_adv =
                diff(e_adv.values, e_c.values);
            const std::vector<double> d_clean = diff(e_s.values, e_c.values);
            if (norm(d_clean) <= kStyleNormGuard ||
                norm(d_adv) <= kStyleNormGuard)
                throw DegenerateStyleError(
                    "style distance norm below guard; image is already "
                    "content-like");
            return cosine(d_adv, d_clean);
        }
        case DestyleMode::kA: {
            double l1 = 0.0;
            for (std::size_t i = 0; i < e_s.values.size(); ++i)
                l1 += std::fabs(e_s.values[i] - e_adv.values[i]);
            return -l1;
        }
        case DestyleMode::kB: {
            const EmbeddingVector e_c = enc.embed(x_c);
            const double c_s = cosine(e_s.values, e_c.values);
            const double c_adv = cosine(e_adv.values, e_c.values);
            return -std::fabs(c_s - c_adv);
        }
    }
    throw InvalidParameterError("unhandled destyle mode");
}

double homogeneous_loss(const ImageTensor& x_adv, const ImageTensor& x_s) {
    require_same_shape(x_adv, x_s, "homogeneous_loss");
    const ImageTensor ha = homogeneous_component(x_adv);
    const ImageTensor hs = homogeneous_component(x_s);
    double sum = 0.0;
    for (std::size_t i = 0; i < ha.data.size(); ++i)
        sum += std::fabs(ha.data[i] - hs.data[i]);
    return sum / (static_cast<double>(x_adv.height) * x_adv.width);
}

double structural_loss(const ImageTensor& x_adv, const ImageTensor& x_s) {
    require_same_shape(x_adv, x_s, "structural_loss");
    if (x_adv.channels != 3)
        throw InvalidInputError("structural_loss: expected 3 channels");
    const ImageTensor sa = structural_component(x_adv);
    const ImageTensor ss = structural_component(x_s);

    ImageTensor ds(x_adv.height, x_adv.width, 3, true);
    for (std::size_t i = 0; i < ds.data.size(); ++i)
        ds.data[i] = sa.data[i] - ss.data[i];

    const ImageTensor gray_ds = to_grayscale(ds);
    double term1 = 0.0, term2 = 0.0;
    for (double v : ds.data) term1 += std::fabs(v);
    for (double v : gray_ds.data) term2 += std::fabs(v);
    const double n = static_cast<double>(x_adv.height) * x_adv.width;
    return (term1 - term2) / n;
}

double perception_loss(const ImageTensor& x_adv, const ImageTensor& x_s) {
    return homogeneous_loss(x_adv, x_s) + structural_loss(x_adv, x_s);
}

LossBreakdown total_loss(const Encoder& enc, const ImageTensor& x_adv,
                         const ImageTensor& x_s, const ImageTensor& x_c,
                         double lambda, DestyleMode mode) {
    if (lambda < 0.0)
        throw InvalidParameterError("total_loss: lambda must be >= 0");
    LossBreakdown b;
    b.lambda = lambda;
    b.destyle = destylization_loss(enc, x_adv, x_s, x_c, mode);
    b.homo = homogeneous_loss(x_adv, x_s);
    b.stru = structural_loss(x_adv, x_s);
    b.per = b.homo + b.stru;
    b.total = lambda * b.destyle + b.per;
    return b;
}

// ---- LossContext -----------------------------------------------------------

LossContext::LossContext(std::shared_ptr<const Encoder> enc,
                         const ImageTensor& x_s, const ImageTensor& x_c,
                         double lambda, DestyleMode mode)
    : enc_(std::move(enc)), x_s_(x_s), x_c_(x_c), lambda_(lambda),
      mode_(mode) {
    if (lambda < 0.0)
        throw InvalidParameterError("LossContext: lambda must be >= 0");
    e_s_ = enc_->embed(x_s_);
    e_c_ = enc_->embed(x_c_);
    d_clean_ = diff(e_s_.values, e_c_.values);
    d_clean_norm_ = norm(d_clean_);
    if (mode_ == DestyleMode::kSita && d_clean_norm_ <= kStyleNormGuard)
        throw DegenerateStyleError(
            "clean style distance norm below guard; image is already "
            "content-like");
    if (mode_ == DestyleMode::kB) cos_s_c_ = cosine(e_s_.values, e_c_.values);
    homo_s_ = homogeneous_component(x_s_);
    stru_s_ = structural_component(x_s_);
}

double LossContext::destyle_with_grad(const ImageTensor& x_adv, double weight,
                                      ImageTensor& grad_accum) const {
    std::unique_ptr<EmbedTape> tape;
    const EmbeddingVector e_adv = enc_->embed(x_adv, &tape);

    double value = 0.0;
    std::vector<double> cot(e_adv.values.size(), 0.0);
    switch (mode_) {
        case DestyleMode::kSita: {
            const std::vector<double> d_adv =
                diff(e_adv.values, e_c_.values);
            if (norm(d_adv) <= kStyleNormGuard)
                throw DegenerateStyleError(
                    "adversarial style distance collapsed below guard");
            value = cosine(d_adv, d_clean_);
            cot = cosine_grad_u(d_adv, d_clean_);
            break;
        }
        case DestyleMode::kA: {
            double l1 = 0.0;
            for (std::size_t i = 0; i < e_adv.values.size(); ++i) {
                const double d = e_s_.values[i] - e_adv.values[i];
                l1 += std::fabs(d);
                cot[i] = sgn(d);
            }
            value = -l1;
            break;
        }
        case DestyleMode::kB: {
            const double c_adv = cosine(e_adv.values, e_c_.values);
            value = -std::fabs(cos_s_c_ - c_adv);
            const double outer = sgn(cos_s_c_ - c_adv);
            cot = cosine_grad_u(e_adv.values, e_c_.values);
            for (double& v : cot) v *= outer;
            break;
        }
    }

    if (weight != 0.0) {
        for (double& v : cot) v *= weight;
        const ImageTensor g = enc_->embed_vjp(*tape, cot);
        for (std::size_t i = 0; i < grad_accum.data.size(); ++i)
            grad_accum.data[i] += g.data[i];
    }
    return value;
}

void LossContext::perception_with_grad(const ImageTensor& x_adv, double& homo,
                                       double& stru,
                                       ImageTensor& grad_accum) const {
    require_same_shape(x_adv, x_s_, "perception loss");
    const double n = static_cast<double>(x_adv.height) * x_adv.width;

    const ImageTensor homo_adv = homogeneous_component(x_adv);
    ImageTensor dh(x_adv.height, x_adv.width, x_adv.channels, true);
    homo = 0.0;
    for (std::size_t i = 0; i < dh.data.size(); ++i) {
        const double d = homo_adv.data[i] - homo_s_.data[i];
        homo += std::fabs(d);
        dh.data[i] = sgn(d) / n;
    }
    homo /= n;

    ImageTensor ds(x_adv.height, x_adv.width, x_adv.channels, true);
    for (std::size_t i = 0; i < ds.data.size(); ++i)
        ds.data[i] = (x_adv.data[i] - homo_adv.data[i]) - stru_s_.data[i];

    const ImageTensor gray_ds = to_grayscale(ds);
    double term1 = 0.0, term2 = 0.0;
    ImageTensor dterm(x_adv.height, x_adv.width, x_adv.channels, true);
    for (std::size_t i = 0; i < ds.data.size(); ++i) {
        term1 += std::fabs(ds.data[i]);
        dterm.data[i] = sgn(ds.data[i]) / n;
    }
    {
        ImageTensor gsign(x_adv.height, x_adv.width, 1, true);
        for (std::size_t i = 0; i < gray_ds.data.size(); ++i) {
            term2 += std::fabs(gray_ds.data[i]);
            gsign.data[i] = sgn(gray_ds.data[i]) / n;
        }
        const ImageTensor gback = grayscale_vjp(gsign);
        for (std::size_t i = 0; i < dterm.data.size(); ++i)
            dterm.data[i] -= gback.data[i];
    }
    stru = (term1 - term2) / n;

    // d(per)/dx = F_homo^T(dh) + F_stru^T(dterm); both components are
    // self-adjoint, and F_stru = I - F_homo.
    const ImageTensor homo_of_dh = homogeneous_component(dh);
    const ImageTensor homo_of_dterm = homogeneous_component(dterm);
    for (std::size_t i = 0; i < grad_accum.data.size(); ++i)
        grad_accum.data[i] += homo_of_dh.data[i] + dterm.data[i] -
                              homo_of_dterm.data[i];
}

LossBreakdown LossContext::evaluate_with_grad(const ImageTensor& x_adv,
                                              ImageTensor& grad) const {
    grad = ImageTensor(x_adv.height, x_adv.width, x_adv.channels, true);
    LossBreakdown b;
    b.lambda = lambda_;
    b.destyle = destyle_with_grad(x_adv, lambda_, grad);
    perception_with_grad(x_adv, b.homo, b.stru, grad);
    b.per = b.homo + b.stru;
    b.total = lambda_ * b.destyle + b.per;
    return b;
}

LossBreakdown LossContext::evaluate(const ImageTensor& x_adv) const {
    LossBreakdown b;
    b.lambda = lambda_;

    const EmbeddingVector e_adv = enc_->embed(x_adv);
    switch (mode_) {
        case DestyleMode::kSita: {
            const std::vector<double> d_adv =
                diff(e_adv.values, e_c_.values);
            if (norm(d_adv) <= kStyleNormGuard)
                throw DegenerateStyleError(
                    "adversarial style distance collapsed below guard");
            b.destyle = cosine(d_adv, d_clean_);
            break;
        }
        case DestyleMode::kA: {
            double l1 = 0.0;
            for (std::size_t i = 0; i < e_adv.values.size(); ++i)
                l1 += std::fabs(e_s_.values[i] - e_adv.values[i]);
            b.destyle = -l1;
            break;
        }
        case DestyleMode::kB: {
            b.destyle =
                -std::fabs(cos_s_c_ - cosine(e_adv.values, e_c_.values));
            break;
        }
    }

    b.homo = homogeneous_loss(x_adv, x_s_);
    b.stru = structural_loss(x_adv, x_s_);
    b.per = b.homo + b.stru;
    b.total = lambda_ * b.destyle + b.per;
    return b;
}

}  // namespace stylecloak
