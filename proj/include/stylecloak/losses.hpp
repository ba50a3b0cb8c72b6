#pragma once

#include <memory>
#include <string>

#include "stylecloak/encoder.hpp"
#include "stylecloak/image.hpp"

namespace stylecloak {

// All objective components for one evaluation point.
struct LossBreakdown {
    double destyle = 0.0;
    double homo = 0.0;
    double stru = 0.0;
    double per = 0.0;
    double total = 0.0;
    double lambda = 0.0;
};

// Destylization formulation. kSita is the cosine between adversarial and
// clean style distances; kA and kB are the ablation alternatives.
enum class DestyleMode { kSita, kA, kB };

DestyleMode destyle_mode_from_string(const std::string& s);
std::string to_string(DestyleMode m);

// Guard on style-distance norms before the cosine; below this the image is
// already content-like and protection is vacuous.
inline constexpr double kStyleNormGuard = 1e-8;

// D = embed(x) - embed(x_c), elementwise.
EmbeddingVector style_distance(const Encoder& enc, const ImageTensor& x,
                               const ImageTensor& x_c);

// kSita: Cos(D_adv, D_clean). kA: -||E(x_s)-E(x_adv)||_1.
// kB: -|Cos(E(x_s),E(x_c)) - Cos(E(x_adv),E(x_c))|.
double destylization_loss(const Encoder& enc, const ImageTensor& x_adv,
                          const ImageTensor& x_s, const ImageTensor& x_c,
                          DestyleMode mode = DestyleMode::kSita);

// L1 between homogeneous components; channel sums averaged over pixels.
double homogeneous_loss(const ImageTensor& x_adv, const ImageTensor& x_s);

// L1 between structural components minus the L1 between their luminances:
// brightness-only detail changes are discounted, chromatic ones are not.
// Non-negative with the shared reduction convention.
double structural_loss(const ImageTensor& x_adv, const ImageTensor& x_s);

// homogeneous_loss + structural_loss.
double perception_loss(const ImageTensor& x_adv, const ImageTensor& x_s);

// Full objective: total = lambda * destyle + per.
LossBreakdown total_loss(const Encoder& enc, const ImageTensor& x_adv,
                         const ImageTensor& x_s, const ImageTensor& x_c,
                         double lambda = 100.0,
                         DestyleMode mode = DestyleMode::kSita);

// Precomputed per-attack state: clean embeddings, clean style distance and
// clean wavelet components are fixed across iterations. Methods are const
// and safe to call concurrently.
class LossContext {
public:
    LossContext(std::shared_ptr<const Encoder> enc, const ImageTensor& x_s,
                const ImageTensor& x_c, double lambda, DestyleMode mode);

    const ImageTensor& style_image() const { return x_s_; }
    const ImageTensor& content_image() const { return x_c_; }
    double lambda() const { return lambda_; }
    DestyleMode mode() const { return mode_; }

    LossBreakdown evaluate(const ImageTensor& x_adv) const;

    // Destylization value; accumulates weight * d(destyle)/d(x_adv).
    double destyle_with_grad(const ImageTensor& x_adv, double weight,
                             ImageTensor& grad_accum) const;

    // Perception value split into parts; accumulates its gradient.
    void perception_with_grad(const ImageTensor& x_adv, double& homo,
                              double& stru, ImageTensor& grad_accum) const;

    // Convenience: full breakdown and d(total)/d(x_adv).
    LossBreakdown evaluate_with_grad(const ImageTensor& x_adv,
                                     ImageTensor& grad) const;

private:
    std::shared_ptr<const Encoder> enc_;
    ImageTensor x_s_, x_c_;
    double lambda_;
    DestyleMode mode_;

    EmbeddingVector e_s_, e_c_;
    std::vector<double> d_clean_;  // e_s - e_c
    double d_clean_norm_ = 0.0;
    double cos_s_c_ = 0.0;         // Cos(E(x_s), E(x_c)), for mode b
    ImageTensor homo_s_, stru_s_;
};

}  // namespace stylecloak
