#pragma once

#include <memory>
#include <string>
#include <vector>

#include "stylecloak/encoder.hpp"
#include "stylecloak/image.hpp"
#include "stylecloak/metrics.hpp"

namespace stylecloak {

// One preprocessing defense. Only the parameter required by the kind is
// meaningful; parse/format use a compact "kind:param[:seed]" syntax.
struct DefenseSpec {
    enum class Kind { kJpeg, kGaussianBlur, kGaussianNoise, kBitDepth };
    Kind kind = Kind::kJpeg;
    int quality = 75;      // jpeg, 1..100
    double sigma = 1.0;    // blur (> 0) or noise (>= 0) strength
    int bits = 5;          // bit depth, 1..8
    long long seed = 0;    // noise only

    void validate() const;
};

// Parses "jpeg:75", "blur:1.0", "noise:0.02[:seed]", "bits:5".
DefenseSpec parse_defense_spec(const std::string& text);
std::string to_string(const DefenseSpec& spec);

// Applies one defense to a pixel-valued image; the result stays in [0,1].
// jpeg is a real encode/decode round trip (8-bit, as the codec requires);
// bit depth quantizes to 2^bits levels with round-half-up.
ImageTensor apply_defense(const ImageTensor& img, const DefenseSpec& spec);

struct DefenseOutcome {
    DefenseSpec spec;
    PerceptualReport perceptual;       // defended adversarial vs clean
    double destyle_cos_defended = 0.0; // cosine recomputed after the defense
};

// Measurement record; carries no pass/fail judgment.
struct RobustnessReport {
    double destyle_cos_clean = 0.0;  // cosine of the undefended pair
    std::vector<DefenseOutcome> defenses;
};

// For each spec: defend x_adv, report perceptual metrics against x_s and
// the destylization cosine Cos(D(defended), D_clean).
RobustnessReport evaluate_robustness(const ImageTensor& x_s,
                                     const ImageTensor& x_adv,
                                     std::shared_ptr<const Encoder> enc,
                                     const std::vector<DefenseSpec>& specs,
                                     double blur_sigma = 3.0);

}  // namespace stylecloak
