#include "stylecloak/defense.hpp"

#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "stylecloak/imaging.hpp"
#include "stylecloak/losses.hpp"
#include "stylecloak/rng.hpp"

namespace stylecloak {

void DefenseSpec::validate() const {
    switch (kind) {
        case Kind::kJpeg:
            if (quality < 1 || quality > 100)
                throw InvalidParameterError(
                    "defense: jpeg quality must be in 1..100");
            break;
        case Kind::kGaussianBlur:
            if (!(sigma > 0.0))
                throw InvalidParameterError(
                    "defense: blur sigma must be > 0");
            break;
        case Kind::kGaussianNoise:
            if (!(sigma >= 0.0))
                throw InvalidParameterError(
                    "defense: noise sigma must be >= 0");
            break;
        case Kind::kBitDepth:
            if (bits < 1 || bits > 8)
                throw InvalidParameterError(
                    "defense: bit depth must be in 1..8");
            break;
    }
}

DefenseSpec parse_defense_spec(const std::string& text) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : text) {
        if (ch == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(cur);
    if (parts.empty() || parts[0].empty())
        throw InvalidParameterError("defense: empty spec");

    DefenseSpec s;
    try {
        if (parts[0] == "jpeg") {
            s.kind = DefenseSpec::Kind::kJpeg;
            if (parts.size() > 1) s.quality = std::stoi(parts[1]);
        } else if (parts[0] == "blur") {
            s.kind = DefenseSpec::Kind::kGaussianBlur;
            if (parts.size() > 1) s.sigma = std::stod(parts[1]);
        } else if (parts[0] == "noise") {
            s.kind = DefenseSpec::Kind::kGaussianNoise;
            s.sigma = 0.02;
            if (parts.size() > 1) s.sigma = std::stod(parts[1]);
            if (parts.size() > 2) s.seed = std::stoll(parts[2]);
        } else if (parts[0] == "bits") {
            s.kind = DefenseSpec::Kind::kBitDepth;
            if (parts.size() > 1) s.bits = std::stoi(parts[1]);
        } else {
            throw InvalidParameterError("defense: unknown kind '" + parts[0] +
                                        "'");
        }
    } catch (const std::invalid_argument&) {
        throw InvalidParameterError("defense: bad parameter in '" + text +
                                    "'");
    } catch (const std::out_of_range&) {
        throw InvalidParameterError("defense: parameter out of range in '" +
                                    text + "'");
    }
    s.validate();
    return s;
}

std::string to_string(const DefenseSpec& spec) {
    switch (spec.kind) {
        case DefenseSpec::Kind::kJpeg:
            return "jpeg:" + std::to_string(spec.quality);
        case DefenseSpec::Kind::kGaussianBlur: {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "blur:%g", spec.sigma);
            return buf;
        }
        case DefenseSpec::Kind::kGaussianNoise: {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "noise:%g:%lld", spec.sigma,
                          spec.seed);
            return buf;
        }
        case DefenseSpec::Kind::kBitDepth:
            return "bits:" + std::to_string(spec.bits);
    }
    return "?";
}

namespace {

ImageTensor jpeg_roundtrip(const ImageTensor& img, int quality) {
    cv::Mat bgr(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            uchar* p = bgr.ptr<uchar>(y) + static_cast<size_t>(x) * 3;
            for (int c = 0; c < 3; ++c) {
                double q = std::floor(img.at(y, x, c) * 255.0 + 0.5);
                q = std::min(std::max(q, 0.0), 255.0);
                p[2 - c] = static_cast<uchar>(q);
            }
        }
    std::vector<uchar> buf;
    if (!cv::imencode(".jpg", bgr, buf,
                      {cv::IMWRITE_JPEG_QUALITY, quality}))
        throw IoError("defense: jpeg encode failed");
    cv::Mat back = cv::imdecode(buf, cv::IMREAD_COLOR);
    if (back.empty()) throw IoError("defense: jpeg decode failed");

    ImageTensor out(back.rows, back.cols, 3);
    for (int y = 0; y < back.rows; ++y)
        for (int x = 0; x < back.cols; ++x) {
            const uchar* p = back.ptr<uchar>(y) + static_cast<size_t>(x) * 3;
            out.at(y, x, 0) = p[2] / 255.0;
            out.at(y, x, 1) = p[1] / 255.0;
            out.at(y, x, 2) = p[0] / 255.0;
        }
    return out;
}

}  // namespace

ImageTensor apply_defense(const ImageTensor& img, const DefenseSpec& spec) {
    spec.validate();
    if (img.is_signed)
        throw InvalidInputError("apply_defense: expected pixel-valued input");

    switch (spec.kind) {
        case DefenseSpec::Kind::kJpeg:
            return jpeg_roundtrip(img, spec.quality);
        case DefenseSpec::Kind::kGaussianBlur:
            return gaussian_blur(img, spec.sigma);
        case DefenseSpec::Kind::kGaussianNoise: {
            if (spec.sigma == 0.0) return img;
            ImageTensor out = img;
            Lcg64 rng(static_cast<unsigned long long>(spec.seed));
            for (double& v : out.data) {
                v += spec.sigma * rng.next_gaussian();
                if (v < 0.0) v = 0.0;
                if (v > 1.0) v = 1.0;
            }
            return out;
        }
        case DefenseSpec::Kind::kBitDepth: {
            const double levels = std::pow(2.0, spec.bits) - 1.0;
            ImageTensor out = img;
            for (double& v : out.data) {
                v = std::floor(v * levels + 0.5) / levels;
                if (v < 0.0) v = 0.0;
                if (v > 1.0) v = 1.0;
            }
            return out;
        }
    }
    throw InvalidParameterError("apply_defense: unhandled kind");
}

RobustnessReport evaluate_robustness(const ImageTensor& x_s,
                                     const ImageTensor& x_adv,
                                     std::shared_ptr<const Encoder> enc,
                                     const std::vector<DefenseSpec>& specs,
                                     double blur_sigma) {
    require_same_shape(x_s, x_adv, "evaluate_robustness");
    if (!enc) throw InvalidParameterError("evaluate_robustness: null encoder");

    const ImageTensor x_c = extract_content(x_s, blur_sigma);
    const LossContext ctx(enc, x_s, x_c, 0.0, DestyleMode::kSita);

    RobustnessReport rep;
    rep.destyle_cos_clean = ctx.evaluate(x_adv).destyle;
    rep.defenses.reserve(specs.size());
    for (const DefenseSpec& spec : specs) {
        DefenseOutcome outcome;
        outcome.spec = spec;
        const ImageTensor defended = apply_defense(x_adv, spec);
        outcome.perceptual = report(defended, x_s);
        outcome.destyle_cos_defended = ctx.evaluate(defended).destyle;
        rep.defenses.push_back(std::move(outcome));
    }
    return rep;
}

}  // namespace stylecloak
