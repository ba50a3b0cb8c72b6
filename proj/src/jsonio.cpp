#include "stylecloak/jsonio.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>

#include "stylecloak/rng.hpp"

namespace stylecloak {

namespace {

void append_escaped(std::string& out, const std::string& s) {
    out += '"';
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += static_cast<char>(c);
                }
        }
    }
    out += '"';
}

void dump_value(std::string& out, const ordered_json& j) {
    switch (j.type()) {
        case ordered_json::value_t::object: {
            out += '{';
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ',';
                first = false;
                append_escaped(out, it.key());
                out += ':';
                dump_value(out, it.value());
            }
            out += '}';
            break;
        }
        case ordered_json::value_t::array: {
            out += '[';
            bool first = true;
            for (const auto& v : j) {
                if (!first) out += ',';
                first = false;
                dump_value(out, v);
            }
            out += ']';
            break;
        }
        case ordered_json::value_t::string:
            append_escaped(out, j.get_ref<const std::string&>());
            break;
        case ordered_json::value_t::boolean:
            out += j.get<bool>() ? "true" : "false";
            break;
        case ordered_json::value_t::number_integer:
            out += std::to_string(j.get<std::int64_t>());
            break;
        case ordered_json::value_t::number_unsigned:
            out += std::to_string(j.get<std::uint64_t>());
            break;
        case ordered_json::value_t::number_float: {
            const double v = j.get<double>();
            if (!std::isfinite(v)) {
                out += "null";
                break;
            }
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.9g", v);
            out += buf;
            // Keep the token a JSON number even for integral values.
            if (std::string_view(buf).find_first_of(".eE") ==
                std::string_view::npos)
                out += ".0";
            break;
        }
        default:
            out += "null";
    }
}

}  // namespace

std::string dump_manifest_json(const ordered_json& j) {
    std::string out;
    dump_value(out, j);
    return out;
}

ordered_json to_json(const LossBreakdown& b) {
    ordered_json j;
    j["destyle"] = b.destyle;
    j["homo"] = b.homo;
    j["stru"] = b.stru;
    j["per"] = b.per;
    j["total"] = b.total;
    j["lambda"] = b.lambda;
    return j;
}

ordered_json to_json(const PerceptualReport& r) {
    ordered_json j;
    j["ssim"] = r.ssim;
    j["psnr_db"] = r.psnr_db;
    j["mae"] = r.mae;
    j["l2"] = r.l2;
    j["linf"] = r.linf;
    return j;
}

ordered_json to_json(const AttackConfig& cfg) {
    ordered_json j;
    j["lambda"] = cfg.lambda;
    j["steps"] = cfg.steps;
    j["lr"] = cfg.learning_rate;
    j["encoder"] = cfg.encoder_variant;
    j["destyle_mode"] = to_string(cfg.destyle_mode);
    j["constraint_mode"] = to_string(cfg.constraint_mode);
    j["budget_epsilon"] = cfg.budget_epsilon;
    j["budget_alpha"] = cfg.budget_alpha;
    j["budget_steps"] = cfg.budget_steps;
    j["l2_lr"] = cfg.l2_lr;
    j["blur_sigma"] = cfg.blur_sigma;
    j["seed"] = cfg.seed;
    return j;
}

ordered_json to_json(const DefenseSpec& spec) {
    ordered_json j;
    switch (spec.kind) {
        case DefenseSpec::Kind::kJpeg:
            j["kind"] = "jpeg";
            j["quality"] = spec.quality;
            break;
        case DefenseSpec::Kind::kGaussianBlur:
            j["kind"] = "blur";
            j["sigma"] = spec.sigma;
            break;
        case DefenseSpec::Kind::kGaussianNoise:
            j["kind"] = "noise";
            j["sigma"] = spec.sigma;
            j["seed"] = spec.seed;
            break;
        case DefenseSpec::Kind::kBitDepth:
            j["kind"] = "bits";
            j["bits"] = spec.bits;
            break;
    }
    return j;
}

ordered_json to_json(const RobustnessReport& rep) {
    ordered_json j;
    j["destyle_cos_clean"] = rep.destyle_cos_clean;
    ordered_json arr = ordered_json::array();
    for (const auto& d : rep.defenses) {
        ordered_json e = to_json(d.spec);
        e["destyle_cos_defended"] = d.destyle_cos_defended;
        e["perceptual"] = to_json(d.perceptual);
        arr.push_back(std::move(e));
    }
    j["defenses"] = std::move(arr);
    return j;
}

std::string config_digest(const AttackConfig& cfg) {
    const std::uint64_t h = fnv1a64(dump_manifest_json(to_json(cfg)));
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return buf;
}

std::string manifest_line(const BatchItemSummary& item,
                          const std::string& digest) {
    ordered_json j;
    j["input"] = item.input;
    if (item.ok) j["output"] = item.output;
    j["seed"] = item.seed;
    j["config_digest"] = digest;
    if (item.ok) {
        j["initial"] = to_json(item.initial);
        j["final"] = to_json(item.final_state);
        j["elapsed_s"] = item.elapsed_s;
    } else {
        j["error"] = item.error;
    }
    return dump_manifest_json(j);
}

AttackConfig attack_config_from_json(const ordered_json& j) {
    AttackConfig cfg;
    if (!j.is_object())
        throw InvalidParameterError("config: expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const auto& v = it.value();
        try {
            if (k == "lambda") cfg.lambda = v.get<double>();
            else if (k == "steps") cfg.steps = v.get<int>();
            else if (k == "lr") cfg.learning_rate = v.get<double>();
            else if (k == "encoder") cfg.encoder_variant = v.get<std::string>();
            else if (k == "destyle_mode")
                cfg.destyle_mode =
                    destyle_mode_from_string(v.get<std::string>());
            else if (k == "constraint_mode")
                cfg.constraint_mode =
                    constraint_mode_from_string(v.get<std::string>());
            else if (k == "budget_epsilon") cfg.budget_epsilon = v.get<double>();
            else if (k == "budget_alpha") cfg.budget_alpha = v.get<double>();
            else if (k == "budget_steps") cfg.budget_steps = v.get<int>();
            else if (k == "l2_lr") cfg.l2_lr = v.get<double>();
            else if (k == "blur_sigma") cfg.blur_sigma = v.get<double>();
            else if (k == "seed") cfg.seed = v.get<long long>();
            else
                throw InvalidParameterError("config: unknown key '" + k + "'");
        } catch (const nlohmann::json::exception&) {
            throw InvalidParameterError("config: bad value for key '" + k +
                                        "'");
        }
    }
    return cfg;
}

}  // namespace stylecloak
