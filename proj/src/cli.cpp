#include "stylecloak/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "stylecloak/attack.hpp"
#include "stylecloak/defense.hpp"
#include "stylecloak/imaging.hpp"
#include "stylecloak/jsonio.hpp"
#include "stylecloak/metrics.hpp"
#include "stylecloak/wavelet.hpp"

namespace fs = std::filesystem;

namespace stylecloak {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitPartial = 2;

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

// A file is returned as-is; a directory is scanned for rasters in sorted
// order so batches are reproducible.
std::vector<std::string> collect_inputs(const std::string& in) {
    if (!fs::exists(in))
        throw InvalidParameterError("input path '" + in + "' does not exist");
    std::vector<std::string> files;
    if (fs::is_directory(in)) {
        for (const auto& e : fs::directory_iterator(in))
            if (e.is_regular_file() && has_image_extension(e.path()))
                files.push_back(e.path().string());
        std::sort(files.begin(), files.end());
        if (files.empty())
            throw InvalidParameterError("no PNG/JPEG files in '" + in + "'");
    } else {
        files.push_back(in);
    }
    return files;
}

// Values shared by the attack-driving subcommands; resolved with the
// precedence flags > config file > defaults.
struct RunConfig {
    AttackConfig attack;
    std::string in, out;
    int jobs = 1;
    int bit_depth = 16;
    std::vector<std::string> defense_texts;
};

RunConfig run_config_from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw InvalidParameterError("cannot read config file '" + path + "'");
    ordered_json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidParameterError("config file '" + path +
                                    "' is not valid JSON: " + e.what());
    }
    if (!j.is_object())
        throw InvalidParameterError("config file must hold a JSON object");

    RunConfig rc;
    ordered_json attack_keys = ordered_json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const auto& v = it.value();
        try {
            if (k == "in") rc.in = v.get<std::string>();
            else if (k == "out") rc.out = v.get<std::string>();
            else if (k == "jobs") rc.jobs = v.get<int>();
            else if (k == "bit_depth") rc.bit_depth = v.get<int>();
            else if (k == "defenses") {
                if (v.is_string()) {
                    std::stringstream ss(v.get<std::string>());
                    std::string tok;
                    while (std::getline(ss, tok, ','))
                        if (!tok.empty()) rc.defense_texts.push_back(tok);
                } else if (v.is_array()) {
                    for (const auto& d : v)
                        rc.defense_texts.push_back(d.get<std::string>());
                } else {
                    throw InvalidParameterError(
                        "config: 'defenses' must be a string or array");
                }
            } else {
                attack_keys[k] = v;  // delegated; unknown keys rejected there
            }
        } catch (const nlohmann::json::exception&) {
            throw InvalidParameterError("config: bad value for key '" + k +
                                        "'");
        }
    }
    rc.attack = attack_config_from_json(attack_keys);
    return rc;
}

// CLI option set mirroring RunConfig; only options the user actually set
// override the config file.
struct AttackFlags {
    std::string config_path, in, out, models;
    double lambda = 100.0, lr = 0.005, blur_sigma = 3.0;
    int steps = 50, jobs = 1, bit_depth = 16, budget_steps = 40;
    double budget_epsilon = 0.015, budget_alpha = 0.002, l2_lr = 0.002;
    long long seed = 0;
    std::string encoder = "vit-large", destyle_mode = "sita",
                constraint_mode = "sita";
    std::vector<std::string> defenses;

    void add_to(CLI::App& cmd, bool with_batch_flags) {
        cmd.add_option("--config", config_path,
                       "JSON config file (flags take precedence)");
        cmd.add_option("--lambda", lambda, "destylization weight");
        cmd.add_option("--steps", steps, "optimization steps");
        cmd.add_option("--lr", lr, "learning rate");
        cmd.add_option("--encoder", encoder,
                       "encoder variant: vit-large|vit-huge|vit-base|toy");
        cmd.add_option("--seed", seed, "base seed (items use seed+index)");
        cmd.add_option("--constraint-mode", constraint_mode,
                       "sita|budget|l2");
        cmd.add_option("--destyle-mode", destyle_mode, "sita|a|b");
        cmd.add_option("--blur-sigma", blur_sigma,
                       "content extraction blur strength");
        cmd.add_option("--budget-epsilon", budget_epsilon,
                       "budget mode L-inf radius");
        cmd.add_option("--budget-alpha", budget_alpha,
                       "budget mode step size");
        cmd.add_option("--budget-steps", budget_steps, "budget mode steps");
        cmd.add_option("--l2-lr", l2_lr, "l2 mode learning rate");
        cmd.add_option("--models", models,
                       "encoder weights dir (default $STYLE_CLOAK_MODELS)");
        if (with_batch_flags) {
            cmd.add_option("--jobs", jobs, "parallel images");
            cmd.add_option("--bit-depth", bit_depth, "output PNG depth 8|16");
        }
    }

    RunConfig resolve(const CLI::App& cmd) const {
        RunConfig rc;
        auto set = [&](const char* flag) {
            const CLI::Option* o = cmd.get_option_no_throw(flag);
            return o && o->count() > 0;
        };
        if (set("--config")) rc = run_config_from_file(config_path);

        if (set("--in") || rc.in.empty()) rc.in = in;
        if (set("--out") || rc.out.empty()) rc.out = out;
        if (set("--lambda")) rc.attack.lambda = lambda;
        if (set("--steps")) rc.attack.steps = steps;
        if (set("--lr")) rc.attack.learning_rate = lr;
        if (set("--encoder")) rc.attack.encoder_variant = encoder;
        if (set("--seed")) rc.attack.seed = seed;
        if (set("--constraint-mode"))
            rc.attack.constraint_mode =
                constraint_mode_from_string(constraint_mode);
        if (set("--destyle-mode"))
            rc.attack.destyle_mode = destyle_mode_from_string(destyle_mode);
        if (set("--blur-sigma")) rc.attack.blur_sigma = blur_sigma;
        if (set("--budget-epsilon")) rc.attack.budget_epsilon = budget_epsilon;
        if (set("--budget-alpha")) rc.attack.budget_alpha = budget_alpha;
        if (set("--budget-steps")) rc.attack.budget_steps = budget_steps;
        if (set("--l2-lr")) rc.attack.l2_lr = l2_lr;
        if (set("--jobs")) rc.jobs = jobs;
        if (set("--bit-depth")) rc.bit_depth = bit_depth;
        for (const auto& d : defenses) rc.defense_texts.push_back(d);
        rc.attack.validate();
        if (rc.bit_depth != 8 && rc.bit_depth != 16)
            throw InvalidParameterError("bit depth must be 8 or 16");
        if (rc.jobs < 1)
            throw InvalidParameterError("jobs must be >= 1");
        return rc;
    }
};

int write_lines(const std::string& path, const std::vector<std::string>& lines,
                bool to_stdout_if_empty = false) {
    if (path.empty()) {
        if (to_stdout_if_empty)
            for (const auto& l : lines) std::cout << l << "\n";
        return kExitOk;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path + "'");
    for (const auto& l : lines) f << l << "\n";
    return kExitOk;
}

// ---- protect ---------------------------------------------------------------

int cmd_protect(const RunConfig& rc, const std::string& models_dir) {
    if (rc.in.empty() || rc.out.empty())
        throw InvalidParameterError("protect needs --in and --out");
    const std::vector<std::string> inputs = collect_inputs(rc.in);
    const auto enc = load_encoder(rc.attack.encoder_variant, models_dir);

    BatchOptions opts;
    opts.jobs = rc.jobs;
    opts.bit_depth = rc.bit_depth;
    const auto items = protect_batch(inputs, rc.attack, rc.out, enc, opts);

    const std::string digest = config_digest(rc.attack);
    std::vector<std::string> lines;
    lines.reserve(items.size());
    bool any_failed = false;
    for (const auto& item : items) {
        lines.push_back(manifest_line(item, digest));
        if (!item.ok) {
            any_failed = true;
            std::cerr << "protect: " << item.input << ": " << item.error
                      << "\n";
        }
    }
    write_lines((fs::path(rc.out) / "manifest.jsonl").string(), lines);
    return any_failed ? kExitPartial : kExitOk;
}

// ---- report ----------------------------------------------------------------

std::map<std::string, std::string> stem_map(
    const std::vector<std::string>& files) {
    std::map<std::string, std::string> m;
    for (const auto& f : files) m[fs::path(f).stem().string()] = f;
    return m;
}

int cmd_report(const std::string& clean_in, const std::string& protected_in,
               const std::string& out_path, int size) {
    const auto clean = stem_map(collect_inputs(clean_in));
    const auto prot = stem_map(collect_inputs(protected_in));

    std::vector<std::string> orphans;
    for (const auto& [stem, path] : clean)
        if (!prot.count(stem)) orphans.push_back(path);
    for (const auto& [stem, path] : prot)
        if (!clean.count(stem)) orphans.push_back(path);
    if (!orphans.empty()) {
        std::cerr << "report: unpaired files:\n";
        for (const auto& o : orphans) std::cerr << "  " << o << "\n";
        return kExitUsage;
    }

    std::vector<std::string> lines;
    PerceptualReport mean;
    int count = 0;
    for (const auto& [stem, clean_path] : clean) {
        const ImageTensor a = load_image(clean_path, size);
        const ImageTensor b = load_image(prot.at(stem), size);
        if (!a.same_shape(b)) {
            std::cerr << "report: size mismatch for '" << stem << "'\n";
            return kExitUsage;
        }
        const PerceptualReport r = report(a, b);
        ordered_json j;
        j["clean"] = clean_path;
        j["protected"] = prot.at(stem);
        j["ssim"] = r.ssim;
        j["psnr_db"] = r.psnr_db;
        j["mae"] = r.mae;
        j["l2"] = r.l2;
        j["linf"] = r.linf;
        lines.push_back(dump_manifest_json(j));
        mean.ssim += r.ssim;
        mean.psnr_db += r.psnr_db;
        mean.mae += r.mae;
        mean.l2 += r.l2;
        mean.linf += r.linf;
        ++count;
    }
    if (count > 0) {
        ordered_json j;
        j["aggregate"] = "mean";
        j["count"] = count;
        j["ssim"] = mean.ssim / count;
        j["psnr_db"] = mean.psnr_db / count;
        j["mae"] = mean.mae / count;
        j["l2"] = mean.l2 / count;
        j["linf"] = mean.linf / count;
        lines.push_back(dump_manifest_json(j));
    }
    return write_lines(out_path, lines, true);
}

// ---- decompose -------------------------------------------------------------

ImageTensor scaled_band(const ImageTensor& band, double scale, double offset) {
    ImageTensor out(band.height, band.width, band.channels, false);
    for (std::size_t i = 0; i < band.data.size(); ++i) {
        double v = band.data[i] * scale + offset;
        out.data[i] = std::min(std::max(v, 0.0), 1.0);
    }
    return out;
}

int cmd_decompose(const std::string& in, const std::string& out_dir,
                  int size) {
    const ImageTensor img = load_image(in, size);
    fs::create_directories(out_dir);
    const std::string stem = fs::path(in).stem().string();
    const WaveletPyramid p = dwt2(img);
    auto path = [&](const std::string& suffix) {
        return (fs::path(out_dir) / (stem + suffix + ".png")).string();
    };
    // One Haar level doubles the ll gain, so halve it for display; signed
    // bands are written around mid-gray, as the file names state.
    save_image(scaled_band(p.ll, 0.5, 0.0), path("_ll_x0.5"), 8);
    save_image(scaled_band(p.lh, 1.0, 0.5), path("_lh_offset0.5"), 8);
    save_image(scaled_band(p.hl, 1.0, 0.5), path("_hl_offset0.5"), 8);
    save_image(scaled_band(p.hh, 1.0, 0.5), path("_hh_offset0.5"), 8);
    save_image(scaled_band(homogeneous_component(img), 1.0, 0.0),
               path("_homo"), 8);
    save_image(scaled_band(structural_component(img), 1.0, 0.5),
               path("_stru_offset0.5"), 8);
    return kExitOk;
}

// ---- defend ----------------------------------------------------------------

int cmd_defend(const std::string& manifest_path, const RunConfig& rc,
               const std::string& models_dir, const std::string& out_path,
               int size) {
    std::ifstream f(manifest_path);
    if (!f)
        throw InvalidParameterError("cannot read manifest '" + manifest_path +
                                    "'");
    std::vector<DefenseSpec> specs;
    for (const auto& t : rc.defense_texts)
        specs.push_back(parse_defense_spec(t));

    const auto enc = load_encoder(rc.attack.encoder_variant, models_dir);

    std::vector<std::string> lines;
    bool any_failed = false;
    std::string raw;
    while (std::getline(f, raw)) {
        if (raw.empty()) continue;
        ordered_json entry;
        try {
            entry = ordered_json::parse(raw);
        } catch (const nlohmann::json::exception& e) {
            throw InvalidParameterError("bad manifest line: " +
                                        std::string(e.what()));
        }
        if (entry.contains("error") || !entry.contains("output"))
            continue;  // failed protect items carry no image to defend
        const std::string input = entry.at("input").get<std::string>();
        const std::string output = entry.at("output").get<std::string>();
        ordered_json j;
        j["input"] = input;
        j["protected"] = output;
        try {
            const ImageTensor x_s = load_image(input, size);
            const ImageTensor x_adv = load_image(output, size);
            const RobustnessReport rep = evaluate_robustness(
                x_s, x_adv, enc, specs, rc.attack.blur_sigma);
            j["report"] = to_json(rep);
        } catch (const std::exception& e) {
            j["error"] = std::string(e.what());
            any_failed = true;
            std::cerr << "defend: " << input << ": " << e.what() << "\n";
        }
        lines.push_back(dump_manifest_json(j));
    }
    write_lines(out_path, lines, true);
    return any_failed ? kExitPartial : kExitOk;
}

// ---- sweep -----------------------------------------------------------------

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) {
            try {
                out.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw InvalidParameterError("bad grid value '" + tok + "'");
            }
        }
    if (out.empty()) throw InvalidParameterError("empty grid");
    return out;
}

int cmd_sweep(const RunConfig& rc, const std::string& models_dir,
              const std::string& lambda_grid, const std::string& lr_grid,
              const std::string& steps_grid) {
    if (rc.in.empty() || rc.out.empty())
        throw InvalidParameterError("sweep needs --in and --out");
    const std::vector<double> lambdas = parse_grid(lambda_grid);
    const std::vector<double> lrs = parse_grid(lr_grid);
    const std::vector<double> steps_values = parse_grid(steps_grid);
    const std::vector<std::string> inputs = collect_inputs(rc.in);
    const auto enc = load_encoder(rc.attack.encoder_variant, models_dir);
    fs::create_directories(rc.out);

    std::ofstream csv(fs::path(rc.out) / "sweep.csv");
    if (!csv) throw IoError("cannot write sweep.csv");
    csv << "lambda,lr,steps,ssim,psnr_db,mae,l2,linf,final_destyle\n";

    int point = 0;
    for (double lam : lambdas) {
        for (double lr : lrs) {
            for (double steps : steps_values) {
                AttackConfig cfg = rc.attack;
                cfg.lambda = lam;
                cfg.learning_rate = lr;
                cfg.steps = static_cast<int>(steps);
                const std::string sub_dir =
                    (fs::path(rc.out) / ("grid_" + std::to_string(point)))
                        .string();
                BatchOptions opts;
                opts.jobs = rc.jobs;
                opts.bit_depth = rc.bit_depth;
                const auto items =
                    protect_batch(inputs, cfg, sub_dir, enc, opts);

                PerceptualReport mean;
                double mean_destyle = 0.0;
                int ok_count = 0;
                for (const auto& item : items) {
                    if (!item.ok)
                        throw Error("sweep item failed: " + item.input +
                                    ": " + item.error);
                    const ImageTensor a = load_image(item.input, 224);
                    const ImageTensor b = load_image(item.output, 0);
                    const PerceptualReport r = report(a, b);
                    mean.ssim += r.ssim;
                    mean.psnr_db += r.psnr_db;
                    mean.mae += r.mae;
                    mean.l2 += r.l2;
                    mean.linf += r.linf;
                    mean_destyle += item.final_state.destyle;
                    ++ok_count;
                }
                char row[256];
                std::snprintf(row, sizeof(row),
                              "%.9g,%.9g,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                              lam, lr, cfg.steps, mean.ssim / ok_count,
                              mean.psnr_db / ok_count, mean.mae / ok_count,
                              mean.l2 / ok_count, mean.linf / ok_count,
                              mean_destyle / ok_count);
                csv << row;
                ++point;
            }
        }
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& argv) {
    CLI::App app{"style-cloak: protect artwork against style mimicry by "
                 "embedding imperceptible adversarial perturbations"};
    app.require_subcommand(1);

    AttackFlags protect_flags, defend_flags, sweep_flags;
    std::string report_in, report_protected, report_out;
    int report_size = 0;
    std::string decompose_in, decompose_out;
    int decompose_size = 0;
    std::string defend_manifest, defend_out;
    int defend_size = 224;
    std::string lambda_grid = "100", lr_grid = "0.005", steps_grid = "50";

    CLI::App* protect = app.add_subcommand(
        "protect", "generate protected versions of the input images");
    protect->add_option("--in", protect_flags.in,
                        "input image or directory");
    protect->add_option("--out", protect_flags.out, "output directory");
    protect_flags.add_to(*protect, true);

    CLI::App* rep = app.add_subcommand(
        "report", "perceptual metrics for clean/protected pairs");
    rep->add_option("--in", report_in, "clean image or directory")
        ->required();
    rep->add_option("--protected", report_protected,
                    "protected image or directory")
        ->required();
    rep->add_option("--out", report_out, "output JSONL (default stdout)");
    rep->add_option("--size", report_size,
                    "resize both sides (0 keeps native)");

    CLI::App* dec = app.add_subcommand(
        "decompose", "write wavelet subband and component visualizations");
    dec->add_option("--in", decompose_in, "input image")->required();
    dec->add_option("--out", decompose_out, "output directory")->required();
    dec->add_option("--size", decompose_size,
                    "resize before decomposing (0 keeps native)");

    CLI::App* def = app.add_subcommand(
        "defend", "measure robustness of protected images under defenses");
    def->add_option("--manifest", defend_manifest,
                    "manifest.jsonl from protect")
        ->required();
    def->add_option("--out", defend_out, "output JSONL (default stdout)");
    def->add_option("--size", defend_size, "clean-image load size");
    def->add_option("--defense", defend_flags.defenses,
                    "defense spec, e.g. jpeg:75 blur:1.0 noise:0.02 bits:5");
    defend_flags.add_to(*def, false);

    CLI::App* sweep = app.add_subcommand(
        "sweep", "grid of lambda/lr/steps runs with a CSV summary");
    sweep->add_option("--in", sweep_flags.in, "input image or directory");
    sweep->add_option("--out", sweep_flags.out, "output directory");
    sweep->add_option("--lambda-grid", lambda_grid, "comma-separated values");
    sweep->add_option("--lr-grid", lr_grid, "comma-separated values");
    sweep->add_option("--steps-grid", steps_grid, "comma-separated values");
    sweep_flags.add_to(*sweep, true);

    try {
        // CLI11 wants mutable char pointers; rebuild a classic argv view.
        std::vector<const char*> cargv;
        cargv.reserve(argv.size());
        for (const auto& a : argv) cargv.push_back(a.c_str());
        app.parse(static_cast<int>(cargv.size()),
                  const_cast<char**>(cargv.data()));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (protect->parsed()) {
            const RunConfig rc = protect_flags.resolve(*protect);
            return cmd_protect(rc, protect_flags.models);
        }
        if (rep->parsed())
            return cmd_report(report_in, report_protected, report_out,
                              report_size);
        if (dec->parsed())
            return cmd_decompose(decompose_in, decompose_out, decompose_size);
        if (def->parsed()) {
            const RunConfig rc = defend_flags.resolve(*def);
            return cmd_defend(defend_manifest, rc, defend_flags.models,
                              defend_out, defend_size);
        }
        if (sweep->parsed()) {
            const RunConfig rc = sweep_flags.resolve(*sweep);
            return cmd_sweep(rc, sweep_flags.models, lambda_grid, lr_grid,
                             steps_grid);
        }
    } catch (const DivergedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPartial;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace stylecloak
