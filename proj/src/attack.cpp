#include "stylecloak/attack.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <set>
#include <thread>

#include "stylecloak/imaging.hpp"
#include "stylecloak/rng.hpp"

namespace stylecloak {

ConstraintMode constraint_mode_from_string(const std::string& s) {
    if (s == "sita") return ConstraintMode::kSita;
    if (s == "budget") return ConstraintMode::kBudget;
    if (s == "l2") return ConstraintMode::kL2;
    throw InvalidParameterError("unknown constraint mode '" + s + "'");
}

std::string to_string(ConstraintMode m) {
    switch (m) {
        case ConstraintMode::kSita: return "sita";
        case ConstraintMode::kBudget: return "budget";
        case ConstraintMode::kL2: return "l2";
    }
    return "sita";
}

void AttackConfig::validate() const {
    if (lambda < 0.0)
        throw InvalidParameterError("config: lambda must be >= 0");
    if (steps < 0) throw InvalidParameterError("config: steps must be >= 0");
    if (!(learning_rate > 0.0))
        throw InvalidParameterError("config: learning rate must be > 0");
    if (!(blur_sigma > 0.0))
        throw InvalidParameterError("config: blur sigma must be > 0");
    if (constraint_mode == ConstraintMode::kBudget) {
        if (!(budget_epsilon > 0.0) || !(budget_alpha > 0.0))
            throw InvalidParameterError(
                "config: budget epsilon and alpha must be > 0");
        if (budget_steps < 0)
            throw InvalidParameterError("config: budget steps must be >= 0");
    }
    if (constraint_mode == ConstraintMode::kL2 && !(l2_lr > 0.0))
        throw InvalidParameterError("config: l2 learning rate must be > 0");
}

namespace {

void require_finite_loss(const LossBreakdown& b, int step) {
    if (!std::isfinite(b.total) || !std::isfinite(b.destyle))
        throw DivergedError("optimization diverged (non-finite loss) at step " +
                                std::to_string(step),
                            step);
}

struct Adam {
    std::vector<double> m, v;
    double beta1, beta2, eps;
    int t = 0;

    Adam(std::size_t n, double b1, double b2, double e)
        : m(n, 0.0), v(n, 0.0), beta1(b1), beta2(b2), eps(e) {}

    void step(std::vector<double>& x, const std::vector<double>& g,
              double lr) {
        ++t;
        const double c1 = 1.0 - std::pow(beta1, t);
        const double c2 = 1.0 - std::pow(beta2, t);
        for (std::size_t i = 0; i < x.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            x[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
};

double mean_squared_diff(const ImageTensor& a, const ImageTensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return s / static_cast<double>(a.data.size());
}

double max_abs_diff(const ImageTensor& a, const ImageTensor& b) {
    double mx = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        mx = std::max(mx, std::fabs(a.data[i] - b.data[i]));
    return mx;
}

// The initial point is a strict saddle: both the cosine term and the
// perception term have exactly zero gradient at x_adv = x_s, so gradient
// steps cannot leave it. A seeded sub-visible jitter breaks the symmetry
// after the initial state has been recorded.
constexpr double kBootstrapJitter = 1e-4;

void bootstrap_jitter(ImageTensor& x_adv, long long seed) {
    Lcg64 rng(static_cast<unsigned long long>(seed));
    for (double& v : x_adv.data)
        v += (2.0 * rng.next_uniform() - 1.0) * kBootstrapJitter;
    clamp01_inplace(x_adv);
}

}  // namespace

AttackResult run_sita(const ImageTensor& x_s, const AttackConfig& cfg,
                      std::shared_ptr<const Encoder> enc) {
    cfg.validate();
    if (x_s.channels != 3 || x_s.is_signed)
        throw InvalidInputError("run_sita: expected a pixel-valued RGB image");
    if (!enc) throw InvalidParameterError("run_sita: null encoder");
    if (enc->variant().id != cfg.encoder_variant)
        throw InvalidParameterError(
            "run_sita: encoder handle is '" + enc->variant().id +
            "' but config asks for '" + cfg.encoder_variant + "'");

    const auto t_start = std::chrono::steady_clock::now();

    const ImageTensor x_c = extract_content(x_s, cfg.blur_sigma);
    const LossContext ctx(enc, x_s, x_c, cfg.lambda, cfg.destyle_mode);

    AttackResult result;
    result.config = cfg;
    ImageTensor x_adv = x_s;
    const std::size_t n_elems = x_adv.data.size();
    const int steps = cfg.effective_steps();
    result.loss_trace.reserve(steps + 1);

    switch (cfg.constraint_mode) {
        case ConstraintMode::kSita: {
            const LossBreakdown b0 = ctx.evaluate(x_adv);
            require_finite_loss(b0, 0);
            result.loss_trace.push_back(b0);
            if (steps > 0) bootstrap_jitter(x_adv, cfg.seed);

            Adam adam(n_elems, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
            ImageTensor grad;
            for (int t = 1; t <= steps; ++t) {
                const LossBreakdown b = ctx.evaluate_with_grad(x_adv, grad);
                require_finite_loss(b, t);
                // Records the post-update state of the previous iteration;
                // the jittered pre-first-update point is optimizer-internal.
                if (t > 1) result.loss_trace.push_back(b);
                adam.step(x_adv.data, grad.data, cfg.learning_rate);
                clamp01_inplace(x_adv);
                result.max_step_linf = std::max(result.max_step_linf,
                                                max_abs_diff(x_adv, x_s));
            }
            break;
        }
        case ConstraintMode::kBudget: {
            // Signed-gradient steps on lambda * destyle alone, projected to
            // the L-inf ball around x_s (and to the pixel range). The loss
            // gradient vanishes exactly at x_adv = x_s, so the iterate is
            // seeded uniformly inside the ball, as sign-step attacks do.
            if (steps > 0) {
                Lcg64 rng(static_cast<unsigned long long>(cfg.seed));
                for (std::size_t i = 0; i < n_elems; ++i)
                    x_adv.data[i] += (2.0 * rng.next_uniform() - 1.0) *
                                     cfg.budget_epsilon;
                clamp01_inplace(x_adv);
                result.max_step_linf = std::max(result.max_step_linf,
                                                max_abs_diff(x_adv, x_s));
            }
            for (int t = 0; t < steps; ++t) {
                ImageTensor grad(x_adv.height, x_adv.width, x_adv.channels,
                                 true);
                LossBreakdown b;
                b.lambda = cfg.lambda;
                b.destyle = ctx.destyle_with_grad(x_adv, cfg.lambda, grad);
                b.homo = homogeneous_loss(x_adv, x_s);
                b.stru = structural_loss(x_adv, x_s);
                b.per = b.homo + b.stru;
                b.total = cfg.lambda * b.destyle + b.per;
                require_finite_loss(b, t);
                result.loss_trace.push_back(b);

                for (std::size_t i = 0; i < n_elems; ++i) {
                    double g = grad.data[i];
                    double step = g > 0.0 ? -cfg.budget_alpha
                                          : (g < 0.0 ? cfg.budget_alpha : 0.0);
                    double v = x_adv.data[i] + step;
                    const double lo = x_s.data[i] - cfg.budget_epsilon;
                    const double hi = x_s.data[i] + cfg.budget_epsilon;
                    if (v < lo) v = lo;
                    if (v > hi) v = hi;
                    x_adv.data[i] = v;
                }
                clamp01_inplace(x_adv);
                result.max_step_linf = std::max(result.max_step_linf,
                                                max_abs_diff(x_adv, x_s));
            }
            break;
        }
        case ConstraintMode::kL2: {
            // Perception term replaced by the mean squared pixel difference.
            auto l2_breakdown = [&](const ImageTensor& at, double weight,
                                    ImageTensor& grad) {
                LossBreakdown b;
                b.lambda = cfg.lambda;
                b.destyle = ctx.destyle_with_grad(at, weight, grad);
                const double mse = mean_squared_diff(at, x_s);
                b.homo = mse;
                b.stru = 0.0;
                b.per = mse;
                b.total = cfg.lambda * b.destyle + mse;
                return b;
            };

            ImageTensor scratch(x_adv.height, x_adv.width, x_adv.channels,
                                true);
            const LossBreakdown b0 = l2_breakdown(x_adv, 0.0, scratch);
            require_finite_loss(b0, 0);
            result.loss_trace.push_back(b0);
            if (steps > 0) bootstrap_jitter(x_adv, cfg.seed);

            Adam adam(n_elems, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
            for (int t = 1; t <= steps; ++t) {
                ImageTensor grad(x_adv.height, x_adv.width, x_adv.channels,
                                 true);
                const LossBreakdown b = l2_breakdown(x_adv, cfg.lambda, grad);
                require_finite_loss(b, t);
                if (t > 1) result.loss_trace.push_back(b);

                const double mse_scale = 2.0 / static_cast<double>(n_elems);
                for (std::size_t i = 0; i < n_elems; ++i)
                    grad.data[i] += mse_scale * (x_adv.data[i] - x_s.data[i]);
                adam.step(x_adv.data, grad.data, cfg.l2_lr);
                clamp01_inplace(x_adv);
                result.max_step_linf = std::max(result.max_step_linf,
                                                max_abs_diff(x_adv, x_s));
            }
            break;
        }
    }

    // Final-state record; in l2 mode keep that mode's breakdown semantics.
    // With zero steps the initial entry already is the final state (budget
    // mode records its states inside the loop, so it always needs one).
    const bool need_final =
        steps > 0 || cfg.constraint_mode == ConstraintMode::kBudget;
    if (need_final && cfg.constraint_mode == ConstraintMode::kL2) {
        ImageTensor scratch(x_adv.height, x_adv.width, x_adv.channels, true);
        LossBreakdown b;
        b.lambda = cfg.lambda;
        b.destyle = ctx.destyle_with_grad(x_adv, 0.0, scratch);
        const double mse = mean_squared_diff(x_adv, x_s);
        b.homo = mse;
        b.per = mse;
        b.total = cfg.lambda * b.destyle + mse;
        require_finite_loss(b, steps);
        result.loss_trace.push_back(b);
    } else if (need_final) {
        const LossBreakdown b = ctx.evaluate(x_adv);
        require_finite_loss(b, steps);
        result.loss_trace.push_back(b);
    }

    result.x_adv = std::move(x_adv);
    result.x_adv.is_signed = false;
    result.elapsed_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      t_start)
            .count();
    return result;
}

std::vector<BatchItemSummary> protect_batch(
    const std::vector<std::string>& inputs, const AttackConfig& cfg,
    const std::string& out_dir, std::shared_ptr<const Encoder> enc,
    const BatchOptions& opts) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    // Claim output names up front so duplicate stems stay deterministic.
    std::vector<std::string> outputs(inputs.size());
    std::set<std::string> used;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        std::string stem = std::filesystem::path(inputs[i]).stem().string();
        if (stem.empty()) stem = "item";
        std::string name = stem + ".png";
        if (!used.insert(name).second) {
            name = stem + "_" + std::to_string(i) + ".png";
            used.insert(name);
        }
        outputs[i] = (std::filesystem::path(out_dir) / name).string();
    }

    std::vector<BatchItemSummary> items(inputs.size());
    std::atomic<std::size_t> next{0};
    const int jobs = std::max(1, opts.jobs);

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= inputs.size()) return;
            BatchItemSummary& item = items[i];
            item.input = inputs[i];
            item.seed = cfg.seed + static_cast<long long>(i);
            try {
                const ImageTensor x_s =
                    load_image(inputs[i], opts.target_size);
                AttackConfig item_cfg = cfg;
                item_cfg.seed = item.seed;
                AttackResult r = run_sita(x_s, item_cfg, enc);
                save_image(r.x_adv, outputs[i], opts.bit_depth);
                item.output = outputs[i];
                item.initial = r.loss_trace.front();
                item.final_state = r.loss_trace.back();
                item.elapsed_s = r.elapsed_s;
                item.ok = true;
            } catch (const std::exception& e) {
                item.ok = false;
                item.error = e.what();
            }
        }
    };

    if (jobs == 1 || inputs.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const int n_threads = static_cast<int>(
            std::min<std::size_t>(static_cast<std::size_t>(jobs),
                                  inputs.size()));
        pool.reserve(n_threads);
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return items;
}

}  // namespace stylecloak
