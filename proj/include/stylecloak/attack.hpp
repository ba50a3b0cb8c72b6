#pragma once

#include <memory>
#include <string>
#include <vector>

#include "stylecloak/encoder.hpp"
#include "stylecloak/image.hpp"
#include "stylecloak/losses.hpp"

namespace stylecloak {

enum class ConstraintMode { kSita, kBudget, kL2 };

ConstraintMode constraint_mode_from_string(const std::string& s);
std::string to_string(ConstraintMode m);

// Every optimization knob. Defaults match the main configuration: 50 Adam
// steps at learning rate 0.005 with lambda 100 on the vit-large encoder.
struct AttackConfig {
    double lambda = 100.0;
    int steps = 50;
    double learning_rate = 0.005;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::string encoder_variant = "vit-large";
    DestyleMode destyle_mode = DestyleMode::kSita;
    ConstraintMode constraint_mode = ConstraintMode::kSita;
    double budget_epsilon = 0.015;  // budget mode: L-inf ball radius
    double budget_alpha = 0.002;    // budget mode: signed-gradient step
    int budget_steps = 40;
    double l2_lr = 0.002;           // l2 mode learning rate
    double blur_sigma = 3.0;
    long long seed = 0;

    // Steps the selected constraint mode actually runs.
    int effective_steps() const {
        return constraint_mode == ConstraintMode::kBudget ? budget_steps
                                                          : steps;
    }

    void validate() const;
};

struct AttackResult {
    ImageTensor x_adv;
    // One entry per visited iterate, including the initial state:
    // effective_steps() + 1 entries. In l2 mode `per` (mirrored into `homo`)
    // is the mean-squared pixel penalty that replaces the wavelet terms.
    std::vector<LossBreakdown> loss_trace;
    double elapsed_s = 0.0;
    AttackConfig config;
    // Largest ||x_adv - x_s||_inf observed after any step (projection audit).
    double max_step_linf = 0.0;
};

// Iterative minimization of total = lambda * destyle + per on the pixels of
// x_adv, initialized at x_s and clamped to [0,1] after every step.
// Deterministic for a fixed config and encoder.
AttackResult run_sita(const ImageTensor& x_s, const AttackConfig& cfg,
                      std::shared_ptr<const Encoder> enc);

struct BatchItemSummary {
    std::string input;
    std::string output;  // empty when the item failed
    long long seed = 0;
    bool ok = false;
    std::string error;
    LossBreakdown initial;
    LossBreakdown final_state;
    double elapsed_s = 0.0;
};

struct BatchOptions {
    int jobs = 1;
    int bit_depth = 16;
    int target_size = 224;
};

// Protect a list of files into out_dir. Failures are per item: one bad file
// never aborts the batch. Item seeds are cfg.seed + index.
std::vector<BatchItemSummary> protect_batch(
    const std::vector<std::string>& inputs, const AttackConfig& cfg,
    const std::string& out_dir, std::shared_ptr<const Encoder> enc,
    const BatchOptions& opts = {});

}  // namespace stylecloak
