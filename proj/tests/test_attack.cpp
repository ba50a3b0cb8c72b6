#include <doctest.h>

#include <cmath>
#include <fstream>

#include "stylecloak/attack.hpp"
#include "stylecloak/imaging.hpp"
#include "stylecloak/metrics.hpp"
#include "testutil.hpp"

using namespace stylecloak;
using testutil::max_abs_diff;
using testutil::synthetic_art_image;
using testutil::TempDir;

namespace {

const std::shared_ptr<const Encoder>& toy() {
    static const auto enc = load_encoder("toy");
    return enc;
}

AttackConfig toy_defaults() {
    AttackConfig cfg;
    cfg.encoder_variant = "toy";
    return cfg;
}

}  // namespace

TEST_CASE("zero steps returns the input untouched") {
    const ImageTensor x_s = synthetic_art_image(32, 1);
    AttackConfig cfg = toy_defaults();
    cfg.steps = 0;
    const AttackResult r = run_sita(x_s, cfg, toy());
    CHECK(max_abs_diff(r.x_adv, x_s) == 0.0);
    REQUIRE(r.loss_trace.size() == 1);
    CHECK(r.loss_trace[0].destyle == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("initial trace entry equals the standalone loss at x_s") {
    const ImageTensor x_s = synthetic_art_image(32, 2);
    AttackConfig cfg = toy_defaults();
    cfg.steps = 3;
    const AttackResult r = run_sita(x_s, cfg, toy());
    REQUIRE(r.loss_trace.size() == 4);

    const ImageTensor x_c = extract_content(x_s, cfg.blur_sigma);
    const LossBreakdown direct =
        total_loss(*toy(), x_s, x_s, x_c, cfg.lambda, cfg.destyle_mode);
    CHECK(r.loss_trace[0].destyle ==
          doctest::Approx(direct.destyle).epsilon(1e-12));
    CHECK(r.loss_trace[0].homo == doctest::Approx(direct.homo));
    CHECK(r.loss_trace[0].stru == doctest::Approx(direct.stru));
    CHECK(r.loss_trace[0].total ==
          doctest::Approx(direct.total).epsilon(1e-12));
}

TEST_CASE("five toy steps on a 16x16 image descend") {
    const ImageTensor x_s = synthetic_art_image(16, 3);
    AttackConfig cfg = toy_defaults();
    cfg.steps = 5;
    const AttackResult r = run_sita(x_s, cfg, toy());
    REQUIRE(r.loss_trace.size() == 6);
    CHECK(r.loss_trace[5].total < r.loss_trace[0].total);
}

TEST_CASE("protected pixels stay in [0,1]") {
    const ImageTensor x_s = synthetic_art_image(32, 4);
    AttackConfig cfg = toy_defaults();
    cfg.steps = 25;
    cfg.learning_rate = 0.02;  // aggressive on purpose
    const AttackResult r = run_sita(x_s, cfg, toy());
    for (double v : r.x_adv.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK_FALSE(r.x_adv.is_signed);
}

TEST_CASE("identical config and seed give bitwise-identical results") {
    const ImageTensor x_s = synthetic_art_image(32, 5);
    AttackConfig cfg = toy_defaults();
    cfg.steps = 10;
    const AttackResult a = run_sita(x_s, cfg, toy());
    const AttackResult b = run_sita(x_s, cfg, toy());
    CHECK(max_abs_diff(a.x_adv, b.x_adv) == 0.0);
    for (std::size_t i = 0; i < a.loss_trace.size(); ++i)
        CHECK(a.loss_trace[i].total == b.loss_trace[i].total);
}

TEST_CASE("budget mode respects the L-inf ball at every step") {
    const ImageTensor x_s = synthetic_art_image(32, 6);
    AttackConfig cfg = toy_defaults();
    cfg.constraint_mode = ConstraintMode::kBudget;
    const AttackResult r = run_sita(x_s, cfg, toy());
    REQUIRE(r.loss_trace.size() ==
            static_cast<std::size_t>(cfg.budget_steps) + 1);
    CHECK(r.max_step_linf <= cfg.budget_epsilon + 1e-6);
    CHECK(max_abs_diff(r.x_adv, x_s) <= cfg.budget_epsilon + 1e-6);
    // The attack does move the image.
    CHECK(max_abs_diff(r.x_adv, x_s) > 0.0);
    CHECK(r.loss_trace.back().destyle < r.loss_trace.front().destyle);
}

TEST_CASE("l2 mode replaces the perception term with the pixel MSE") {
    const ImageTensor x_s = synthetic_art_image(32, 7);
    AttackConfig cfg = toy_defaults();
    cfg.constraint_mode = ConstraintMode::kL2;
    cfg.steps = 8;
    const AttackResult r = run_sita(x_s, cfg, toy());
    REQUIRE(r.loss_trace.size() == 9);
    for (const LossBreakdown& b : r.loss_trace) {
        CHECK(b.stru == 0.0);
        CHECK(b.per == b.homo);  // MSE mirrored into both fields
        CHECK(std::fabs(b.total - (b.lambda * b.destyle + b.per)) <= 1e-9);
    }
    CHECK(r.loss_trace.back().destyle < 1.0);
}

TEST_CASE("config validation") {
    const ImageTensor x_s = synthetic_art_image(16, 8);
    AttackConfig cfg = toy_defaults();
    SUBCASE("negative steps") {
        cfg.steps = -1;
        CHECK_THROWS_AS(run_sita(x_s, cfg, toy()), InvalidParameterError);
    }
    SUBCASE("zero learning rate") {
        cfg.learning_rate = 0.0;
        CHECK_THROWS_AS(run_sita(x_s, cfg, toy()), InvalidParameterError);
    }
    SUBCASE("budget epsilon must be positive in budget mode") {
        cfg.constraint_mode = ConstraintMode::kBudget;
        cfg.budget_epsilon = 0.0;
        CHECK_THROWS_AS(run_sita(x_s, cfg, toy()), InvalidParameterError);
    }
    SUBCASE("encoder variant must match the handle") {
        cfg.encoder_variant = "vit-large";
        CHECK_THROWS_AS(run_sita(x_s, cfg, toy()), InvalidParameterError);
    }
    SUBCASE("signed input is rejected") {
        ImageTensor bad = x_s;
        bad.is_signed = true;
        CHECK_THROWS_AS(run_sita(bad, toy_defaults(), toy()),
                        InvalidInputError);
    }
}

TEST_CASE("protect_batch cardinality and isolation") {
    TempDir dir("batch");
    const std::string in_dir = dir.str() + "/in";
    const std::string out_dir = dir.str() + "/out";
    std::filesystem::create_directories(in_dir);
    for (int i = 0; i < 3; ++i)
        save_image(synthetic_art_image(64, 100 + i),
                   in_dir + "/img" + std::to_string(i) + ".png");

    AttackConfig cfg = toy_defaults();
    cfg.steps = 2;
    BatchOptions opts;
    opts.target_size = 64;

    SUBCASE("three valid files give three outputs") {
        const auto items = protect_batch(
            {in_dir + "/img0.png", in_dir + "/img1.png", in_dir + "/img2.png"},
            cfg, out_dir, toy(), opts);
        REQUIRE(items.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(items[i].ok);
            CHECK(items[i].seed == cfg.seed + static_cast<long long>(i));
            CHECK(std::filesystem::exists(items[i].output));
        }
    }

    SUBCASE("a corrupt file is isolated") {
        std::ofstream(in_dir + "/broken.png") << "not a png";
        const auto items = protect_batch(
            {in_dir + "/img0.png", in_dir + "/broken.png",
             in_dir + "/img2.png"},
            cfg, out_dir, toy(), opts);
        REQUIRE(items.size() == 3);
        CHECK(items[0].ok);
        CHECK_FALSE(items[1].ok);
        CHECK_FALSE(items[1].error.empty());
        CHECK(items[2].ok);
    }

    SUBCASE("empty input list is a no-op success") {
        const auto items = protect_batch({}, cfg, out_dir, toy(), opts);
        CHECK(items.empty());
    }
}

TEST_CASE("protect_batch is deterministic, including with jobs > 1") {
    TempDir dir("batch_det");
    const std::string in_dir = dir.str() + "/in";
    std::filesystem::create_directories(in_dir);
    std::vector<std::string> inputs;
    for (int i = 0; i < 4; ++i) {
        const std::string p = in_dir + "/img" + std::to_string(i) + ".png";
        save_image(synthetic_art_image(64, 200 + i), p);
        inputs.push_back(p);
    }
    AttackConfig cfg = toy_defaults();
    cfg.steps = 3;
    cfg.seed = 7;
    BatchOptions serial;
    serial.target_size = 64;
    BatchOptions parallel = serial;
    parallel.jobs = 2;

    const auto a =
        protect_batch(inputs, cfg, dir.str() + "/out_a", toy(), serial);
    const auto b =
        protect_batch(inputs, cfg, dir.str() + "/out_b", toy(), parallel);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].ok);
        CHECK(b[i].ok);
        CHECK(a[i].seed == b[i].seed);
        CHECK(a[i].final_state.total == b[i].final_state.total);

        std::ifstream fa(a[i].output, std::ios::binary);
        std::ifstream fb(b[i].output, std::ios::binary);
        const std::string bytes_a((std::istreambuf_iterator<char>(fa)),
                                  std::istreambuf_iterator<char>());
        const std::string bytes_b((std::istreambuf_iterator<char>(fb)),
                                  std::istreambuf_iterator<char>());
        CHECK(bytes_a == bytes_b);
        CHECK_FALSE(bytes_a.empty());
    }
}

TEST_CASE("full default run on a 224 image descends and stays in range") {
    const ImageTensor x_s = synthetic_art_image(224, 991);
    const AttackResult r = run_sita(x_s, toy_defaults(), toy());
    REQUIRE(r.loss_trace.size() == 51);
    CHECK(r.loss_trace.back().total < r.loss_trace.front().total);
    CHECK(r.loss_trace.back().destyle < 0.5);  // well past the start
    const PerceptualReport rep = report(r.x_adv, x_s);
    CHECK(rep.linf <= 1.0);
    CHECK(rep.ssim > 0.0);
}
