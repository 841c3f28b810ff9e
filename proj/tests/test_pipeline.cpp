#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

#include "dac/dataset.hpp"
#include "dac/errors.hpp"
#include "dac/metrics.hpp"
#include "dac/pipeline.hpp"
#include "dac/rng.hpp"

using namespace dac;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "dac-pipeline-tests";
    fs::create_directories(dir);
    return dir / name;
}

// Small well-separated blobs: cheap to train, easy to get right.
struct Problem {
    NoisyDataset train;
    NoisyDataset val;
};

Problem easy_problem(std::int32_t k = 3, std::size_t per = 60) {
    Problem p{gen_blobs(k, 2, per, 8.0, 101), gen_blobs(k, 2, per / 2, 8.0, 202)};
    return p;
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.warmup_epochs = 2;
    cfg.hidden_dims = {16};
    cfg.batch_size = 32;
    cfg.lr = {0.05, {5}, 0.5};
    cfg.seed = 7;
    return cfg;
}

void check_same_stats(const std::vector<EpochStats>& a, const std::vector<EpochStats>& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].epoch == b[i].epoch);
        CHECK(a[i].train_loss == b[i].train_loss);  // bit-exact, not approximate
        CHECK(a[i].gamma == b[i].gamma);
        CHECK(a[i].val_acc == b[i].val_acc);
        CHECK(a[i].alpha.has_value() == b[i].alpha.has_value());
        if (a[i].alpha && b[i].alpha) CHECK(*a[i].alpha == *b[i].alpha);
        CHECK(a[i].lr == b[i].lr);
    }
}

}  // namespace

TEST_CASE("config validation") {
    TrainConfig cfg = small_config();
    cfg.epochs = 0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg = small_config();
    cfg.warmup_epochs = cfg.epochs;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg = small_config();
    cfg.batch_size = 0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg = small_config();
    cfg.momentum = 1.0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg = small_config();
    cfg.lr.initial_lr = 0.0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg = small_config();
    cfg.hidden_dims = {8, 0};
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg = small_config();
    cfg.fixed_alpha = -1.0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    CHECK_NOTHROW(validate(small_config()));
}

TEST_CASE("dataset preconditions") {
    const Problem p = easy_problem();
    const TrainConfig cfg = small_config();

    const std::vector<std::size_t> none{};
    CHECK_THROWS_AS(train_dac(subset(p.train, none), p.val, cfg), EmptyTrainingSetError);
    CHECK_THROWS_AS(train_dac(p.train, subset(p.val, none), cfg), InvalidInputError);

    const NoisyDataset other_k = gen_blobs(4, 2, 10, 8.0, 1);
    CHECK_THROWS_AS(train_dac(p.train, other_k, cfg), InvalidInputError);
    const NoisyDataset other_d = gen_blobs(3, 3, 10, 8.0, 1);
    CHECK_THROWS_AS(train_dac(p.train, other_d, cfg), InvalidInputError);
    CHECK_THROWS_AS(train_plain(subset(p.train, none), p.val, cfg, 3), EmptyTrainingSetError);
}

TEST_CASE("training runs are deterministic") {
    const Problem p = easy_problem();
    const TrainConfig cfg = small_config();
    const TrainResult a = train_dac(p.train, p.val, cfg);
    const TrainResult b = train_dac(p.train, p.val, cfg);
    CHECK(a.best == b.best);
    CHECK(a.best_epoch == b.best_epoch);
    CHECK(a.best_val_acc == b.best_val_acc);
    check_same_stats(a.stats, b.stats);

    TrainConfig other = cfg;
    other.seed = 8;
    const TrainResult c = train_dac(p.train, p.val, other);
    CHECK(a.best.model != c.best.model);
}

TEST_CASE("epoch bookkeeping: numbering, lr schedule, alpha visibility, best epoch") {
    const Problem p = easy_problem();
    const TrainConfig cfg = small_config();
    const TrainResult r = train_dac(p.train, p.val, cfg);

    REQUIRE(r.stats.size() == static_cast<std::size_t>(cfg.epochs));
    double best = -1.0;
    int first_best = -1;
    for (int e = 0; e < cfg.epochs; ++e) {
        const EpochStats& st = r.stats[e];
        CHECK(st.epoch == e);
        CHECK(st.lr == lr_at(cfg.lr, e));
        CHECK(st.alpha.has_value() == (e >= cfg.warmup_epochs));
        CHECK(st.gamma >= 0.0);
        CHECK(st.gamma <= 1.0);
        if (st.val_acc > best) {
            best = st.val_acc;
            first_best = e;
        }
    }
    // Best epoch maximizes validation accuracy, earliest epoch winning ties.
    CHECK(r.best_epoch == first_best);
    CHECK(r.best_val_acc == best);
    CHECK(r.best.epoch == r.best_epoch);
    CHECK(r.best.model.output_dim() == 4u);  // k + 1

    // Scheduled alpha ramps linearly after warm-up.
    REQUIRE(r.stats[2].alpha.has_value());
    REQUIRE(r.stats[3].alpha.has_value());
    REQUIRE(r.stats[4].alpha.has_value());
    const double d32 = *r.stats[3].alpha - *r.stats[2].alpha;
    const double d43 = *r.stats[4].alpha - *r.stats[3].alpha;
    CHECK(d32 == doctest::Approx(d43).epsilon(1e-12));
}

TEST_CASE("abstention training learns the easy blobs") {
    const Problem p = easy_problem();
    TrainConfig cfg = small_config();
    cfg.epochs = 12;
    cfg.warmup_epochs = 3;
    const TrainResult r = train_dac(p.train, p.val, cfg);
    CHECK(r.best_val_acc >= 0.95);
    // Well-separated clean blobs leave little reason to abstain.
    CHECK(r.stats.back().gamma <= 0.5);
}

TEST_CASE("large fixed alpha is exactly plain cross entropy over k+1 outputs") {
    const Problem p = easy_problem();
    const TrainConfig base = small_config();

    TrainConfig huge = base;
    huge.fixed_alpha = 1e6;
    TrainConfig inf = base;
    inf.fixed_alpha = std::numeric_limits<double>::infinity();

    const TrainResult r_huge = train_dac(p.train, p.val, huge);
    const TrainResult r_inf = train_dac(p.train, p.val, inf);
    const TrainResult r_ce = train_plain(p.train, p.val, base, 4);

    CHECK(r_huge.best == r_ce.best);  // bit-identical checkpoints
    CHECK(r_inf.best == r_ce.best);
    check_same_stats(r_huge.stats, r_ce.stats);
    check_same_stats(r_inf.stats, r_ce.stats);
    for (const auto& st : r_huge.stats) CHECK_FALSE(st.alpha.has_value());
}

TEST_CASE("warm-up phase matches plain cross entropy step for step") {
    const Problem p = easy_problem();
    const TrainConfig cfg = small_config();  // warmup = 2
    const TrainResult dac = train_dac(p.train, p.val, cfg);
    const TrainResult ce = train_plain(p.train, p.val, cfg, 4);
    for (int e = 0; e < cfg.warmup_epochs; ++e) {
        CHECK(dac.stats[e].train_loss == ce.stats[e].train_loss);
        CHECK(dac.stats[e].gamma == ce.stats[e].gamma);
        CHECK(dac.stats[e].val_acc == ce.stats[e].val_acc);
    }
    // After warm-up the losses genuinely diverge.
    bool diverged = false;
    for (int e = cfg.warmup_epochs; e < cfg.epochs; ++e) {
        if (dac.stats[e].train_loss != ce.stats[e].train_loss) diverged = true;
    }
    CHECK(diverged);
}

TEST_CASE("fixed-alpha run honours the warm-up then applies the constant") {
    const Problem p = easy_problem();
    TrainConfig cfg = small_config();
    cfg.fixed_alpha = 0.5;
    const TrainResult r = train_dac(p.train, p.val, cfg);
    for (int e = 0; e < cfg.epochs; ++e) {
        if (e < cfg.warmup_epochs) {
            CHECK_FALSE(r.stats[e].alpha.has_value());
        } else {
            REQUIRE(r.stats[e].alpha.has_value());
            CHECK(*r.stats[e].alpha == 0.5);
        }
    }
}

TEST_CASE("diverging run halts with partial stats preserved") {
    const Problem p = easy_problem();
    TrainConfig cfg = small_config();
    cfg.lr.initial_lr = 1e8;  // guaranteed parameter explosion
    try {
        (void)train_dac(p.train, p.val, cfg);
        FAIL("expected HaltedRunError");
    } catch (const HaltedRunError& e) {
        CHECK(e.halted_epoch >= 0);
        CHECK(e.halted_epoch < cfg.epochs);
        CHECK(e.partial_stats.size() == static_cast<std::size_t>(e.halted_epoch));
    }
}

TEST_CASE("abstention_rate agrees with identify_noisy") {
    const Problem p = easy_problem();
    TrainConfig cfg = small_config();
    cfg.fixed_alpha = 0.3;  // cheap abstention: some gamma > 0 likely
    const TrainResult r = train_dac(p.train, p.val, cfg);
    const auto noisy = identify_noisy(r.best.model, p.train);
    CHECK(abstention_rate(r.best.model, p.train) ==
          doctest::Approx(static_cast<double>(noisy.size()) / static_cast<double>(p.train.n())));
    const auto wrong = identify_misclassified(r.best.model, p.train);
    const auto pred = predict_renormalized(r.best.model, p.train);
    std::size_t mism = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] != p.train.labels[i]) ++mism;
    }
    CHECK(wrong.size() == mism);
}

TEST_CASE("cleaning pipeline bookkeeping adds up") {
    // 3 easy classes, 20% uniform label noise.
    NoisyDataset train = inject_uniform(gen_blobs(3, 2, 80, 8.0, 11), 0.20, 12);
    const NoisyDataset val = gen_blobs(3, 2, 40, 8.0, 13);

    TrainConfig dac_cfg = small_config();
    dac_cfg.epochs = 14;
    dac_cfg.warmup_epochs = 3;
    TrainConfig down_cfg = small_config();
    down_cfg.epochs = 10;
    down_cfg.warmup_epochs = 0;
    down_cfg.lr.anneal_epochs = {6};

    const CleanOutcome out = clean_and_retrain(train, val, dac_cfg, down_cfg);
    const std::size_t n = train.n();
    const std::size_t elim = out.report.eliminated.size();

    // The eliminated set is exactly what the best model abstains on.
    const auto expect = identify_noisy(out.dac_run.best.model, train);
    CHECK(out.report.eliminated == expect);
    CHECK(out.report.eliminated_fraction ==
          doctest::Approx(static_cast<double>(elim) / static_cast<double>(n)));

    // Confusion counts cover every flagged sample.
    std::int64_t flagged = 0;
    for (std::size_t i = 0; i < n; ++i) flagged += train.randomized(i) ? 1 : 0;
    CHECK(out.report.tp + out.report.fn == flagged);
    CHECK(out.report.tp + out.report.fp == static_cast<std::int64_t>(elim));
    if (elim > 0) {
        REQUIRE(out.report.noise_precision.has_value());
        CHECK(*out.report.noise_precision ==
              doctest::Approx(static_cast<double>(out.report.tp) / static_cast<double>(elim)));
    }
    REQUIRE(out.report.noise_recall.has_value());

    // Residual noise recomputed by hand over the retained indices.
    std::vector<bool> gone(n, false);
    for (std::size_t i : out.report.eliminated) gone[i] = true;
    std::size_t kept = 0, still_noisy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (gone[i]) continue;
        ++kept;
        if (train.labels[i] != train.original_labels[i]) ++still_noisy;
    }
    REQUIRE(out.report.residual_noise_fraction.has_value());
    CHECK(*out.report.residual_noise_fraction ==
          doctest::Approx(static_cast<double>(still_noisy) / static_cast<double>(kept)));

    // Downstream: plain k-output model, stretched epoch budget.
    CHECK(out.downstream.best.model.output_dim() == 3u);
    const long long e_new = (10LL * static_cast<long long>(n) + static_cast<long long>(kept) - 1) /
                            static_cast<long long>(kept);
    CHECK(out.downstream.stats.size() == static_cast<std::size_t>(e_new));
    CHECK(out.downstream_accuracy ==
          doctest::Approx(*accuracy(out.downstream.best.model, val, AccuracyMode::kOverall)));
    // Anneal epochs rescaled with the stretch.
    CHECK(out.downstream.stats[0].lr == down_cfg.lr.initial_lr);
}

TEST_CASE("cleaning with the misclassification rule uses the renormalized argmax") {
    NoisyDataset train = inject_uniform(gen_blobs(3, 2, 60, 8.0, 21), 0.15, 22);
    const NoisyDataset val = gen_blobs(3, 2, 30, 8.0, 23);
    TrainConfig dac_cfg = small_config();
    dac_cfg.eliminate_misclassified = true;
    const CleanOutcome out = clean_and_retrain(train, val, dac_cfg, small_config());
    CHECK(out.report.eliminated == identify_misclassified(out.dac_run.best.model, train));
}

TEST_CASE("fixed alpha sweep classifies the two extremes") {
    // Label noise keeps the renormalized cross entropy bounded away from
    // zero, so a tiny alpha makes near-total abstention the optimum; a huge
    // alpha prices abstention out entirely.
    const Problem p{inject_uniform(gen_blobs(3, 2, 60, 8.0, 101), 0.30, 55),
                    gen_blobs(3, 2, 30, 8.0, 202)};
    TrainConfig base = small_config();
    base.epochs = 30;
    base.warmup_epochs = 1;
    base.lr = {0.1, {}, 0.5};
    const std::vector<double> alphas{1e-3, 1e6};
    const auto runs = fixed_alpha_sweep(p.train, p.val, base, alphas);
    REQUIRE(runs.size() == 2);

    CHECK(runs[0].alpha == 1e-3);
    REQUIRE(runs[0].terminal_gamma.has_value());
    CHECK(*runs[0].terminal_gamma > 0.99);  // abstention is nearly free
    CHECK(runs[0].classification == SaturationClass::kHigh);

    CHECK(runs[1].alpha == 1e6);
    REQUIRE(runs[1].terminal_gamma.has_value());
    CHECK(*runs[1].terminal_gamma < 0.01);  // abstention priced out
    CHECK(runs[1].classification == SaturationClass::kLow);
    CHECK_FALSE(runs[1].halted);

    const std::vector<double> bad{-0.5};
    CHECK_THROWS_AS(fixed_alpha_sweep(p.train, p.val, base, bad), InvalidInputError);
    CHECK_THROWS_AS(fixed_alpha_sweep(p.train, p.val, base, std::vector<double>{}),
                    InvalidInputError);
}

TEST_CASE("stats CSV schema") {
    // Dyadic values print exactly under the high-precision float format.
    std::vector<EpochStats> stats(2);
    stats[0] = {0, 1.5, 0.25, 0.75, std::nullopt, 0.125};
    stats[1] = {1, 1.25, 0.5, 0.8125, 0.0625, 0.0625};
    const fs::path p = temp_file("stats.csv");
    write_stats_csv(p, stats);
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,loss,gamma,val_acc,alpha,lr");
    std::getline(in, line);
    CHECK(line == "0,1.5,0.25,0.75,,0.125");
    std::getline(in, line);
    CHECK(line == "1,1.25,0.5,0.8125,0.0625,0.0625");
    CHECK_FALSE(std::getline(in, line));
}
