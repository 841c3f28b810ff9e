#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "dac/errors.hpp"
#include "dac/metrics.hpp"
#include "dac/rng.hpp"

using namespace dac;
namespace fs = std::filesystem;

namespace {

// Model whose logits are exactly its input features.
MlpModel identity_model(std::size_t width) {
    MlpModel m = mlp_new({width, width}, 1);
    for (auto& v : m.weights[0].values()) v = 0.0;
    for (std::size_t i = 0; i < width; ++i) m.weights[0](i, i) = 1.0;
    for (auto& b : m.biases[0]) b = 0.0;
    return m;
}

// Dataset whose features double as the desired logits.
NoisyDataset logit_dataset(std::vector<std::vector<double>> rows, std::vector<std::int32_t> labels,
                           std::int32_t k, std::vector<std::uint8_t> flags = {}) {
    const std::size_t n = rows.size();
    const std::size_t d = rows.front().size();
    Matrix x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) x(i, j) = rows[i][j];
    }
    NoisyDataset ds;
    ds.features = std::move(x);
    ds.original_labels = labels;
    ds.labels = std::move(labels);
    ds.flags = flags.empty() ? std::vector<std::uint8_t>(n, 0) : std::move(flags);
    ds.k = k;
    ds.description = "handmade";
    ds.has_ground_truth = true;
    validate(ds);
    return ds;
}

fs::path temp_file(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "dac-metrics-tests";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("full and renormalized argmax, ties to the lowest index") {
    const NoisyDataset ds = logit_dataset(
        {{3.0, 1.0, 0.0}, {0.0, 1.0, 5.0}, {2.0, 2.0, 0.0}, {-1.0, 0.5, 0.5}},
        {0, 1, 0, 1}, 2);
    const MlpModel m = identity_model(3);

    const auto full = predict_full(m, ds);
    CHECK(full == std::vector<std::int32_t>{0, 2, 0, 1});  // row 3: tie 1 vs 2 -> 1

    const auto renorm = predict_renormalized(m, ds);
    CHECK(renorm == std::vector<std::int32_t>{0, 1, 0, 1});
}

TEST_CASE("abstention precision and recall from a hand confusion matrix") {
    // Abstention logit wins on rows 0, 1, 4. Structured flag on rows 0, 1, 2.
    const NoisyDataset ds = logit_dataset({{0.0, 0.0, 9.0},    // abstain, flagged -> tp
                                           {1.0, 0.0, 9.0},    // abstain, flagged -> tp
                                           {9.0, 0.0, 1.0},    // answer,  flagged -> fn
                                           {9.0, 0.0, 0.0},    // answer,  clean   -> tn
                                           {0.0, 1.0, 9.0},    // abstain, clean   -> fp
                                           {0.0, 9.0, 1.0}},   // answer,  clean   -> tn
                                          {0, 0, 0, 0, 1, 1}, 2,
                                          {kFlagStructured, kFlagStructured, kFlagStructured,
                                           0, 0, 0});
    const MlpModel m = identity_model(3);
    const AbstentionPR pr = abstention_pr(m, ds);
    CHECK(pr.tp == 2);
    CHECK(pr.fp == 1);
    CHECK(pr.fn == 1);
    CHECK(pr.tn == 2);
    REQUIRE(pr.precision.has_value());
    REQUIRE(pr.recall.has_value());
    CHECK(*pr.precision == doctest::Approx(2.0 / 3.0));
    CHECK(*pr.recall == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("abstention PR absent cases") {
    SUBCASE("model never abstains: precision absent, recall zero") {
        const NoisyDataset ds = logit_dataset({{9.0, 0.0, 0.0}, {0.0, 9.0, 0.0}}, {0, 1}, 2,
                                              {kFlagStructured, 0});
        const AbstentionPR pr = abstention_pr(identity_model(3), ds);
        CHECK_FALSE(pr.precision.has_value());
        REQUIRE(pr.recall.has_value());
        CHECK(*pr.recall == 0.0);
        CHECK(pr.fn == 1);
    }
    SUBCASE("nothing flagged: recall absent") {
        const NoisyDataset ds = logit_dataset({{0.0, 0.0, 9.0}, {9.0, 0.0, 0.0}}, {0, 0}, 2);
        const AbstentionPR pr = abstention_pr(identity_model(3), ds);
        CHECK_FALSE(pr.recall.has_value());
        REQUIRE(pr.precision.has_value());
        CHECK(*pr.precision == 0.0);  // the one abstention is a false positive
    }
    SUBCASE("alternate positive flag") {
        const NoisyDataset ds = logit_dataset({{0.0, 0.0, 9.0}, {9.0, 0.0, 0.0}}, {0, 0}, 2,
                                              {kFlagRandomized, kFlagRandomized});
        const AbstentionPR pr = abstention_pr(identity_model(3), ds, kFlagRandomized);
        REQUIRE(pr.recall.has_value());
        CHECK(*pr.recall == 0.5);
    }
    SUBCASE("needs k+1 outputs") {
        const NoisyDataset ds = logit_dataset({{1.0, 0.0}, {0.0, 1.0}}, {0, 1}, 2);
        CHECK_THROWS_AS(abstention_pr(identity_model(2), ds), InvalidInputError);
    }
    SUBCASE("needs provenance") {
        NoisyDataset ds = logit_dataset({{0.0, 0.0, 9.0}}, {0}, 2);
        ds.has_ground_truth = false;
        CHECK_THROWS_AS(abstention_pr(identity_model(3), ds), InvalidInputError);
    }
}

TEST_CASE("risk-coverage points from hand data") {
    const std::vector<double> conf{0.9, 0.6, 0.3};
    const std::vector<std::uint8_t> correct{1, 0, 1};
    const std::vector<double> thresholds{0.0, 0.5, 0.95};
    const auto pts = risk_coverage(conf, correct, thresholds);
    REQUIRE(pts.size() == 3);

    CHECK(pts[0].threshold == 0.0);
    CHECK(pts[0].coverage == doctest::Approx(1.0));
    REQUIRE(pts[0].risk.has_value());
    CHECK(*pts[0].risk == doctest::Approx(1.0 / 3.0));

    CHECK(pts[1].coverage == doctest::Approx(2.0 / 3.0));
    REQUIRE(pts[1].risk.has_value());
    CHECK(*pts[1].risk == doctest::Approx(0.5));

    CHECK(pts[2].coverage == 0.0);
    CHECK_FALSE(pts[2].risk.has_value());
}

TEST_CASE("coverage threshold comparison is inclusive") {
    const std::vector<double> conf{0.5};
    const std::vector<std::uint8_t> correct{1};
    const std::vector<double> thresholds{0.5};
    const auto pts = risk_coverage(conf, correct, thresholds);
    CHECK(pts[0].coverage == 1.0);
    REQUIRE(pts[0].risk.has_value());
    CHECK(*pts[0].risk == 0.0);
}

TEST_CASE("coverage is non-increasing in the threshold") {
    Rng rng(5);
    std::vector<double> conf(500);
    std::vector<std::uint8_t> correct(500);
    for (std::size_t i = 0; i < conf.size(); ++i) {
        conf[i] = rng.uniform01();
        correct[i] = static_cast<std::uint8_t>(rng.uniform01() < 0.7);
    }
    const auto pts = risk_coverage(conf, correct, default_thresholds());
    REQUIRE(pts.size() == 101);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        CHECK(pts[i].coverage <= pts[i - 1].coverage);
    }
    for (const auto& p : pts) {
        if (p.risk) {
            CHECK(*p.risk >= 0.0);
            CHECK(*p.risk <= 1.0);
            CHECK(p.coverage > 0.0);
        } else {
            CHECK(p.coverage == 0.0);
        }
    }
}

TEST_CASE("risk_coverage input validation") {
    const std::vector<double> conf{0.5, 0.6};
    const std::vector<std::uint8_t> one{1};
    const std::vector<std::uint8_t> two{1, 0};
    const std::vector<double> thresholds{0.5};
    CHECK_THROWS_AS(risk_coverage(conf, one, thresholds), InvalidInputError);
    CHECK_THROWS_AS(risk_coverage(conf, two, std::vector<double>{}), InvalidInputError);
    CHECK_THROWS_AS(risk_coverage(std::vector<double>{}, std::vector<std::uint8_t>{}, thresholds),
                    InvalidInputError);
}

TEST_CASE("default thresholds are 0.00 .. 1.00 in steps of 0.01") {
    const auto t = default_thresholds();
    REQUIRE(t.size() == 101);
    CHECK(t.front() == 0.0);
    CHECK(t.back() == 1.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(t[i] == doctest::Approx(0.01 * static_cast<double>(i)).epsilon(1e-12));
    }
}

TEST_CASE("model curve renormalizes confidence over the real classes") {
    // Row 0: logits (2, 0, anything) -> renormalized confidence e^2/(e^2+1).
    // Row 1: logits (0, 1, 3) -> confidence e/(1+e), prediction 1 (correct).
    const NoisyDataset ds = logit_dataset({{2.0, 0.0, 5.0}, {0.0, 1.0, 3.0}}, {0, 1}, 2);
    const MlpModel m = identity_model(3);
    const double c0 = std::exp(2.0) / (std::exp(2.0) + 1.0);  // ~0.881
    const double c1 = std::exp(1.0) / (std::exp(1.0) + 1.0);  // ~0.731

    const std::vector<double> thresholds{0.0, 0.8, 0.9};
    const auto pts = risk_coverage_curve(m, ds, thresholds);
    CHECK(pts[0].coverage == 1.0);
    CHECK(*pts[0].risk == 0.0);  // both renormalized argmaxes match the labels
    CHECK(pts[1].coverage == doctest::Approx(0.5));  // only c0 >= 0.8
    CHECK(*pts[1].risk == 0.0);
    CHECK(pts[2].coverage == 0.0);
    CHECK(c0 > 0.8);
    CHECK(c1 < 0.8);

    // A plain k-output model gives the same numbers when the abstention
    // column is dropped (renormalization is a no-op).
    const NoisyDataset plain = logit_dataset({{2.0, 0.0}, {0.0, 1.0}}, {0, 1}, 2);
    const auto pts2 = risk_coverage_curve(identity_model(2), plain, thresholds);
    CHECK(pts2[1].coverage == doctest::Approx(0.5));
}

TEST_CASE("residual noise counts surviving label damage") {
    const std::vector<std::int32_t> labels{0, 1, 2, 0};
    const std::vector<std::int32_t> originals{0, 1, 0, 1};
    const auto r = residual_noise(labels, originals);
    REQUIRE(r.has_value());
    CHECK(*r == 0.5);

    CHECK_FALSE(residual_noise({}, {}).has_value());
    const std::vector<std::int32_t> clean{3, 3};
    CHECK(*residual_noise(clean, clean) == 0.0);
    const std::vector<std::int32_t> one{3};
    CHECK_THROWS_AS(residual_noise(one, clean), InvalidInputError);
}

TEST_CASE("accuracy modes on a hand example") {
    // Row 0: answers 0, label 0 -> right everywhere.
    // Row 1: answers 1, label 0 -> wrong everywhere.
    // Row 2: abstains, renorm argmax 0, label 0 -> only renormalized counts it.
    // Row 3: abstains, renorm argmax 1, label 1 -> only renormalized counts it.
    const NoisyDataset ds = logit_dataset(
        {{5.0, 0.0, 0.0}, {0.0, 5.0, 0.0}, {1.0, 0.0, 5.0}, {0.0, 1.0, 5.0}},
        {0, 0, 0, 1}, 2);
    const MlpModel m = identity_model(3);
    CHECK(*accuracy(m, ds, AccuracyMode::kOverall) == doctest::Approx(0.25));
    CHECK(*accuracy(m, ds, AccuracyMode::kNonAbstainedOnly) == doctest::Approx(0.5));
    CHECK(*accuracy(m, ds, AccuracyMode::kRenormalized) == doctest::Approx(0.75));
}

TEST_CASE("accuracy when every sample is abstained") {
    const NoisyDataset ds = logit_dataset({{0.0, 0.0, 9.0}, {1.0, 0.0, 9.0}}, {0, 1}, 2);
    const MlpModel m = identity_model(3);
    CHECK(*accuracy(m, ds, AccuracyMode::kOverall) == 0.0);
    CHECK_FALSE(accuracy(m, ds, AccuracyMode::kNonAbstainedOnly).has_value());
    CHECK(*accuracy(m, ds, AccuracyMode::kRenormalized) == 0.5);
}

TEST_CASE("accuracy modes coincide for a plain k-output model") {
    const NoisyDataset ds = logit_dataset({{2.0, 0.0}, {0.0, 2.0}, {1.0, 0.0}}, {0, 1, 1}, 2);
    const MlpModel m = identity_model(2);
    const double a = *accuracy(m, ds, AccuracyMode::kOverall);
    CHECK(a == doctest::Approx(2.0 / 3.0));
    CHECK(*accuracy(m, ds, AccuracyMode::kNonAbstainedOnly) == a);
    CHECK(*accuracy(m, ds, AccuracyMode::kRenormalized) == a);
}

TEST_CASE("model/dataset shape mismatches are rejected") {
    const NoisyDataset ds = logit_dataset({{1.0, 0.0, 0.0}}, {0}, 2);
    CHECK_THROWS_AS(predict_full(identity_model(4), ds), InvalidInputError);   // wrong input dim
    const NoisyDataset wide = logit_dataset({{1.0, 0.0, 0.0, 0.0}}, {0}, 2);
    CHECK_THROWS_AS(accuracy(identity_model(4), wide, AccuracyMode::kOverall),
                    InvalidInputError);  // 4 outputs for k=2 is neither k nor k+1
}

TEST_CASE("risk-coverage CSV schema") {
    std::vector<RiskCoveragePoint> pts(3);
    pts[0] = {0.0, 1.0, 0.25};
    pts[1] = {0.5, 0.5, 0.125};
    pts[2] = {1.0, 0.0, std::nullopt};
    const fs::path p = temp_file("curve.csv");
    write_risk_coverage_csv(p, pts);

    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    CHECK(line == "threshold,coverage,risk");
    std::getline(in, line);
    CHECK(line == "0,1,0.25");
    std::getline(in, line);
    CHECK(line == "0.5,0.5,0.125");
    std::getline(in, line);
    CHECK(line == "1,0,");
    CHECK_FALSE(std::getline(in, line));
}
