#include "dac/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "dac/errors.hpp"
#include "dac/loss.hpp"

namespace dac {

namespace {

void check_model_fits(const MlpModel& m, const NoisyDataset& ds, bool needs_abstention) {
    if (m.input_dim() != ds.d()) {
        throw InvalidInputError("model input dimension does not match the dataset");
    }
    const std::size_t k = static_cast<std::size_t>(ds.k);
    if (needs_abstention) {
        if (m.output_dim() != k + 1) {
            throw InvalidInputError("abstention metrics need a model with k+1 outputs");
        }
    } else if (m.output_dim() != k && m.output_dim() != k + 1) {
        throw InvalidInputError("model output width must be k or k+1");
    }
}

std::size_t argmax_range(std::span<const double> row, std::size_t count) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < count; ++j) {
        if (row[j] > row[best]) best = j;
    }
    return best;
}

}  // namespace

std::vector<std::int32_t> predict_full(const MlpModel& m, const NoisyDataset& ds) {
    check_model_fits(m, ds, false);
    const Matrix logits = forward(m, ds.features);
    std::vector<std::int32_t> pred(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        pred[i] = static_cast<std::int32_t>(argmax_range(logits.row(i), logits.cols()));
    }
    return pred;
}

std::vector<std::int32_t> predict_renormalized(const MlpModel& m, const NoisyDataset& ds) {
    check_model_fits(m, ds, false);
    const Matrix logits = forward(m, ds.features);
    const std::size_t k = static_cast<std::size_t>(ds.k);
    std::vector<std::int32_t> pred(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        pred[i] = static_cast<std::int32_t>(argmax_range(logits.row(i), k));
    }
    return pred;
}

AbstentionPR abstention_pr(const MlpModel& m, const NoisyDataset& ds,
                           std::uint8_t positive_flags) {
    check_model_fits(m, ds, true);
    if (!ds.has_ground_truth) {
        throw InvalidInputError("abstention_pr needs corruption provenance flags");
    }
    const auto pred = predict_full(m, ds);
    const std::int32_t abst = ds.k;
    AbstentionPR pr;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const bool predicted = pred[i] == abst;
        const bool actual = (ds.flags[i] & positive_flags) != 0;
        if (predicted && actual) ++pr.tp;
        else if (predicted && !actual) ++pr.fp;
        else if (!predicted && actual) ++pr.fn;
        else ++pr.tn;
    }
    if (pr.tp + pr.fp > 0) {
        pr.precision = static_cast<double>(pr.tp) / static_cast<double>(pr.tp + pr.fp);
    }
    if (pr.tp + pr.fn > 0) {
        pr.recall = static_cast<double>(pr.tp) / static_cast<double>(pr.tp + pr.fn);
    }
    return pr;
}

std::vector<double> default_thresholds() {
    std::vector<double> t(101);
    for (int i = 0; i <= 100; ++i) t[static_cast<std::size_t>(i)] = i / 100.0;
    return t;
}

std::vector<RiskCoveragePoint> risk_coverage(std::span<const double> confidence,
                                             std::span<const std::uint8_t> correct,
                                             std::span<const double> thresholds) {
    if (confidence.size() != correct.size()) {
        throw InvalidInputError("risk_coverage: confidence/correctness size mismatch");
    }
    if (confidence.empty()) throw InvalidInputError("risk_coverage: empty sample set");
    if (thresholds.empty()) throw InvalidInputError("risk_coverage: empty threshold list");
    std::vector<RiskCoveragePoint> out;
    out.reserve(thresholds.size());
    const double n = static_cast<double>(confidence.size());
    for (double t : thresholds) {
        std::int64_t covered = 0;
        std::int64_t wrong = 0;
        for (std::size_t i = 0; i < confidence.size(); ++i) {
            if (confidence[i] >= t) {
                ++covered;
                if (!correct[i]) ++wrong;
            }
        }
        RiskCoveragePoint p;
        p.threshold = t;
        p.coverage = static_cast<double>(covered) / n;
        if (covered > 0) p.risk = static_cast<double>(wrong) / static_cast<double>(covered);
        out.push_back(p);
    }
    return out;
}

std::vector<RiskCoveragePoint> risk_coverage_curve(const MlpModel& m, const NoisyDataset& ds,
                                                   std::span<const double> thresholds) {
    check_model_fits(m, ds, false);
    const Matrix probs = softmax_rows(forward(m, ds.features));
    const std::size_t k = static_cast<std::size_t>(ds.k);
    std::vector<double> confidence(ds.n());
    std::vector<std::uint8_t> correct(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        auto row = probs.row(i);
        double real_mass = 0.0;
        for (std::size_t j = 0; j < k; ++j) real_mass += row[j];
        if (real_mass < kAbstentionEps) {
            throw SaturationError("abstention mass reached 1 within tolerance");
        }
        const std::size_t best = argmax_range(row, k);
        confidence[i] = row[best] / real_mass;
        correct[i] = static_cast<std::int32_t>(best) == ds.labels[i] ? 1 : 0;
    }
    return risk_coverage(confidence, correct, thresholds);
}

std::optional<double> residual_noise(std::span<const std::int32_t> retained_labels,
                                     std::span<const std::int32_t> retained_originals) {
    if (retained_labels.size() != retained_originals.size()) {
        throw InvalidInputError("residual_noise: size mismatch");
    }
    if (retained_labels.empty()) return std::nullopt;
    std::int64_t noisy = 0;
    for (std::size_t i = 0; i < retained_labels.size(); ++i) {
        if (retained_labels[i] != retained_originals[i]) ++noisy;
    }
    return static_cast<double>(noisy) / static_cast<double>(retained_labels.size());
}

std::optional<double> accuracy(const MlpModel& m, const NoisyDataset& ds, AccuracyMode mode) {
    check_model_fits(m, ds, false);
    if (ds.n() == 0) return std::nullopt;
    const std::size_t k = static_cast<std::size_t>(ds.k);
    const bool has_abstention = m.output_dim() == k + 1;
    const Matrix logits = forward(m, ds.features);
    std::int64_t considered = 0;
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        auto row = logits.row(i);
        if (!has_abstention || mode == AccuracyMode::kRenormalized) {
            const std::size_t best = argmax_range(row, k);
            ++considered;
            if (static_cast<std::int32_t>(best) == ds.labels[i]) ++correct;
            continue;
        }
        const std::size_t best = argmax_range(row, k + 1);
        if (mode == AccuracyMode::kOverall) {
            ++considered;
            if (best < k && static_cast<std::int32_t>(best) == ds.labels[i]) ++correct;
        } else {  // kNonAbstainedOnly
            if (best < k) {
                ++considered;
                if (static_cast<std::int32_t>(best) == ds.labels[i]) ++correct;
            }
        }
    }
    if (considered == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(considered);
}

void write_risk_coverage_csv(const std::filesystem::path& path,
                             std::span<const RiskCoveragePoint> points) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "threshold,coverage,risk\n";
    char buf[96];
    for (const auto& p : points) {
        if (p.risk) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.threshold, p.coverage,
                          *p.risk);
        } else {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,\n", p.threshold, p.coverage);
        }
        out << buf;
    }
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace dac
