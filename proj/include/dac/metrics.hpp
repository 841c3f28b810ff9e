#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dac/dataset.hpp"
#include "dac/mlp.hpp"

namespace dac {

/// Argmax over all model outputs (ties break toward the lower index). For a
/// k+1-output model the abstention class can win.
std::vector<std::int32_t> predict_full(const MlpModel& m, const NoisyDataset& ds);

/// Argmax over the first k outputs only (abstention mass ignored).
std::vector<std::int32_t> predict_renormalized(const MlpModel& m, const NoisyDataset& ds);

/// Precision/recall of abstention against a ground-truth flag. A sample is
/// predicted positive when the abstention output wins the full argmax;
/// it is actually positive when any of `positive_flags` is set. Precision is
/// absent when the model never abstains, recall when no sample is flagged.
struct AbstentionPR {
    std::optional<double> precision;
    std::optional<double> recall;
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;
};

AbstentionPR abstention_pr(const MlpModel& m, const NoisyDataset& ds,
                           std::uint8_t positive_flags = kFlagStructured);

/// One point of the selective-prediction trade-off. risk is absent (never 0)
/// when nothing is covered at this threshold.
struct RiskCoveragePoint {
    double threshold = 0.0;
    double coverage = 0.0;
    std::optional<double> risk;
};

/// 101 thresholds 0.00, 0.01, ..., 1.00.
std::vector<double> default_thresholds();

/// Core curve computation from per-sample confidences and correctness
/// (nonzero = correct).
std::vector<RiskCoveragePoint> risk_coverage(std::span<const double> confidence,
                                             std::span<const std::uint8_t> correct,
                                             std::span<const double> thresholds);

/// Curve for a model on a dataset: confidence is the winning renormalized
/// class probability, correctness compares the renormalized argmax with the
/// label. Works for k- and k+1-output models (for plain k-output models the
/// renormalization is a no-op).
std::vector<RiskCoveragePoint> risk_coverage_curve(const MlpModel& m, const NoisyDataset& ds,
                                                   std::span<const double> thresholds);

/// Fraction of retained samples whose label still differs from the original.
/// Absent for an empty retained set.
std::optional<double> residual_noise(std::span<const std::int32_t> retained_labels,
                                     std::span<const std::int32_t> retained_originals);

enum class AccuracyMode {
    kOverall,           // abstention counts as an error
    kNonAbstainedOnly,  // accuracy among answered samples; absent if none
    kRenormalized,      // argmax over real classes only
};

/// Classification accuracy of a k- or k+1-output model on the dataset's
/// current labels. For k-output models all modes coincide.
std::optional<double> accuracy(const MlpModel& m, const NoisyDataset& ds, AccuracyMode mode);

/// CSV emitter: header threshold,coverage,risk; absent risk is an empty field.
void write_risk_coverage_csv(const std::filesystem::path& path,
                             std::span<const RiskCoveragePoint> points);

}  // namespace dac
