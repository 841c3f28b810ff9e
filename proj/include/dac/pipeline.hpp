#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dac/dataset.hpp"
#include "dac/errors.hpp"
#include "dac/mlp.hpp"

namespace dac {

/// A fixed alpha at or above this value (or +infinity) trains with the plain
/// (k+1)-class cross entropy instead: that is the exact large-alpha limit of
/// the abstention loss, whereas pushing, say, 1e6 through the literal formula
/// would multiply the first abstention-mass fluctuation into a parameter-
/// scrambling update. The limit, not the rounding error, is the intent.
inline constexpr double kPlainCeAlpha = 1e6;

struct TrainConfig {
    int epochs = 200;
    int warmup_epochs = 20;  // plain CE before abstention turns on
    // Auto-tuning schedule (ignored when fixed_alpha is set).
    double rho = 64.0;
    double mu = 0.05;
    double alpha_final = 1.0;
    std::optional<double> fixed_alpha;
    std::vector<std::size_t> hidden_dims{32};
    LrSchedule lr{0.1, {60, 120, 160}, 0.5};
    double momentum = 0.9;
    double weight_decay = 5e-4;
    bool nesterov = true;
    std::size_t batch_size = 64;
    std::uint64_t seed = 1;
    /// Cleaning eliminates misclassified instead of abstained samples.
    bool eliminate_misclassified = false;
};

void validate(const TrainConfig& cfg);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;  // mean per-sample loss actually optimized this epoch
    double gamma = 0.0;       // training-set abstention rate after the epoch
    double val_acc = 0.0;     // renormalized validation accuracy
    std::optional<double> alpha;  // absent during warm-up and on the plain-CE path
    double lr = 0.0;
};

struct TrainResult {
    Checkpoint best;  // model + optimizer + epoch at the best validation epoch
    int best_epoch = 0;
    double best_val_acc = 0.0;
    std::vector<EpochStats> stats;
};

/// Training halted on a numeric failure (non-finite parameter or abstention
/// saturation); carries the stats of the epochs that completed.
class HaltedRunError : public Error {
public:
    HaltedRunError(const std::string& msg, std::vector<EpochStats> partial, int epoch)
        : Error(msg + " (halted during epoch " + std::to_string(epoch) + ")"),
          partial_stats(std::move(partial)),
          halted_epoch(epoch) {}

    std::vector<EpochStats> partial_stats;
    int halted_epoch;
};

/// Trains a (k+1)-output network with the abstention loss: `warmup_epochs` of
/// plain cross entropy (during which the auto schedule observes the batches),
/// then the abstention phase with the scheduled or fixed alpha. The best
/// epoch maximizes renormalized validation accuracy, earliest epoch winning
/// ties. Fully deterministic in (datasets, config).
TrainResult train_dac(const NoisyDataset& train, const NoisyDataset& val, const TrainConfig& cfg);

/// Plain cross-entropy training over `n_outputs` logits (k for the cleaned
/// downstream model and baselines, k+1 for the large-alpha limit). Shares the
/// batching, seeding, and optimizer machinery with train_dac.
TrainResult train_plain(const NoisyDataset& train, const NoisyDataset& val,
                        const TrainConfig& cfg, std::size_t n_outputs);

/// Fraction of samples on which the full argmax picks the abstention output.
double abstention_rate(const MlpModel& m, const NoisyDataset& ds);

/// Indices the model abstains on (candidate noisy samples).
std::vector<std::size_t> identify_noisy(const MlpModel& m, const NoisyDataset& ds);

/// Indices where the renormalized argmax disagrees with the label.
std::vector<std::size_t> identify_misclassified(const MlpModel& m, const NoisyDataset& ds);

struct CleanReport {
    std::vector<std::size_t> eliminated;
    double eliminated_fraction = 0.0;
    /// Label noise remaining among retained samples; absent without
    /// ground-truth provenance (or when nothing is retained).
    std::optional<double> residual_noise_fraction;
    /// Precision/recall of the elimination against the randomized-label flag;
    /// absent without ground truth, precision absent when nothing was
    /// eliminated, recall absent when nothing was flagged.
    std::optional<double> noise_precision;
    std::optional<double> noise_recall;
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
};

struct CleanOutcome {
    TrainResult dac_run;
    CleanReport report;
    TrainResult downstream;  // plain k-class model trained on the retained samples
    double downstream_accuracy = 0.0;  // plain accuracy on the evaluation set
};

/// Full cleaning pipeline: abstention training on the noisy set, elimination
/// of the abstained (or misclassified) samples at the best epoch, then plain
/// k-class retraining on the retained subset. The downstream budget is
/// stretched by the eliminated fraction — epochs' = ceil(epochs / retained
/// fraction), anneal epochs rescaled proportionally — so the downstream model
/// sees as many samples as the configured budget intended.
/// Throws EmptyTrainingSetError if cleaning eliminates every sample.
CleanOutcome clean_and_retrain(const NoisyDataset& train, const NoisyDataset& val,
                               const TrainConfig& dac_cfg, const TrainConfig& downstream_cfg);

enum class SaturationClass { kLow, kHigh, kUnresolved };

struct SweepRun {
    double alpha = 0.0;
    std::vector<EpochStats> stats;
    bool halted = false;
    std::string halt_reason;
    std::optional<double> terminal_gamma;
    SaturationClass classification = SaturationClass::kUnresolved;
};

/// Runs train_dac once per alpha (fixed), classifying the terminal
/// abstention rate: < 0.01 low, > 0.99 high, otherwise unresolved. A halted
/// run keeps its partial stats instead of aborting the sweep.
std::vector<SweepRun> fixed_alpha_sweep(const NoisyDataset& train, const NoisyDataset& val,
                                        const TrainConfig& base, std::span<const double> alphas);

/// CSV emitter: header epoch,loss,gamma,val_acc,alpha,lr; absent alpha is an
/// empty field. %.17g formatting makes reruns byte-comparable.
void write_stats_csv(const std::filesystem::path& path, std::span<const EpochStats> stats);

}  // namespace dac
