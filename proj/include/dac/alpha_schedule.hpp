#pragma once

#include <cstdint>
#include <optional>

namespace dac {

/// Configuration of the abstention-weight schedule.
///
/// Training runs `total_epochs` epochs. The first `warmup_epochs` use the
/// plain cross entropy while the scheduler watches the batches; at the end of
/// the warm-up it initializes alpha from the smoothed performance estimate and
/// then ramps it linearly so it reaches `alpha_final` at the end of training.
struct SchedulerConfig {
    int total_epochs = 200;   // E
    int warmup_epochs = 20;   // L, 0 <= L < E
    double rho = 64.0;        // alpha initialization divisor
    double mu = 0.05;         // smoothing coefficient for the moving average
    double alpha_final = 1.0; // ramp target at the end of training
};

/// Throws ConfigError on an unusable configuration.
void validate(const SchedulerConfig& cfg);

/// State of the auto-tuning schedule. Pure value type: replaying an identical
/// observation stream reproduces the state bit for bit.
class AlphaScheduler {
public:
    explicit AlphaScheduler(const SchedulerConfig& cfg);

    /// Feeds one warm-up batch. `abst_mass` is the batch mean abstention
    /// probability, `true_ce` the batch mean renormalized cross entropy
    /// -log(p_j / (1 - p_abst)); the performance proxy is their combination
    /// beta = (1 - abst_mass) * true_ce. Iteration 0 seeds the moving average,
    /// afterwards beta_tilde <- (1 - mu) * beta_tilde + mu * beta.
    ///
    /// Only legal during warm-up (epoch < warmup_epochs); throws
    /// SchedulerPhaseError afterwards and SequencingError when epochs or
    /// iterations go backwards.
    void observe_batch(double abst_mass, double true_ce, std::int64_t iteration, int epoch);

    /// Announces the boundary at the *start* of `epoch` (0-based; epoch ==
    /// total_epochs marks the end of the run). Returns the alpha to use for
    /// that epoch: absent during warm-up, beta_tilde / rho at the end of the
    /// warm-up, then increased by delta_alpha exactly once per new epoch so
    /// the value at epoch == total_epochs is alpha_final. Alpha never drops
    /// below zero. Epochs must be non-decreasing; a repeated epoch returns the
    /// same value without advancing the ramp.
    std::optional<double> epoch_boundary(int epoch);

    double beta_tilde() const { return beta_tilde_; }
    bool alpha_set() const { return alpha_set_; }
    std::optional<double> alpha() const;
    double delta_alpha() const { return delta_alpha_; }
    const SchedulerConfig& config() const { return cfg_; }

private:
    SchedulerConfig cfg_;
    double beta_tilde_ = 0.0;
    bool beta_seeded_ = false;
    double alpha_ = 0.0;
    bool alpha_set_ = false;
    double delta_alpha_ = 0.0;
    int ramp_epoch_ = -1;           // last epoch whose boundary advanced the ramp
    int last_boundary_epoch_ = -1;  // ordering guard
    std::int64_t last_iteration_ = -1;
    int last_observe_epoch_ = -1;
};

}  // namespace dac
