#include "dac/alpha_schedule.hpp"

#include <cmath>

#include "dac/errors.hpp"

namespace dac {

void validate(const SchedulerConfig& cfg) {
    if (cfg.total_epochs <= 0) throw ConfigError("total_epochs must be positive");
    if (cfg.warmup_epochs < 0 || cfg.warmup_epochs >= cfg.total_epochs) {
        throw ConfigError("warmup_epochs must satisfy 0 <= L < total_epochs");
    }
    if (!(cfg.rho > 0.0) || !std::isfinite(cfg.rho)) throw ConfigError("rho must be positive");
    if (!(cfg.mu >= 0.0 && cfg.mu <= 1.0)) throw ConfigError("mu must lie in [0, 1]");
    if (!std::isfinite(cfg.alpha_final) || cfg.alpha_final < 0.0) {
        throw ConfigError("alpha_final must be finite and non-negative");
    }
}

AlphaScheduler::AlphaScheduler(const SchedulerConfig& cfg) : cfg_(cfg) { validate(cfg); }

std::optional<double> AlphaScheduler::alpha() const {
    if (!alpha_set_) return std::nullopt;
    return alpha_;
}

void AlphaScheduler::observe_batch(double abst_mass, double true_ce, std::int64_t iteration,
                                   int epoch) {
    if (!(abst_mass >= 0.0 && abst_mass <= 1.0)) {
        throw InvalidInputError("observe_batch: abstention mass outside [0, 1]");
    }
    if (!std::isfinite(true_ce) || true_ce < 0.0) {
        throw InvalidInputError("observe_batch: cross entropy must be finite and non-negative");
    }
    if (epoch >= cfg_.warmup_epochs) {
        throw SchedulerPhaseError("observe_batch called after the warm-up window closed");
    }
    if (epoch < last_observe_epoch_ || iteration <= last_iteration_) {
        throw SequencingError("observe_batch: iterations/epochs must advance");
    }
    last_observe_epoch_ = epoch;
    last_iteration_ = iteration;

    const double beta = (1.0 - abst_mass) * true_ce;
    if (!beta_seeded_) {
        beta_tilde_ = beta;
        beta_seeded_ = true;
    } else {
        beta_tilde_ = (1.0 - cfg_.mu) * beta_tilde_ + cfg_.mu * beta;
    }
}

std::optional<double> AlphaScheduler::epoch_boundary(int epoch) {
    if (epoch < 0 || epoch > cfg_.total_epochs) {
        throw InvalidInputError("epoch_boundary: epoch outside 0..total_epochs");
    }
    if (epoch < last_boundary_epoch_) {
        throw SequencingError("epoch_boundary: epochs must be non-decreasing");
    }
    last_boundary_epoch_ = epoch;

    if (epoch < cfg_.warmup_epochs) return std::nullopt;

    if (!alpha_set_) {
        alpha_ = beta_tilde_ / cfg_.rho;
        delta_alpha_ =
            (cfg_.alpha_final - alpha_) / static_cast<double>(cfg_.total_epochs - cfg_.warmup_epochs);
        alpha_set_ = true;
        ramp_epoch_ = epoch;
        return alpha_;
    }
    if (epoch > ramp_epoch_) {
        alpha_ += delta_alpha_;
        if (alpha_ < 0.0) alpha_ = 0.0;
        ramp_epoch_ = epoch;
    }
    return alpha_;
}

}  // namespace dac
