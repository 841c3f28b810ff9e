#include "dac/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "dac/alpha_schedule.hpp"
#include "dac/kernels.hpp"
#include "dac/loss.hpp"
#include "dac/metrics.hpp"
#include "dac/rng.hpp"

namespace dac {

void validate(const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (cfg.warmup_epochs < 0 || cfg.warmup_epochs >= cfg.epochs) {
        throw ConfigError("warmup_epochs must satisfy 0 <= L < epochs");
    }
    if (cfg.batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(cfg.weight_decay >= 0.0) || !std::isfinite(cfg.weight_decay)) {
        throw ConfigError("weight_decay must be finite and non-negative");
    }
    if (!(cfg.lr.initial_lr > 0.0) || !std::isfinite(cfg.lr.initial_lr)) {
        throw ConfigError("initial learning rate must be positive");
    }
    if (!(cfg.lr.anneal_factor > 0.0 && cfg.lr.anneal_factor <= 1.0)) {
        throw ConfigError("anneal factor must lie in (0, 1]");
    }
    for (std::size_t h : cfg.hidden_dims) {
        if (h == 0) throw ConfigError("hidden layer width must be positive");
    }
    if (cfg.fixed_alpha) {
        const double fa = *cfg.fixed_alpha;
        if (!(fa >= 0.0)) throw ConfigError("fixed_alpha must be non-negative (or +inf)");
    } else {
        // The schedule will actually run; check its knobs.
        SchedulerConfig sc{cfg.epochs, cfg.warmup_epochs, cfg.rho, cfg.mu, cfg.alpha_final};
        validate(sc);
    }
}

namespace {

enum class LossMode { kPlainCe, kDacSchedule, kDacFixed };

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), src.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        auto s = src.row(rows[r]);
        std::copy(s.begin(), s.end(), out.row(r).begin());
    }
    return out;
}

std::vector<std::int32_t> gather_labels(const std::vector<std::int32_t>& labels,
                                        std::span<const std::size_t> rows) {
    std::vector<std::int32_t> out(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) out[r] = labels[rows[r]];
    return out;
}

void check_datasets(const NoisyDataset& train, const NoisyDataset& val) {
    validate(train);
    validate(val);
    if (train.n() == 0) throw EmptyTrainingSetError("training set is empty");
    if (val.n() == 0) throw InvalidInputError("validation set is empty");
    if (train.k != val.k || train.d() != val.d()) {
        throw InvalidInputError("train/val disagree on class count or feature width");
    }
}

TrainResult run_training(const NoisyDataset& train, const NoisyDataset& val,
                         const TrainConfig& cfg, std::size_t n_outputs, LossMode mode,
                         double fixed_alpha) {
    check_datasets(train, val);
    validate(cfg);
    const std::size_t k = static_cast<std::size_t>(train.k);
    if (n_outputs != k && n_outputs != k + 1) {
        throw ConfigError("model output width must be k or k+1");
    }
    const bool has_abstention = n_outputs == k + 1;

    std::vector<std::size_t> dims;
    dims.push_back(train.d());
    dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
    dims.push_back(n_outputs);

    MlpModel model = mlp_new(dims, seed_for(cfg.seed, "model-init"));
    OptimizerState opt = optimizer_new(model, cfg.momentum, cfg.weight_decay, cfg.nesterov);
    Rng shuffle_rng(seed_for(cfg.seed, "shuffle"));

    AlphaScheduler scheduler(
        mode == LossMode::kDacSchedule
            ? SchedulerConfig{cfg.epochs, cfg.warmup_epochs, cfg.rho, cfg.mu, cfg.alpha_final}
            : SchedulerConfig{});

    const std::size_t n = train.n();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    TrainResult result;
    result.best_val_acc = -std::numeric_limits<double>::infinity();
    std::int64_t iteration = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        try {
            const double lr = lr_at(cfg.lr, epoch);
            std::optional<double> alpha_now;
            if (mode == LossMode::kDacSchedule) {
                alpha_now = scheduler.epoch_boundary(epoch);
            } else if (mode == LossMode::kDacFixed && epoch >= cfg.warmup_epochs) {
                alpha_now = fixed_alpha;
            }
            const bool dac_phase = mode != LossMode::kPlainCe && epoch >= cfg.warmup_epochs;

            shuffle_rng.shuffle(perm);
            double loss_sum = 0.0;
            for (std::size_t start = 0; start < n; start += cfg.batch_size) {
                const std::size_t stop = std::min(n, start + cfg.batch_size);
                const std::span<const std::size_t> rows(perm.data() + start, stop - start);
                const Matrix x = gather_rows(train.features, rows);
                const std::vector<std::int32_t> y = gather_labels(train.labels, rows);

                ForwardTrace trace;
                const Matrix logits = forward_traced(model, x, trace);
                Matrix logit_grad;
                BatchEval be;
                if (dac_phase) {
                    be = dac_batch_grad(logits, y, *alpha_now, logit_grad);
                } else {
                    be = ce_batch_grad(logits, y, logit_grad);
                    if (mode == LossMode::kDacSchedule) {
                        const BatchEval diag = dac_batch_eval(logits, y);
                        scheduler.observe_batch(diag.mean_abst_mass, diag.mean_true_ce, iteration,
                                                epoch);
                    }
                }
                const Gradients g = backward(model, trace, logit_grad);
                sgd_step(model, opt, g, lr);
                loss_sum += be.mean_loss * static_cast<double>(rows.size());
                ++iteration;
            }

            EpochStats st;
            st.epoch = epoch;
            st.train_loss = loss_sum / static_cast<double>(n);
            st.gamma = has_abstention ? abstention_rate(model, train) : 0.0;
            st.val_acc = accuracy(model, val, AccuracyMode::kRenormalized).value();
            st.alpha = dac_phase ? alpha_now : std::nullopt;
            st.lr = lr;
            result.stats.push_back(st);

            if (st.val_acc > result.best_val_acc) {
                result.best_val_acc = st.val_acc;
                result.best_epoch = epoch;
                result.best = Checkpoint{model, opt, epoch};
            }
        } catch (const NumericError& e) {
            throw HaltedRunError(e.what(), result.stats, epoch);
        } catch (const SaturationError& e) {
            throw HaltedRunError(e.what(), result.stats, epoch);
        }
    }
    return result;
}

}  // namespace

TrainResult train_dac(const NoisyDataset& train, const NoisyDataset& val, const TrainConfig& cfg) {
    validate(cfg);
    const std::size_t outputs = static_cast<std::size_t>(train.k) + 1;
    if (cfg.fixed_alpha) {
        const double fa = *cfg.fixed_alpha;
        if (std::isinf(fa) || fa >= kPlainCeAlpha) {
            // Exact large-alpha limit: abstention is priced out entirely.
            return run_training(train, val, cfg, outputs, LossMode::kPlainCe, 0.0);
        }
        return run_training(train, val, cfg, outputs, LossMode::kDacFixed, fa);
    }
    return run_training(train, val, cfg, outputs, LossMode::kDacSchedule, 0.0);
}

TrainResult train_plain(const NoisyDataset& train, const NoisyDataset& val,
                        const TrainConfig& cfg, std::size_t n_outputs) {
    validate(cfg);
    return run_training(train, val, cfg, n_outputs, LossMode::kPlainCe, 0.0);
}

double abstention_rate(const MlpModel& m, const NoisyDataset& ds) {
    if (ds.n() == 0) throw InvalidInputError("abstention_rate: empty dataset");
    if (m.output_dim() != static_cast<std::size_t>(ds.k) + 1) {
        throw InvalidInputError("abstention_rate needs a model with k+1 outputs");
    }
    const auto pred = predict_full(m, ds);
    std::int64_t abst = 0;
    for (std::int32_t p : pred) {
        if (p == ds.k) ++abst;
    }
    return static_cast<double>(abst) / static_cast<double>(ds.n());
}

std::vector<std::size_t> identify_noisy(const MlpModel& m, const NoisyDataset& ds) {
    if (m.output_dim() != static_cast<std::size_t>(ds.k) + 1) {
        throw InvalidInputError("identify_noisy needs a model with k+1 outputs");
    }
    const auto pred = predict_full(m, ds);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == ds.k) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> identify_misclassified(const MlpModel& m, const NoisyDataset& ds) {
    const auto pred = predict_renormalized(m, ds);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] != ds.labels[i]) out.push_back(i);
    }
    return out;
}

CleanOutcome clean_and_retrain(const NoisyDataset& train, const NoisyDataset& val,
                               const TrainConfig& dac_cfg, const TrainConfig& downstream_cfg) {
    validate(downstream_cfg);
    CleanOutcome outcome;
    outcome.dac_run = train_dac(train, val, dac_cfg);
    const MlpModel& best = outcome.dac_run.best.model;

    CleanReport& report = outcome.report;
    report.eliminated = dac_cfg.eliminate_misclassified ? identify_misclassified(best, train)
                                                        : identify_noisy(best, train);
    const std::size_t n = train.n();
    const std::size_t n_elim = report.eliminated.size();
    if (n_elim == n) {
        throw EmptyTrainingSetError("cleaning eliminated every training sample");
    }
    report.eliminated_fraction = static_cast<double>(n_elim) / static_cast<double>(n);

    std::vector<bool> is_eliminated(n, false);
    for (std::size_t i : report.eliminated) is_eliminated[i] = true;
    std::vector<std::size_t> retained;
    retained.reserve(n - n_elim);
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_eliminated[i]) retained.push_back(i);
    }

    if (train.has_ground_truth) {
        std::vector<std::int32_t> kept_labels, kept_orig;
        kept_labels.reserve(retained.size());
        kept_orig.reserve(retained.size());
        for (std::size_t i : retained) {
            kept_labels.push_back(train.labels[i]);
            kept_orig.push_back(train.original_labels[i]);
        }
        report.residual_noise_fraction = residual_noise(kept_labels, kept_orig);
        for (std::size_t i = 0; i < n; ++i) {
            const bool flagged = train.randomized(i);
            if (is_eliminated[i] && flagged) ++report.tp;
            else if (is_eliminated[i] && !flagged) ++report.fp;
            else if (flagged) ++report.fn;
        }
        if (report.tp + report.fp > 0) {
            report.noise_precision =
                static_cast<double>(report.tp) / static_cast<double>(report.tp + report.fp);
        }
        if (report.tp + report.fn > 0) {
            report.noise_recall =
                static_cast<double>(report.tp) / static_cast<double>(report.tp + report.fn);
        }
    }

    // Retrain on the survivors with the budget stretched so the downstream
    // model still consumes the configured number of sample visits.
    TrainConfig down = downstream_cfg;
    const long long e_new =
        (static_cast<long long>(downstream_cfg.epochs) * static_cast<long long>(n) +
         static_cast<long long>(retained.size()) - 1) /
        static_cast<long long>(retained.size());
    down.epochs = static_cast<int>(e_new);
    down.warmup_epochs = 0;
    for (int& a : down.lr.anneal_epochs) {
        a = static_cast<int>(std::llround(static_cast<double>(a) * static_cast<double>(e_new) /
                                          static_cast<double>(downstream_cfg.epochs)));
    }

    const NoisyDataset cleaned = subset(train, retained);
    outcome.downstream = train_plain(cleaned, val, down, static_cast<std::size_t>(train.k));
    outcome.downstream_accuracy =
        accuracy(outcome.downstream.best.model, val, AccuracyMode::kOverall).value();
    return outcome;
}

std::vector<SweepRun> fixed_alpha_sweep(const NoisyDataset& train, const NoisyDataset& val,
                                        const TrainConfig& base, std::span<const double> alphas) {
    if (alphas.empty()) throw InvalidInputError("fixed_alpha_sweep: empty alpha list");
    for (double a : alphas) {
        if (!(a >= 0.0)) throw InvalidInputError("fixed_alpha_sweep: alpha must be >= 0");
    }
    std::vector<SweepRun> runs;
    runs.reserve(alphas.size());
    for (double a : alphas) {
        TrainConfig cfg = base;
        cfg.fixed_alpha = a;
        SweepRun run;
        run.alpha = a;
        try {
            run.stats = train_dac(train, val, cfg).stats;
        } catch (const HaltedRunError& e) {
            run.stats = e.partial_stats;
            run.halted = true;
            run.halt_reason = e.what();
        }
        if (!run.stats.empty()) {
            run.terminal_gamma = run.stats.back().gamma;
            if (*run.terminal_gamma < 0.01) run.classification = SaturationClass::kLow;
            else if (*run.terminal_gamma > 0.99) run.classification = SaturationClass::kHigh;
            else run.classification = SaturationClass::kUnresolved;
        }
        runs.push_back(std::move(run));
    }
    return runs;
}

void write_stats_csv(const std::filesystem::path& path, std::span<const EpochStats> stats) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "epoch,loss,gamma,val_acc,alpha,lr\n";
    char buf[192];
    for (const EpochStats& st : stats) {
        if (st.alpha) {
            std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", st.epoch,
                          st.train_loss, st.gamma, st.val_acc, *st.alpha, st.lr);
        } else {
            std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,,%.17g\n", st.epoch,
                          st.train_loss, st.gamma, st.val_acc, st.lr);
        }
        out << buf;
    }
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace dac
