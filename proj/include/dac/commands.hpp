#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dac/pipeline.hpp"

namespace dac {

/// Implementations of the CLI subcommands. They throw the library error
/// types; the binary maps those to exit codes.

struct GenerateArgs {
    std::string kind = "none";  // none|uniform|class_dependent|smudge|degradation|class_random
    std::int32_t k = 4;
    std::size_t d = 2;
    std::size_t n_per_class = 1000;
    double separation = 10.0;
    double fraction = 0.1;      // uniform / smudge / degradation
    double eta = 0.2;           // class_dependent
    double magnitude = 25.0;    // smudge
    std::size_t width = 1;      // smudge
    double blend_lambda = 0.5;  // degradation
    std::int32_t target_class = 0;  // class_random
    std::uint64_t seed = 1;
    std::string out;
};

/// Generates blobs, applies the requested corruption, writes the dataset and
/// a JSON sidecar (<out>.json) describing it.
void cmd_generate(const GenerateArgs& args);

struct TrainArgs {
    std::string train_path;
    std::string val_path;
    std::string out_dir;
    TrainConfig cfg;
    bool serial = false;
};

/// Trains an abstention model; writes out_dir/{stats.csv, best.ckpt,
/// resolved.json}. Also prints the resolved configuration.
void cmd_train(const TrainArgs& args);

struct CleanArgs {
    std::string train_path;
    std::string val_path;
    std::string out_dir;
    TrainConfig cfg;
    int downstream_epochs = 0;  // 0: same as cfg.epochs
    bool serial = false;
};

/// Cleaning pipeline; writes out_dir/{dac_stats.csv, downstream_stats.csv,
/// clean_report.json, dac_best.ckpt, downstream.ckpt, resolved.json}.
void cmd_clean(const CleanArgs& args);

struct SweepArgs {
    std::string train_path;
    std::string val_path;
    std::string out_dir;
    TrainConfig cfg;
    std::vector<double> alphas;
    bool serial = false;
};

/// Fixed-alpha sweep; writes out_dir/alpha_<i>.csv per run plus sweep.json.
void cmd_sweep(const SweepArgs& args);

struct EvalArgs {
    std::string checkpoint_path;
    std::string dataset_path;
    std::string out_dir;
    bool serial = false;
};

/// Evaluates a checkpoint on a dataset; writes out_dir/{metrics.json,
/// risk_coverage.csv}.
void cmd_eval(const EvalArgs& args);

}  // namespace dac
