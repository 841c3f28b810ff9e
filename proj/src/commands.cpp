#include "dac/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "dac/kernels.hpp"
#include "dac/metrics.hpp"
#include "dac/rng.hpp"

namespace dac {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << j.dump(2) << "\n";
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

json config_json(const TrainConfig& cfg) {
    json j;
    j["epochs"] = cfg.epochs;
    j["warmup_epochs"] = cfg.warmup_epochs;
    j["rho"] = cfg.rho;
    j["mu"] = cfg.mu;
    j["alpha_final"] = cfg.alpha_final;
    if (cfg.fixed_alpha) j["fixed_alpha"] = *cfg.fixed_alpha;
    else j["fixed_alpha"] = nullptr;
    j["hidden_dims"] = cfg.hidden_dims;
    j["lr"] = cfg.lr.initial_lr;
    j["anneal_epochs"] = cfg.lr.anneal_epochs;
    j["anneal_factor"] = cfg.lr.anneal_factor;
    j["momentum"] = cfg.momentum;
    j["weight_decay"] = cfg.weight_decay;
    j["nesterov"] = cfg.nesterov;
    j["batch_size"] = cfg.batch_size;
    j["seed"] = cfg.seed;
    j["eliminate_misclassified"] = cfg.eliminate_misclassified;
    return j;
}

void emit_resolved(const fs::path& path, json resolved) {
    write_json(path, resolved);
    std::cout << resolved.dump(2) << "\n";
}

json optional_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

}  // namespace

void cmd_generate(const GenerateArgs& args) {
    if (args.out.empty()) throw ConfigError("generate: --out is required");
    NoisyDataset ds = gen_blobs(args.k, args.d, args.n_per_class, args.separation,
                                seed_for(args.seed, "blobs"));
    const std::uint64_t noise_seed = seed_for(args.seed, "noise");
    json noise;
    noise["kind"] = args.kind;
    if (args.kind == "none") {
        // clean dataset
    } else if (args.kind == "uniform") {
        ds = inject_uniform(std::move(ds), args.fraction, noise_seed);
        noise["fraction"] = args.fraction;
    } else if (args.kind == "class_dependent") {
        ds = inject_class_dependent_circular(std::move(ds), args.eta, noise_seed);
        noise["eta"] = args.eta;
    } else if (args.kind == "smudge") {
        ds = inject_smudge(std::move(ds), args.fraction, args.magnitude, args.width, noise_seed);
        noise["fraction"] = args.fraction;
        noise["magnitude"] = args.magnitude;
        noise["width"] = args.width;
    } else if (args.kind == "degradation") {
        ds = inject_degradation(std::move(ds), args.fraction, args.blend_lambda, noise_seed);
        noise["fraction"] = args.fraction;
        noise["lambda"] = args.blend_lambda;
    } else if (args.kind == "class_random") {
        ds = inject_class_randomization(std::move(ds), args.target_class, noise_seed);
        noise["target_class"] = args.target_class;
    } else {
        throw ConfigError("generate: unknown noise kind '" + args.kind + "'");
    }
    save_dataset(args.out, ds);

    std::int64_t randomized = 0, structured = 0, corrupted = 0;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        if (ds.randomized(i)) ++randomized;
        if (ds.structured(i)) ++structured;
        if (ds.labels[i] != ds.original_labels[i]) ++corrupted;
    }
    json side;
    side["path"] = args.out;
    side["k"] = ds.k;
    side["d"] = ds.d();
    side["n"] = ds.n();
    side["n_per_class"] = args.n_per_class;
    side["separation"] = args.separation;
    side["seed"] = args.seed;
    side["noise"] = noise;
    side["description"] = ds.description;
    side["flagged_randomized"] = randomized;
    side["flagged_structured"] = structured;
    side["labels_differing_from_original"] = corrupted;
    write_json(args.out + ".json", side);
    std::cout << "wrote " << args.out << " (" << ds.n() << " samples, k=" << ds.k
              << ", d=" << ds.d() << ")\n";
}

void cmd_train(const TrainArgs& args) {
    kernels::set_parallel(!args.serial);
    ensure_dir(args.out_dir);
    const NoisyDataset train = load_dataset(args.train_path);
    const NoisyDataset val = load_dataset(args.val_path);

    json resolved;
    resolved["command"] = "train";
    resolved["train"] = args.train_path;
    resolved["val"] = args.val_path;
    resolved["out"] = args.out_dir;
    resolved["serial"] = args.serial;
    resolved["config"] = config_json(args.cfg);
    emit_resolved(fs::path(args.out_dir) / "resolved.json", resolved);

    const TrainResult result = train_dac(train, val, args.cfg);
    write_stats_csv(fs::path(args.out_dir) / "stats.csv", result.stats);
    save_checkpoint(fs::path(args.out_dir) / "best.ckpt", result.best);
    std::cout << "best epoch " << result.best_epoch << " val_acc " << result.best_val_acc
              << " gamma " << result.stats[static_cast<std::size_t>(result.best_epoch)].gamma
              << "\n";
}

void cmd_clean(const CleanArgs& args) {
    kernels::set_parallel(!args.serial);
    ensure_dir(args.out_dir);
    const NoisyDataset train = load_dataset(args.train_path);
    const NoisyDataset val = load_dataset(args.val_path);

    TrainConfig down_cfg = args.cfg;
    if (args.downstream_epochs > 0) down_cfg.epochs = args.downstream_epochs;
    down_cfg.warmup_epochs = 0;
    down_cfg.fixed_alpha.reset();
    down_cfg.seed = seed_for(args.cfg.seed, "downstream");

    json resolved;
    resolved["command"] = "clean";
    resolved["train"] = args.train_path;
    resolved["val"] = args.val_path;
    resolved["out"] = args.out_dir;
    resolved["serial"] = args.serial;
    resolved["config"] = config_json(args.cfg);
    resolved["downstream_epochs"] = down_cfg.epochs;
    emit_resolved(fs::path(args.out_dir) / "resolved.json", resolved);

    const CleanOutcome outcome = clean_and_retrain(train, val, args.cfg, down_cfg);
    write_stats_csv(fs::path(args.out_dir) / "dac_stats.csv", outcome.dac_run.stats);
    write_stats_csv(fs::path(args.out_dir) / "downstream_stats.csv", outcome.downstream.stats);
    save_checkpoint(fs::path(args.out_dir) / "dac_best.ckpt", outcome.dac_run.best);
    save_checkpoint(fs::path(args.out_dir) / "downstream.ckpt", outcome.downstream.best);

    const CleanReport& rep = outcome.report;
    json j;
    j["dac_best_epoch"] = outcome.dac_run.best_epoch;
    j["dac_best_val_acc"] = outcome.dac_run.best_val_acc;
    j["gamma_at_best"] =
        outcome.dac_run.stats[static_cast<std::size_t>(outcome.dac_run.best_epoch)].gamma;
    j["eliminated_count"] = rep.eliminated.size();
    j["eliminated_fraction"] = rep.eliminated_fraction;
    j["residual_noise_fraction"] = optional_json(rep.residual_noise_fraction);
    j["noise_precision"] = optional_json(rep.noise_precision);
    j["noise_recall"] = optional_json(rep.noise_recall);
    j["tp"] = rep.tp;
    j["fp"] = rep.fp;
    j["fn"] = rep.fn;
    j["eliminated_indices"] = rep.eliminated;
    j["downstream_epochs"] = outcome.downstream.stats.size();
    j["downstream_best_epoch"] = outcome.downstream.best_epoch;
    j["downstream_accuracy"] = outcome.downstream_accuracy;
    write_json(fs::path(args.out_dir) / "clean_report.json", j);
    std::cout << "eliminated " << rep.eliminated.size() << "/" << train.n()
              << ", downstream accuracy " << outcome.downstream_accuracy << "\n";
}

void cmd_sweep(const SweepArgs& args) {
    kernels::set_parallel(!args.serial);
    ensure_dir(args.out_dir);
    const NoisyDataset train = load_dataset(args.train_path);
    const NoisyDataset val = load_dataset(args.val_path);

    json resolved;
    resolved["command"] = "sweep";
    resolved["train"] = args.train_path;
    resolved["val"] = args.val_path;
    resolved["out"] = args.out_dir;
    resolved["serial"] = args.serial;
    resolved["config"] = config_json(args.cfg);
    resolved["alphas"] = args.alphas;
    emit_resolved(fs::path(args.out_dir) / "resolved.json", resolved);

    const auto runs = fixed_alpha_sweep(train, val, args.cfg, args.alphas);
    json summary = json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const SweepRun& run = runs[i];
        const std::string csv_name = "alpha_" + std::to_string(i) + ".csv";
        write_stats_csv(fs::path(args.out_dir) / csv_name, run.stats);
        json r;
        r["alpha"] = run.alpha;
        r["csv"] = csv_name;
        r["halted"] = run.halted;
        if (run.halted) r["halt_reason"] = run.halt_reason;
        r["terminal_gamma"] = optional_json(run.terminal_gamma);
        switch (run.classification) {
            case SaturationClass::kLow: r["classification"] = "low"; break;
            case SaturationClass::kHigh: r["classification"] = "high"; break;
            case SaturationClass::kUnresolved: r["classification"] = "unresolved"; break;
        }
        summary.push_back(r);
    }
    write_json(fs::path(args.out_dir) / "sweep.json", summary);
    std::cout << "swept " << runs.size() << " alpha values\n";
}

void cmd_eval(const EvalArgs& args) {
    kernels::set_parallel(!args.serial);
    ensure_dir(args.out_dir);
    const Checkpoint ckpt = load_checkpoint(args.checkpoint_path);
    const NoisyDataset ds = load_dataset(args.dataset_path);
    const std::size_t k = static_cast<std::size_t>(ds.k);
    if (ckpt.model.input_dim() != ds.d() ||
        (ckpt.model.output_dim() != k && ckpt.model.output_dim() != k + 1)) {
        throw InvalidInputError(
            "checkpoint dimensions do not match the dataset (input " +
            std::to_string(ckpt.model.input_dim()) + " vs d " + std::to_string(ds.d()) +
            ", output " + std::to_string(ckpt.model.output_dim()) + " vs k " + std::to_string(k) +
            ")");
    }
    const bool has_abstention = ckpt.model.output_dim() == k + 1;

    json j;
    j["checkpoint"] = args.checkpoint_path;
    j["dataset"] = args.dataset_path;
    j["checkpoint_epoch"] = ckpt.epoch;
    j["k"] = ds.k;
    j["n"] = ds.n();
    j["has_abstention_output"] = has_abstention;
    j["accuracy_overall"] = optional_json(accuracy(ckpt.model, ds, AccuracyMode::kOverall));
    j["accuracy_non_abstained"] =
        optional_json(accuracy(ckpt.model, ds, AccuracyMode::kNonAbstainedOnly));
    j["accuracy_renormalized"] =
        optional_json(accuracy(ckpt.model, ds, AccuracyMode::kRenormalized));
    if (has_abstention) {
        j["abstention_rate"] = abstention_rate(ckpt.model, ds);
        if (ds.has_ground_truth) {
            const AbstentionPR pr = abstention_pr(ckpt.model, ds, kFlagStructured);
            j["abstention_precision"] = optional_json(pr.precision);
            j["abstention_recall"] = optional_json(pr.recall);
            j["abstention_tp"] = pr.tp;
            j["abstention_fp"] = pr.fp;
            j["abstention_fn"] = pr.fn;
        } else {
            j["abstention_precision"] = nullptr;
            j["abstention_recall"] = nullptr;
        }
    }
    const auto thresholds = default_thresholds();
    const auto curve = risk_coverage_curve(ckpt.model, ds, thresholds);
    write_risk_coverage_csv(fs::path(args.out_dir) / "risk_coverage.csv", curve);
    write_json(fs::path(args.out_dir) / "metrics.json", j);
    std::cout << j.dump(2) << "\n";
}

}  // namespace dac
