#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dac/commands.hpp"
#include "dac/errors.hpp"

namespace {

// Exit codes: 0 success, 2 usage/configuration, 3 I/O or malformed file,
// 4 numeric failure during training, 5 unsupported format version,
// 1 unexpected internal error.
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitVersion = 5;

struct CommonTrainCli {
    std::string train_path;
    std::string val_path;
    std::string out_dir;
    dac::TrainConfig cfg;
    double fixed_alpha_value = 0.0;
    CLI::Option* fixed_alpha_opt = nullptr;
    bool serial = false;
};

void add_common_options(CLI::App* sub, CommonTrainCli& c) {
    sub->add_option("--train", c.train_path, "Training dataset path")->required();
    sub->add_option("--val", c.val_path, "Validation dataset path")->required();
    sub->add_option("--out", c.out_dir, "Output directory")->required();
    sub->add_option("--epochs", c.cfg.epochs, "Total training epochs")->capture_default_str();
    sub->add_option("--warmup", c.cfg.warmup_epochs,
                    "Plain cross-entropy epochs before abstention turns on")
        ->capture_default_str();
    sub->add_option("--rho", c.cfg.rho, "Alpha initialization divisor")->capture_default_str();
    sub->add_option("--mu", c.cfg.mu, "Smoothing coefficient of the warm-up moving average")
        ->capture_default_str();
    sub->add_option("--alpha-final", c.cfg.alpha_final, "Alpha ramp target at the end of training")
        ->capture_default_str();
    c.fixed_alpha_opt = sub->add_option(
        "--fixed-alpha", c.fixed_alpha_value,
        "Fix alpha instead of auto-tuning; values >= 1e6 train with the plain cross entropy");
    sub->add_option("--hidden", c.cfg.hidden_dims, "Hidden layer widths")->capture_default_str();
    sub->add_option("--lr", c.cfg.lr.initial_lr, "Initial learning rate")->capture_default_str();
    sub->add_option("--anneal-epochs", c.cfg.lr.anneal_epochs,
                    "Epochs at which the learning rate is annealed")
        ->capture_default_str();
    sub->add_option("--anneal-factor", c.cfg.lr.anneal_factor, "Learning rate anneal factor")
        ->capture_default_str();
    sub->add_option("--momentum", c.cfg.momentum, "SGD momentum")->capture_default_str();
    sub->add_option("--weight-decay", c.cfg.weight_decay, "L2 weight decay")
        ->capture_default_str();
    sub->add_flag("--nesterov,!--no-nesterov", c.cfg.nesterov, "Nesterov momentum (default on)");
    sub->add_option("--batch-size", c.cfg.batch_size, "Mini-batch size")->capture_default_str();
    sub->add_option("--seed", c.cfg.seed, "Master seed; all streams derive from it")
        ->capture_default_str();
    sub->add_flag("--serial", c.serial, "Use the serial reference kernels instead of OpenMP");
}

void finalize_fixed_alpha(CommonTrainCli& c) {
    if (c.fixed_alpha_opt->count() > 0) c.cfg.fixed_alpha = c.fixed_alpha_value;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Abstention training, data cleaning, and selective-prediction evaluation"};
    app.require_subcommand(1);
    // Config handling lives on the top-level app (CLI11 only applies config
    // files there); keys go under a [subcommand] section. fallthrough() lets
    // --config appear after the subcommand name. Unknown keys are errors.
    app.fallthrough();
    app.set_config("--config", "",
                   "Read options from an INI file; keys live in a [subcommand] section");
    app.allow_config_extras(false);

    dac::GenerateArgs gen_args;
    auto* gen = app.add_subcommand(
        "generate", "Generate a synthetic blob dataset with optional corruption");
    gen->add_option("--out", gen_args.out, "Output dataset path")->required();
    gen->add_option("--kind", gen_args.kind,
                    "Corruption protocol: none|uniform|class_dependent|smudge|degradation|"
                    "class_random")
        ->capture_default_str()
        ->check(CLI::IsMember(
            {"none", "uniform", "class_dependent", "smudge", "degradation", "class_random"}));
    gen->add_option("--k", gen_args.k, "Number of classes")->capture_default_str();
    gen->add_option("--d", gen_args.d, "Feature dimensionality")->capture_default_str();
    gen->add_option("--n-per-class", gen_args.n_per_class, "Samples per class")
        ->capture_default_str();
    gen->add_option("--separation", gen_args.separation, "Distance between adjacent blob centers")
        ->capture_default_str();
    gen->add_option("--fraction", gen_args.fraction,
                    "Corrupted fraction (uniform/smudge/degradation)")
        ->capture_default_str();
    gen->add_option("--eta", gen_args.eta, "Per-sample flip probability (class_dependent)")
        ->capture_default_str();
    gen->add_option("--magnitude", gen_args.magnitude, "Overwrite value (smudge)")
        ->capture_default_str();
    gen->add_option("--width", gen_args.width, "Number of leading coordinates to overwrite (smudge)")
        ->capture_default_str();
    gen->add_option("--lambda", gen_args.blend_lambda, "Blend toward the global mean (degradation)")
        ->capture_default_str();
    gen->add_option("--target-class", gen_args.target_class,
                    "Class whose labels are randomized (class_random)")
        ->capture_default_str();
    gen->add_option("--seed", gen_args.seed, "Master seed")->capture_default_str();
    gen->callback([&] { dac::cmd_generate(gen_args); });

    CommonTrainCli train_cli;
    auto* train = app.add_subcommand("train", "Train an abstention model");
    add_common_options(train, train_cli);
    train->callback([&] {
        finalize_fixed_alpha(train_cli);
        dac::TrainArgs args;
        args.train_path = train_cli.train_path;
        args.val_path = train_cli.val_path;
        args.out_dir = train_cli.out_dir;
        args.cfg = train_cli.cfg;
        args.serial = train_cli.serial;
        dac::cmd_train(args);
    });

    CommonTrainCli clean_cli;
    int downstream_epochs = 0;
    auto* clean = app.add_subcommand(
        "clean", "Abstention-train, eliminate suspect samples, retrain a plain classifier");
    add_common_options(clean, clean_cli);
    clean->add_option("--downstream-epochs", downstream_epochs,
                      "Downstream epoch budget before stretching (default: --epochs)");
    clean->add_flag("--eliminate-misclassified", clean_cli.cfg.eliminate_misclassified,
                    "Eliminate misclassified instead of abstained samples");
    clean->callback([&] {
        finalize_fixed_alpha(clean_cli);
        dac::CleanArgs args;
        args.train_path = clean_cli.train_path;
        args.val_path = clean_cli.val_path;
        args.out_dir = clean_cli.out_dir;
        args.cfg = clean_cli.cfg;
        args.downstream_epochs = downstream_epochs;
        args.serial = clean_cli.serial;
        dac::cmd_clean(args);
    });

    CommonTrainCli sweep_cli;
    std::vector<double> alphas;
    auto* sweep = app.add_subcommand("sweep", "Train once per fixed alpha and classify saturation");
    add_common_options(sweep, sweep_cli);
    sweep->add_option("--alphas", alphas, "Fixed alpha values to sweep")->required();
    sweep->callback([&] {
        finalize_fixed_alpha(sweep_cli);
        dac::SweepArgs args;
        args.train_path = sweep_cli.train_path;
        args.val_path = sweep_cli.val_path;
        args.out_dir = sweep_cli.out_dir;
        args.cfg = sweep_cli.cfg;
        args.alphas = alphas;
        args.serial = sweep_cli.serial;
        dac::cmd_sweep(args);
    });

    dac::EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    eval->add_option("--checkpoint", eval_args.checkpoint_path, "Checkpoint path")->required();
    eval->add_option("--data", eval_args.dataset_path, "Dataset path")->required();
    eval->add_option("--out", eval_args.out_dir, "Output directory")->required();
    eval->add_flag("--serial", eval_args.serial, "Use the serial reference kernels");
    eval->callback([&] { dac::cmd_eval(eval_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    } catch (const dac::VersionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitVersion;
    } catch (const dac::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const dac::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const dac::HaltedRunError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const dac::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const dac::SaturationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const dac::EmptyTrainingSetError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const dac::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
