#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "gradalign/commands.hpp"
#include "gradalign/errors.hpp"

namespace {

using namespace gradalign;

// Exit codes: 0 success, 2 usage error, 3 data/validation error, 4 numerical
// failure.
constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNumerical = 4;

void add_data_flags(CLI::App* cmd, DataOptions& data) {
    cmd->add_option("--data", data.kind, "dataset kind: blobs, spirals, xor-grid")
        ->capture_default_str();
    cmd->add_option("--classes", data.classes, "number of classes (blobs)")->capture_default_str();
    cmd->add_option("--train-per-class", data.train_per_class, "training samples per class")
        ->capture_default_str();
    cmd->add_option("--test-per-class", data.test_per_class, "test samples per class")
        ->capture_default_str();
    cmd->add_option("--noise", data.noise, "noise level")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"training-free architecture scoring laboratory"};
    app.require_subcommand(1);

    // The optional config file provides defaults; explicit flags override it.
    RunConfig cfg;
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                cfg = load_run_config(argv[i + 1]);
            } catch (const ValidationError& e) {
                std::fprintf(stderr, "error: %s\n", e.what());
                return kExitValidation;
            }
        }
    }
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file providing flag defaults");

    GenSpaceOptions gen;
    gen.ops = cfg.space.ops;
    gen.widths = cfg.space.widths;
    gen.depths = cfg.space.depths;
    gen.count = cfg.space.count;
    gen.seed = cfg.seed;
    if (!cfg.output.empty()) gen.output = cfg.output;
    auto* gen_cmd = app.add_subcommand("gen-space", "sample a genome search space to JSON");
    gen_cmd->add_option("--ops", gen.ops, "edge op alphabet")->delimiter(',')->capture_default_str();
    gen_cmd->add_option("--widths", gen.widths, "allowed widths")->delimiter(',')->capture_default_str();
    gen_cmd->add_option("--depths", gen.depths, "allowed depths")->delimiter(',')->capture_default_str();
    gen_cmd->add_option("--count", gen.count, "number of genomes")->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "sampling seed")->capture_default_str();
    gen_cmd->add_option("--output,-o", gen.output, "output space file")->capture_default_str();

    ScoreOptions score;
    score.data = cfg.data;
    score.probe_n = cfg.probe_n;
    score.metrics = cfg.metrics;
    score.seed = cfg.seed;
    score.jobs = cfg.jobs;
    auto* score_cmd = app.add_subcommand("score", "score a space with training-free metrics");
    score_cmd->add_option("--space", score.space_path, "space JSON file")->capture_default_str();
    add_data_flags(score_cmd, score.data);
    score_cmd->add_option("--probe-n", score.probe_n, "probe batch size (stratified)")
        ->capture_default_str();
    score_cmd->add_option("--metrics", score.metrics, "metrics to compute")
        ->delimiter(',')
        ->capture_default_str();
    score_cmd->add_option("--seed", score.seed, "root seed")->capture_default_str();
    score_cmd->add_option("--jobs", score.jobs, "parallel scoring jobs")->capture_default_str();
    score_cmd->add_option("--output,-o", score.output, "output score CSV")->capture_default_str();

    TrainOracleOptions oracle;
    oracle.data = cfg.data;
    oracle.epochs = cfg.epochs;
    oracle.lr = cfg.lr;
    oracle.batch_size = cfg.batch_size;
    oracle.momentum = cfg.momentum;
    oracle.seed = cfg.seed;
    oracle.jobs = cfg.jobs;
    auto* oracle_cmd =
        app.add_subcommand("train-oracle", "train every genome for ground-truth accuracies");
    oracle_cmd->add_option("--space", oracle.space_path, "space JSON file")->capture_default_str();
    add_data_flags(oracle_cmd, oracle.data);
    oracle_cmd->add_option("--epochs", oracle.epochs, "training epochs")->capture_default_str();
    oracle_cmd->add_option("--lr", oracle.lr, "learning rate")->capture_default_str();
    oracle_cmd->add_option("--batch-size", oracle.batch_size, "mini-batch size (0 = full batch)")
        ->capture_default_str();
    oracle_cmd->add_option("--momentum", oracle.momentum, "SGD momentum")->capture_default_str();
    oracle_cmd->add_option("--seed", oracle.seed, "root seed")->capture_default_str();
    oracle_cmd->add_option("--jobs", oracle.jobs, "parallel training jobs")->capture_default_str();
    oracle_cmd->add_option("--output,-o", oracle.output, "benchmark CSV (resumes if present)")
        ->capture_default_str();

    EvaluateOptions eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "Kendall-tau reports of scores vs accuracies");
    eval_cmd->add_option("--scores", eval.scores_paths, "score CSV (repeat per dataset)")
        ->capture_default_str();
    eval_cmd->add_option("--bench", eval.bench_paths, "benchmark CSV (repeat per dataset)")
        ->capture_default_str();
    eval_cmd->add_option("--metrics", eval.metrics, "metrics to report (default: all present)")
        ->delimiter(',');
    eval_cmd->add_option("--tau", eval.tau_variant, "tau variant: tau_a or tau_b")
        ->capture_default_str();
    eval_cmd->add_flag("!--no-diverged", eval.include_diverged, "exclude diverged genomes");
    eval_cmd->add_option("--output,-o", eval.output_dir, "report output directory")
        ->capture_default_str();

    TheoremOptions theorem;
    theorem.seed = cfg.seed;
    auto* theorem_cmd = app.add_subcommand("theorem-check", "one-step loss-reduction bound suites");
    theorem_cmd->add_option("--mode", theorem.mode, "quadratic, isotropic or relu")
        ->capture_default_str();
    theorem_cmd->add_option("--trials", theorem.trials, "instances per run")->capture_default_str();
    theorem_cmd->add_option("--dim", theorem.dim, "parameter dimension")->capture_default_str();
    theorem_cmd->add_option("--seed", theorem.seed, "root seed")->capture_default_str();
    theorem_cmd->add_option("--lambda-grid", theorem.lambda_grid, "relu-mode learning rates")
        ->delimiter(',');
    theorem_cmd->add_option("--probe-n", theorem.probe_n, "relu-mode probe size")
        ->capture_default_str();
    theorem_cmd->add_option("--output,-o", theorem.output, "output CSV")->capture_default_str();

    RegionDemoOptions region;
    region.seed = cfg.seed;
    auto* region_cmd =
        app.add_subcommand("region-demo", "linear-region census and perturbation sensitivity");
    region_cmd->add_option("--hidden", region.hidden, "hidden layer widths")
        ->delimiter(',')
        ->capture_default_str();
    region_cmd->add_option("--seeds", region.seeds, "number of init seeds to sweep")
        ->capture_default_str();
    region_cmd->add_option("--deltas", region.deltas, "bias perturbations")->delimiter(',');
    region_cmd->add_option("--param", region.param, "flat parameter coordinate to perturb")
        ->capture_default_str();
    region_cmd->add_option("--seed", region.seed, "census network seed")->capture_default_str();
    region_cmd->add_flag("--dump-polygons", region.dump_polygons, "emit region polygons CSV");
    std::vector<double> box_vals;
    region_cmd->add_option("--box", box_vals, "bounding box: xmin xmax ymin ymax")->expected(4);
    region_cmd->add_option("--output,-o", region.output_dir, "output directory")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gen_cmd->parsed()) {
            const auto genomes = run_gen_space(gen);
            std::printf("wrote %zu genomes to %s\n", genomes.size(), gen.output.c_str());
        } else if (score_cmd->parsed()) {
            const auto records = run_score(score);
            std::printf("wrote %zu score rows to %s\n", records.size(), score.output.c_str());
        } else if (oracle_cmd->parsed()) {
            const auto table = run_train_oracle(oracle);
            int diverged = 0;
            for (const auto& r : table.rows) diverged += r.diverged;
            std::printf("wrote %zu benchmark rows to %s (%d diverged)\n", table.rows.size(),
                        oracle.output.c_str(), diverged);
        } else if (eval_cmd->parsed()) {
            const auto means = run_evaluate(eval);
            for (const auto& [metric, tau] : means)
                std::printf("mean tau %-12s %+.4f\n", metric.c_str(), tau);
        } else if (theorem_cmd->parsed()) {
            const int violations = run_theorem_check(theorem);
            std::printf("wrote %s (%d bound violations)\n", theorem.output.c_str(), violations);
            if (violations > 0) return kExitNumerical;
        } else if (region_cmd->parsed()) {
            if (box_vals.size() == 4)
                region.box = Box{box_vals[0], box_vals[1], box_vals[2], box_vals[3]};
            run_region_demo(region);
            std::printf("wrote region reports to %s\n", region.output_dir.c_str());
        }
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    }
    return 0;
}
