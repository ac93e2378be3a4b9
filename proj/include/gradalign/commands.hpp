#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gradalign/archspace.hpp"
#include "gradalign/harness.hpp"
#include "gradalign/metrics.hpp"
#include "gradalign/oracle.hpp"
#include "gradalign/regionlab.hpp"

namespace gradalign {

// All commands share one root seed. gen-space consumes it directly as the
// sampling seed; everything else derives named streams (dataset, probe,
// init, train), so score and train-oracle agree on network initializations
// whenever they share the root seed.

struct DataOptions {
    std::string kind = "blobs";
    int classes = 4;
    int train_per_class = 50;
    int test_per_class = 50;
    double noise = 0.05;

    DataSpec spec() const;
};

Dataset command_dataset(const DataOptions& options, uint64_t root_seed);

struct GenSpaceOptions {
    std::vector<std::string> ops = {"zero", "skip", "dense-relu", "dense-linear", "bottleneck-relu"};
    std::vector<int> widths = {4, 8};
    std::vector<int> depths = {1};
    int count = 30;
    uint64_t seed = 0;
    std::string output = "space.json";
};
std::vector<ArchGenome> run_gen_space(const GenSpaceOptions& options);

struct ScoreOptions {
    std::string space_path = "space.json";
    DataOptions data;
    int probe_n = 32;
    std::vector<std::string> metrics = {"gradalign1", "gradalign2", "gradsign", "naswot", "gradnorm"};
    uint64_t seed = 0;
    int jobs = 1;
    std::string output = "scores.csv";
};
std::vector<ScoreRecord> run_score(const ScoreOptions& options);

struct TrainOracleOptions {
    std::string space_path = "space.json";
    DataOptions data;
    int epochs = 50;
    double lr = 0.1;
    int batch_size = 32;
    double momentum = 0.5;
    uint64_t seed = 0;
    int jobs = 1;
    std::string output = "bench.csv";
};
BenchmarkTable run_train_oracle(const TrainOracleOptions& options);

struct EvaluateOptions {
    std::vector<std::string> scores_paths = {"scores.csv"};
    std::vector<std::string> bench_paths = {"bench.csv"};  // paired by position
    std::vector<std::string> metrics;                      // empty = every metric present
    std::string tau_variant = "tau_b";
    bool include_diverged = true;
    std::string output_dir = ".";
};
// Writes one report JSON + ranking CSV per (metric, dataset) plus a summary
// with the mean tau per metric; returns those means.
std::map<std::string, double> run_evaluate(const EvaluateOptions& options);

struct TheoremOptions {
    std::string mode = "quadratic";  // quadratic | isotropic | relu
    int trials = 1000;
    int dim = 6;
    uint64_t seed = 0;
    std::string output = "bounds.csv";
    std::vector<double> lambda_grid = {1e-2, 1e-3, 1e-4, 1e-5};  // relu mode
    int probe_n = 8;                                             // relu mode
};
// Returns the number of instances whose measured decrease fell below the
// tight bound (always 0 for smooth suites unless something is broken).
int run_theorem_check(const TheoremOptions& options);

struct RegionDemoOptions {
    std::vector<int> hidden = {2, 2};
    int seeds = 100;
    std::vector<double> deltas = {-0.5, -0.35, -0.2, -0.1, 0.1, 0.2, 0.35, 0.5};
    int param = -1;  // flat coordinate; -1 = first bias of the first layer
    Box box;
    uint64_t seed = 0;  // census network
    bool dump_polygons = false;
    std::string output_dir = ".";
};
// Writes census.json, sensitivity.csv and (optionally) polygons.csv.
void run_region_demo(const RegionDemoOptions& options);

// Optional JSON config mirroring the flag structure; flags override fields.
struct RunConfig {
    GenSpaceOptions space;
    DataOptions data;
    int probe_n = 32;
    std::vector<std::string> metrics = {"gradalign1", "gradalign2", "gradsign", "naswot", "gradnorm"};
    int epochs = 50;
    double lr = 0.1;
    int batch_size = 32;
    double momentum = 0.5;
    uint64_t seed = 0;
    int jobs = 1;
    std::string output;
};
RunConfig load_run_config(const std::string& path);

}  // namespace gradalign
