#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gradalign/archspace.hpp"

namespace gradalign {

enum class DataKind { blobs, spirals, xor_grid };

std::string data_kind_name(DataKind k);
DataKind data_kind_from_name(const std::string& name);

struct DataSpec {
    DataKind kind = DataKind::blobs;
    int classes = 4;  // blobs only; spirals and xor-grid are 2-class
    int train_per_class = 50;
    int test_per_class = 50;
    double noise = 0.05;

    void validate() const;
};

struct Dataset {
    std::string name;
    int input_dim = 0;
    int num_classes = 0;
    Eigen::MatrixXd train_x;  // input_dim x N, class-major order
    std::vector<int> train_y;
    Eigen::MatrixXd test_x;
    std::vector<int> test_y;
    uint64_t seed = 0;

    int train_size() const { return static_cast<int>(train_x.cols()); }
    int test_size() const { return static_cast<int>(test_x.cols()); }
};

// Deterministic synthetic datasets. Blobs are Gaussian clusters at
// unit-circle-spaced centers; spirals are two interleaved arms; xor-grid is
// the 4-quadrant two-class pattern.
Dataset generate_dataset(const DataSpec& spec, uint64_t seed);

struct TrainConfig {
    int epochs = 50;
    double lr = 0.1;
    int batch_size = 32;  // 0 = full batch
    double momentum = 0.5;
    uint64_t seed = 0;  // drives the per-epoch batch shuffles

    void validate() const;
};

struct TrainResult {
    double accuracy = 0.0;
    std::vector<double> loss_curve;  // mean training loss after each epoch
    int epochs_run = 0;
};

// Mini-batch SGD with momentum on softmax cross-entropy. Throws
// TrainingDivergedError (carrying the last finite epoch and its snapshot
// accuracy) when the loss or parameters stop being finite.
TrainResult train(const ArchGenome& genome, const Dataset& data, const TrainConfig& config,
                  uint64_t init_seed);

double test_accuracy(const NetworkInstance& net, const Dataset& data);

struct BenchRow {
    std::string genome_id;
    std::string dataset;
    uint64_t seed = 0;
    double accuracy = 0.0;
    int epochs = 0;
    bool diverged = false;
};

struct BenchmarkTable {
    std::vector<BenchRow> rows;  // sorted by genome_id

    const BenchRow* find(const std::string& genome_id) const;
};

// Trains every genome not already present in `existing`; divergence becomes a
// flagged row rather than a failure. Per-genome sub-seeds are derived from
// (config.seed, init_base) and the genome id, so results do not depend on
// the order or subset of genomes trained.
BenchmarkTable benchmark_space(const std::vector<ArchGenome>& genomes, const Dataset& data,
                               const TrainConfig& config, uint64_t init_base,
                               const BenchmarkTable* existing = nullptr, int jobs = 1);

// CSV schema: genome_id,dataset,seed,accuracy,epochs,diverged
void save_bench_csv(const std::string& path, const BenchmarkTable& table);
BenchmarkTable load_bench_csv(const std::string& path);

}  // namespace gradalign
