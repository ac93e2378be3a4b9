#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gradalign/archspace.hpp"
#include "gradalign/autodiff.hpp"
#include "gradalign/probe.hpp"

namespace gradalign {

// Eigenvalues below this are clamped before taking log-determinants, so
// rank-deficient Gram/kernel matrices score finite but strongly penalized.
constexpr double kLogDetEps = 1e-6;

struct SignMatrix {
    Eigen::MatrixXi entries;  // N x d over {-1, 0, +1}
    int class_label = -1;

    int samples() const { return static_cast<int>(entries.rows()); }
    int dim() const { return static_cast<int>(entries.cols()); }
};

SignMatrix sign_matrix(const Eigen::MatrixXd& grads, int class_label = -1);

// log det of a symmetric PSD matrix, eigenvalues clamped at kLogDetEps.
double clamped_logdet(const Eigen::MatrixXd& symmetric);

// s = (1/N) sum_i sign(g_i) . sign(mean_grad); mean_grad is the column mean
// of the raw per-sample gradients, not of their signs. Range [-d, d].
double gradalign1(const SignMatrix& signs, const Eigen::VectorXd& mean_grad);

// log det of the sign-gradient Gram matrix; lower is better.
double gradalign2(const SignMatrix& signs);

// sum_k | sum_i sign(g_i)_k |
double gradsign_score(const SignMatrix& signs);

// Hamming-similarity kernel over ReLU activation codes: K(i,j) = N_A - H(i,j).
double naswot_from_codes(const std::vector<std::vector<uint8_t>>& codes);
double naswot_score(const std::vector<ForwardTrace>& traces);

// Euclidean norm of the column-mean gradient.
double grad_norm_score(const Eigen::MatrixXd& grads);

enum class Metric { gradalign1, gradalign2, gradsign, naswot, gradnorm };

std::string metric_name(Metric m);
Metric metric_from_name(const std::string& name);  // UsageError listing valid names
std::vector<Metric> all_metrics();
bool metric_higher_is_better(Metric m);

struct ScoreRecord {
    std::string genome_id;
    Metric metric = Metric::gradalign1;
    double score = 0.0;
    double score_normalized = 0.0;
    bool higher_is_better = true;
    std::vector<double> per_class;  // contributing classes, ascending label
    uint64_t probe_seed = 0;
    int probe_size = 0;
    double wall_ms = 0.0;
};

// The class-wise scoring loop: decode + initialize with `seed`, score every
// class that the metric accepts, return the mean over contributing classes.
// Classes with fewer than 2 samples are skipped for gradalign2 and naswot.
ScoreRecord score_architecture(const ArchGenome& genome, const ProbeSet& probe, Metric metric,
                               uint64_t seed);

// CSV schema: genome_id,metric,score,score_normalized,higher_is_better,
//             probe_seed,probe_size,wall_ms
void save_scores_csv(const std::string& path, const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> load_scores_csv(const std::string& path);

}  // namespace gradalign
