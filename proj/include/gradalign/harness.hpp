#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gradalign/metrics.hpp"
#include "gradalign/oracle.hpp"
#include "gradalign/probe.hpp"

namespace gradalign {

// Stratified probe: per-class counts as equal as possible (lower labels take
// the remainder), sampled without replacement, grouped by class.
ProbeSet build_probe(const Dataset& data, int n, uint64_t seed);

enum class TauVariant { tau_a, tau_b };

std::string tau_variant_name(TauVariant v);

// Kendall rank correlation. tau_b is tie-corrected; with all-tied xs or ys
// its denominator vanishes and a NumericalError is thrown. tau_a is the
// plain (C - D) / (n(n-1)/2).
double kendall_tau(const std::vector<double>& xs, const std::vector<double>& ys,
                   TauVariant variant = TauVariant::tau_b);

struct TauReport {
    std::string metric;
    std::string dataset;
    double tau = 0.0;
    TauVariant variant = TauVariant::tau_b;
    int n_architectures = 0;
    std::string top_pick_id;
    double top_pick_accuracy = 0.0;
    double best_possible = 0.0;
    std::vector<std::string> ranking;  // ids ordered best-score first
    std::vector<double> ranked_scores;
    std::vector<double> ranked_accuracy;
};

// Joins one metric's score records with ground-truth accuracies and computes
// tau between the score ordering keys (negated when lower is better) and the
// accuracies. Diverged genomes keep their recorded accuracy unless
// include_diverged is false.
TauReport evaluate_metric(const std::vector<ScoreRecord>& scores, const BenchmarkTable& bench,
                          TauVariant variant = TauVariant::tau_b, bool include_diverged = true);

// Same join + ranking for an arbitrary named score vector.
TauReport evaluate_scores(const std::string& metric, const std::vector<std::string>& genome_ids,
                          const std::vector<double>& scores, bool higher_is_better,
                          const BenchmarkTable& bench, TauVariant variant = TauVariant::tau_b,
                          bool include_diverged = true);

std::string tau_report_to_json(const TauReport& report);

// CSV schema: rank,genome_id,score,accuracy
void save_ranking_csv(const std::string& path, const TauReport& report);

}  // namespace gradalign
