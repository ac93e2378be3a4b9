#include "gradalign/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gradalign/errors.hpp"
#include "gradalign/rng.hpp"
#include "gradalign/textio.hpp"

namespace gradalign {

ProbeSet build_probe(const Dataset& data, int n, uint64_t seed) {
    const int classes = data.num_classes;
    if (n < classes)
        throw ValidationError("cannot stratify: probe size " + std::to_string(n) + " < " +
                              std::to_string(classes) + " classes");
    if (n > data.train_size())
        throw ValidationError("probe size exceeds the training split");

    ProbeSet probe;
    probe.dataset_id = data.name;
    probe.seed = seed;
    probe.size = n;
    probe.num_classes = classes;

    for (int c = 0; c < classes; ++c) {
        const int want = n / classes + (c < n % classes ? 1 : 0);
        std::vector<int> pool;
        for (int j = 0; j < data.train_size(); ++j)
            if (data.train_y[static_cast<size_t>(j)] == c) pool.push_back(j);
        if (static_cast<int>(pool.size()) < want)
            throw ValidationError("cannot stratify: class " + std::to_string(c) + " has only " +
                                  std::to_string(pool.size()) + " samples, need " +
                                  std::to_string(want));
        Rng rng(derive_seed(seed, "probe-class-" + std::to_string(c)));
        rng.shuffle(pool);

        ProbeSet::Group group;
        group.label = c;
        group.xs.resize(data.input_dim, want);
        for (int j = 0; j < want; ++j) group.xs.col(j) = data.train_x.col(pool[static_cast<size_t>(j)]);
        probe.groups.push_back(std::move(group));
    }
    return probe;
}

std::string tau_variant_name(TauVariant v) {
    return v == TauVariant::tau_a ? "tau_a" : "tau_b";
}

namespace {

// Strict inversions of `v` by mergesort; pairs i<j with v[i] > v[j].
long count_inversions(std::vector<double>& v, std::vector<double>& scratch, size_t lo, size_t hi) {
    if (hi - lo < 2) return 0;
    const size_t mid = lo + (hi - lo) / 2;
    long inv = count_inversions(v, scratch, lo, mid) + count_inversions(v, scratch, mid, hi);
    size_t a = lo, b = mid, out = lo;
    while (a < mid && b < hi) {
        if (v[b] < v[a]) {
            inv += static_cast<long>(mid - a);
            scratch[out++] = v[b++];
        } else {
            scratch[out++] = v[a++];
        }
    }
    while (a < mid) scratch[out++] = v[a++];
    while (b < hi) scratch[out++] = v[b++];
    std::copy(scratch.begin() + static_cast<long>(lo), scratch.begin() + static_cast<long>(hi),
              v.begin() + static_cast<long>(lo));
    return inv;
}

long tie_pairs(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    long pairs = 0, run = 1;
    for (size_t i = 1; i <= v.size(); ++i) {
        if (i < v.size() && v[i] == v[i - 1]) {
            ++run;
        } else {
            pairs += run * (run - 1) / 2;
            run = 1;
        }
    }
    return pairs;
}

}  // namespace

double kendall_tau(const std::vector<double>& xs, const std::vector<double>& ys,
                   TauVariant variant) {
    const size_t n = xs.size();
    if (n != ys.size()) throw ValidationError("kendall_tau needs equal-length inputs");
    if (n < 2) throw ValidationError("kendall_tau needs at least 2 observations");

    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        if (xs[a] != xs[b]) return xs[a] < xs[b];
        return ys[a] < ys[b];
    });

    const long n0 = static_cast<long>(n) * (static_cast<long>(n) - 1) / 2;
    const long n1 = tie_pairs(xs);
    const long n2 = tie_pairs(ys);

    long n3 = 0;  // pairs tied in both
    {
        long run = 1;
        for (size_t i = 1; i <= n; ++i) {
            if (i < n && xs[idx[i]] == xs[idx[i - 1]] && ys[idx[i]] == ys[idx[i - 1]]) {
                ++run;
            } else {
                n3 += run * (run - 1) / 2;
                run = 1;
            }
        }
    }

    std::vector<double> y_sorted(n), scratch(n);
    for (size_t i = 0; i < n; ++i) y_sorted[i] = ys[idx[i]];
    const long discordant = count_inversions(y_sorted, scratch, 0, n);
    const long numerator = n0 - n1 - n2 + n3 - 2 * discordant;  // C - D

    if (variant == TauVariant::tau_a) return static_cast<double>(numerator) / n0;

    if (n0 == n1 || n0 == n2)
        throw NumericalError("undefined correlation: an input is entirely tied (tau-b denominator 0)");
    const double denom = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
    return std::clamp(numerator / denom, -1.0, 1.0);
}

TauReport evaluate_scores(const std::string& metric, const std::vector<std::string>& genome_ids,
                          const std::vector<double>& scores, bool higher_is_better,
                          const BenchmarkTable& bench, TauVariant variant,
                          bool include_diverged) {
    if (genome_ids.size() != scores.size())
        throw ValidationError("genome ids and scores must have equal lengths");
    if (genome_ids.empty()) throw ValidationError("no score records to evaluate");

    std::vector<std::string> missing;
    struct Joined {
        const std::string* id;
        double score;
        const BenchRow* row;
    };
    std::vector<Joined> joined;
    for (size_t i = 0; i < genome_ids.size(); ++i) {
        const BenchRow* row = bench.find(genome_ids[i]);
        if (!row) {
            missing.push_back(genome_ids[i]);
            continue;
        }
        if (!include_diverged && row->diverged) continue;
        joined.push_back({&genome_ids[i], scores[i], row});
    }
    if (!missing.empty()) {
        std::string msg = "genomes missing from the benchmark table:";
        for (const auto& id : missing) msg += " " + id;
        throw ValidationError(msg);
    }
    if (joined.size() < 2) throw ValidationError("need at least 2 joined genomes to evaluate");

    std::vector<double> keys, accs;
    for (const auto& j : joined) {
        keys.push_back(higher_is_better ? j.score : -j.score);
        accs.push_back(j.row->accuracy);
    }

    std::vector<size_t> order(joined.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (keys[a] != keys[b]) return keys[a] > keys[b];
        return *joined[a].id < *joined[b].id;
    });

    TauReport report;
    report.metric = metric;
    report.dataset = joined.front().row->dataset;
    report.variant = variant;
    report.tau = kendall_tau(keys, accs, variant);
    report.n_architectures = static_cast<int>(joined.size());
    for (size_t i : order) {
        report.ranking.push_back(*joined[i].id);
        report.ranked_scores.push_back(joined[i].score);
        report.ranked_accuracy.push_back(joined[i].row->accuracy);
    }
    report.top_pick_id = report.ranking.front();
    report.top_pick_accuracy = report.ranked_accuracy.front();
    report.best_possible = *std::max_element(accs.begin(), accs.end());
    return report;
}

TauReport evaluate_metric(const std::vector<ScoreRecord>& scores, const BenchmarkTable& bench,
                          TauVariant variant, bool include_diverged) {
    if (scores.empty()) throw ValidationError("no score records to evaluate");
    for (const auto& r : scores)
        if (r.metric != scores.front().metric)
            throw ValidationError("evaluate_metric expects records for a single metric");
    std::vector<std::string> ids;
    std::vector<double> values;
    for (const auto& r : scores) {
        ids.push_back(r.genome_id);
        values.push_back(r.score);
    }
    return evaluate_scores(metric_name(scores.front().metric), ids, values,
                           scores.front().higher_is_better, bench, variant, include_diverged);
}

std::string tau_report_to_json(const TauReport& report) {
    nlohmann::json j{
        {"metric", report.metric},
        {"dataset", report.dataset},
        {"tau", report.tau},
        {"tau_variant", tau_variant_name(report.variant)},
        {"n_architectures", report.n_architectures},
        {"top_pick", {{"id", report.top_pick_id}, {"accuracy", report.top_pick_accuracy}}},
        {"best_possible", report.best_possible},
        {"ranking", report.ranking},
    };
    return j.dump(2) + "\n";
}

void save_ranking_csv(const std::string& path, const TauReport& report) {
    std::ostringstream os;
    os << "rank,genome_id,score,accuracy\n";
    for (size_t i = 0; i < report.ranking.size(); ++i) {
        os << (i + 1) << ',' << report.ranking[i] << ',' << fmt_g17(report.ranked_scores[i]) << ','
           << fmt_g17(report.ranked_accuracy[i]) << '\n';
    }
    write_text(path, os.str());
}

}  // namespace gradalign
