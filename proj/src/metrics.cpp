#include "gradalign/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "gradalign/errors.hpp"
#include "gradalign/textio.hpp"

namespace gradalign {

namespace {

int sgn(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

}  // namespace

SignMatrix sign_matrix(const Eigen::MatrixXd& grads, int class_label) {
    if (grads.rows() < 1) throw ValidationError("sign_matrix needs a non-empty gradient matrix");
    SignMatrix s;
    s.class_label = class_label;
    s.entries.resize(grads.rows(), grads.cols());
    for (int i = 0; i < grads.rows(); ++i)
        for (int k = 0; k < grads.cols(); ++k) s.entries(i, k) = sgn(grads(i, k));
    return s;
}

double clamped_logdet(const Eigen::MatrixXd& symmetric) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetric, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
    double s = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i)
        s += std::log(std::max(es.eigenvalues()[i], kLogDetEps));
    return s;
}

double gradalign1(const SignMatrix& signs, const Eigen::VectorXd& mean_grad) {
    if (mean_grad.size() != signs.dim())
        throw ValidationError("mean gradient length does not match sign matrix width");
    Eigen::VectorXi tilde(mean_grad.size());
    for (int k = 0; k < mean_grad.size(); ++k) tilde[k] = sgn(mean_grad[k]);
    double total = 0.0;
    for (int i = 0; i < signs.samples(); ++i)
        total += static_cast<double>(signs.entries.row(i).dot(tilde.transpose()));
    return total / signs.samples();
}

double gradalign2(const SignMatrix& signs) {
    const Eigen::MatrixXd s = signs.entries.cast<double>();
    return clamped_logdet(s * s.transpose());
}

double gradsign_score(const SignMatrix& signs) {
    double total = 0.0;
    for (int k = 0; k < signs.dim(); ++k)
        total += std::abs(static_cast<double>(signs.entries.col(k).sum()));
    return total;
}

double naswot_from_codes(const std::vector<std::vector<uint8_t>>& codes) {
    if (codes.size() < 2) throw ValidationError("naswot needs at least 2 activation codes");
    const size_t bits = codes.front().size();
    for (const auto& c : codes)
        if (c.size() != bits) throw ValidationError("activation codes differ in length");
    const int n = static_cast<int>(codes.size());
    Eigen::MatrixXd k(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            int hamming = 0;
            for (size_t b = 0; b < bits; ++b) hamming += codes[static_cast<size_t>(i)][b] != codes[static_cast<size_t>(j)][b];
            k(i, j) = k(j, i) = static_cast<double>(bits) - hamming;
        }
    }
    return clamped_logdet(k);
}

double naswot_score(const std::vector<ForwardTrace>& traces) {
    std::vector<std::vector<uint8_t>> codes;
    codes.reserve(traces.size());
    for (const auto& t : traces) codes.push_back(t.code);
    return naswot_from_codes(codes);
}

double grad_norm_score(const Eigen::MatrixXd& grads) {
    if (grads.rows() < 1) throw ValidationError("grad_norm needs a non-empty gradient matrix");
    return Eigen::VectorXd(grads.colwise().mean()).norm();
}

std::string metric_name(Metric m) {
    switch (m) {
        case Metric::gradalign1: return "gradalign1";
        case Metric::gradalign2: return "gradalign2";
        case Metric::gradsign: return "gradsign";
        case Metric::naswot: return "naswot";
        case Metric::gradnorm: return "gradnorm";
    }
    throw ValidationError("bad metric");
}

Metric metric_from_name(const std::string& name) {
    for (Metric m : all_metrics())
        if (metric_name(m) == name) return m;
    throw UsageError("unknown metric '" + name +
                     "' (valid: gradalign1, gradalign2, gradsign, naswot, gradnorm)");
}

std::vector<Metric> all_metrics() {
    return {Metric::gradalign1, Metric::gradalign2, Metric::gradsign, Metric::naswot,
            Metric::gradnorm};
}

bool metric_higher_is_better(Metric m) { return m != Metric::gradalign2; }

namespace {

Eigen::MatrixXd class_gradients(const NetworkInstance& net, const ProbeSet::Group& group,
                                int num_classes, LossKind loss) {
    Eigen::MatrixXd rows(group.count(), net.params.dim());
    const Eigen::VectorXd target = one_hot(group.label, num_classes);
    for (int j = 0; j < group.count(); ++j)
        rows.row(j) = loss_and_gradient(net, group.xs.col(j), target, loss).grad.transpose();
    return rows;
}

}  // namespace

ScoreRecord score_architecture(const ArchGenome& genome, const ProbeSet& probe, Metric metric,
                               uint64_t seed) {
    if (probe.groups.empty()) throw ValidationError("empty probe");
    const auto t0 = std::chrono::steady_clock::now();

    NetworkInstance net = decode_genome(genome, probe.input_dim(), probe.num_classes);
    initialize(net, seed);

    const bool pairwise = metric == Metric::gradalign2 || metric == Metric::naswot;
    std::vector<double> per_class;
    for (const auto& group : probe.groups) {
        if (group.count() < 1) continue;
        if (pairwise && group.count() < 2) continue;
        double s = 0.0;
        if (metric == Metric::naswot) {
            std::vector<ForwardTrace> traces;
            traces.reserve(static_cast<size_t>(group.count()));
            for (int j = 0; j < group.count(); ++j) traces.push_back(forward(net, group.xs.col(j)));
            s = naswot_score(traces);
        } else {
            const Eigen::MatrixXd grads =
                class_gradients(net, group, probe.num_classes, LossKind::cross_entropy);
            switch (metric) {
                case Metric::gradalign1:
                    s = gradalign1(sign_matrix(grads, group.label), grads.colwise().mean());
                    break;
                case Metric::gradalign2:
                    s = gradalign2(sign_matrix(grads, group.label));
                    break;
                case Metric::gradsign:
                    s = gradsign_score(sign_matrix(grads, group.label));
                    break;
                case Metric::gradnorm:
                    s = grad_norm_score(grads);
                    break;
                case Metric::naswot:
                    break;
            }
        }
        per_class.push_back(s);
    }
    if (per_class.empty())
        throw ValidationError("insufficient probe: every class was skipped for metric " +
                              metric_name(metric));

    ScoreRecord rec;
    rec.genome_id = genome.id();
    rec.metric = metric;
    rec.per_class = per_class;
    rec.score = 0.0;
    for (double s : per_class) rec.score += s;
    rec.score /= static_cast<double>(per_class.size());
    const double denom = metric == Metric::naswot ? std::max(1, net.relu_units())
                                                  : std::max(1, net.params.dim());
    rec.score_normalized = rec.score / denom;
    rec.higher_is_better = metric_higher_is_better(metric);
    rec.probe_seed = probe.seed;
    rec.probe_size = probe.size;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    return rec;
}

void save_scores_csv(const std::string& path, const std::vector<ScoreRecord>& records) {
    std::ostringstream os;
    os << "genome_id,metric,score,score_normalized,higher_is_better,probe_seed,probe_size,wall_ms\n";
    for (const auto& r : records) {
        os << r.genome_id << ',' << metric_name(r.metric) << ',' << fmt_g17(r.score) << ','
           << fmt_g17(r.score_normalized) << ',' << (r.higher_is_better ? 1 : 0) << ','
           << r.probe_seed << ',' << r.probe_size << ',' << fmt_g17(r.wall_ms) << '\n';
    }
    write_text(path, os.str());
}

std::vector<ScoreRecord> load_scores_csv(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw ValidationError("empty score file: " + path);
    std::vector<ScoreRecord> out;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_csv(lines[i]);
        if (f.size() != 8) throw ValidationError("bad score row in " + path + ": " + lines[i]);
        ScoreRecord r;
        r.genome_id = f[0];
        r.metric = metric_from_name(f[1]);
        r.score = std::stod(f[2]);
        r.score_normalized = std::stod(f[3]);
        r.higher_is_better = f[4] == "1";
        r.probe_seed = std::stoull(f[5]);
        r.probe_size = std::stoi(f[6]);
        r.wall_ms = std::stod(f[7]);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace gradalign
