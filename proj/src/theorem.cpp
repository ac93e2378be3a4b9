#include "gradalign/theorem.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "gradalign/errors.hpp"
#include "gradalign/textio.hpp"

namespace gradalign {

SampleLoss quadratic_loss(Eigen::MatrixXd hessian, Eigen::VectorXd a) {
    auto h = std::make_shared<Eigen::MatrixXd>(std::move(hessian));
    auto center = std::make_shared<Eigen::VectorXd>(std::move(a));
    SampleLoss loss;
    loss.value = [h, center](const Eigen::VectorXd& theta) {
        const Eigen::VectorXd r = theta - *center;
        return 0.5 * r.dot(*h * r);
    };
    loss.grad = [h, center](const Eigen::VectorXd& theta) {
        return Eigen::VectorXd(*h * (theta - *center));
    };
    return loss;
}

BoundReport one_step_bound_check(const TheoremProbe& probe) {
    if (probe.smoothness <= 0.0) throw ValidationError("smoothness constant M must be > 0");
    if (probe.learning_rate > 1.0 / probe.smoothness + 1e-15)
        throw ValidationError("learning rate exceeds 1/M");
    if (probe.learning_rate < 0.0) throw ValidationError("learning rate must be >= 0");

    const Eigen::VectorXd g1 = probe.l1.grad(probe.theta);
    const Eigen::VectorXd g2 = probe.l2.grad(probe.theta);
    const Eigen::VectorXd g = g1 + g2;

    BoundReport report;
    report.g1_norm2 = g1.squaredNorm();
    report.g2_norm2 = g2.squaredNorm();
    report.grad_bound = std::max(report.g1_norm2, report.g2_norm2);
    const double norms = std::sqrt(report.g1_norm2) * std::sqrt(report.g2_norm2);
    report.cos_beta = norms > 0.0 ? std::clamp(g1.dot(g2) / norms, -1.0, 1.0) : 0.0;

    report.theta_plus = probe.theta - probe.learning_rate * g;
    report.loss_before = probe.l1.value(probe.theta) + probe.l2.value(probe.theta);
    report.loss_after = probe.l1.value(report.theta_plus) + probe.l2.value(report.theta_plus);
    report.measured_decrease = report.loss_before - report.loss_after;

    const double lam = probe.learning_rate;
    const double coeff = lam - 0.5 * probe.smoothness * lam * lam;
    report.tight_bound = coeff * g.squaredNorm();
    report.stated_bound =
        0.5 * lam * (2.0 * report.grad_bound + report.cos_beta * report.grad_bound * report.grad_bound);
    report.slack = report.measured_decrease - report.tight_bound;
    report.holds = report.measured_decrease >= report.tight_bound - 1e-9;
    return report;
}

CosBetaResult pairwise_cos_beta(const Eigen::MatrixXd& grads) {
    CosBetaResult result;
    std::vector<double> norms;
    for (int i = 0; i < grads.rows(); ++i) {
        const double n = grads.row(i).norm();
        if (n > 0.0) {
            result.included.push_back(i);
            norms.push_back(n);
        } else {
            result.excluded.push_back(i);
        }
    }
    const int m = static_cast<int>(result.included.size());
    result.cos_beta.resize(m, m);
    for (int i = 0; i < m; ++i) {
        result.cos_beta(i, i) = 1.0;
        for (int j = i + 1; j < m; ++j) {
            const double dot = grads.row(result.included[static_cast<size_t>(i)])
                                   .dot(grads.row(result.included[static_cast<size_t>(j)]));
            const double c = std::clamp(
                dot / (norms[static_cast<size_t>(i)] * norms[static_cast<size_t>(j)]), -1.0, 1.0);
            result.cos_beta(i, j) = result.cos_beta(j, i) = c;
        }
    }
    return result;
}

TheoremProbe to_probe(const QuadraticInstance& instance, double learning_rate) {
    TheoremProbe probe;
    probe.l1 = quadratic_loss(instance.h1, instance.a1);
    probe.l2 = quadratic_loss(instance.h2, instance.a2);
    probe.theta = instance.theta;
    probe.smoothness = instance.smoothness;
    probe.learning_rate = learning_rate;
    return probe;
}

namespace {

Eigen::MatrixXd random_psd(int dim, Rng& rng) {
    Eigen::MatrixXd gauss(dim, dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) gauss(r, c) = rng.normal();
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
    const Eigen::MatrixXd q = qr.householderQ();
    Eigen::VectorXd eigs(dim);
    for (int i = 0; i < dim; ++i) eigs[i] = rng.uniform(0.1, 3.0);
    return q * eigs.asDiagonal() * q.transpose();
}

Eigen::VectorXd random_vector(int dim, Rng& rng) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = rng.normal();
    return v;
}

}  // namespace

QuadraticInstance random_quadratic(int dim, Rng& rng) {
    QuadraticInstance inst;
    inst.h1 = random_psd(dim, rng);
    inst.h2 = random_psd(dim, rng);
    inst.a1 = random_vector(dim, rng);
    inst.a2 = random_vector(dim, rng);
    inst.theta = random_vector(dim, rng);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inst.h1 + inst.h2,
                                                            Eigen::EigenvaluesOnly);
    inst.smoothness = es.eigenvalues().maxCoeff();
    return inst;
}

QuadraticInstance isotropic_quadratic(int dim, Rng& rng) {
    QuadraticInstance inst;
    const double c1 = rng.uniform(0.2, 2.0);
    const double c2 = rng.uniform(0.2, 2.0);
    inst.h1 = c1 * Eigen::MatrixXd::Identity(dim, dim);
    inst.h2 = c2 * Eigen::MatrixXd::Identity(dim, dim);
    inst.a1 = random_vector(dim, rng);
    inst.a2 = random_vector(dim, rng);
    inst.theta = random_vector(dim, rng);
    inst.smoothness = c1 + c2;
    return inst;
}

std::vector<SweepRow> relu_bound_sweep(const NetworkInstance& net, const ProbeSet& probe,
                                       const std::vector<double>& learning_rates,
                                       LossKind loss) {
    for (double lam : learning_rates)
        if (lam <= 0.0) throw ValidationError("learning-rate grid must be positive");

    const GradientMatrix grads = per_sample_gradients(net, probe, loss);
    const Eigen::VectorXd total_grad = grads.rows.colwise().sum();

    const CosBetaResult cos = pairwise_cos_beta(grads.rows);
    double mean = 0.0, lo = 1.0, hi = -1.0;
    long pairs = 0;
    for (int i = 0; i < cos.cos_beta.rows(); ++i) {
        for (int j = i + 1; j < cos.cos_beta.cols(); ++j) {
            mean += cos.cos_beta(i, j);
            lo = std::min(lo, cos.cos_beta(i, j));
            hi = std::max(hi, cos.cos_beta(i, j));
            ++pairs;
        }
    }
    if (pairs > 0) mean /= static_cast<double>(pairs);
    else lo = hi = 0.0;

    auto total_loss = [&](const NetworkInstance& candidate) {
        double sum = 0.0;
        for (const auto& group : probe.groups) {
            const Eigen::VectorXd target = one_hot(group.label, probe.num_classes);
            const Eigen::MatrixXd logits = forward_batch(candidate, group.xs);
            for (int j = 0; j < logits.cols(); ++j) sum += loss_value(logits.col(j), target, loss);
        }
        return sum;
    };

    const double base_loss = total_loss(net);
    const Eigen::VectorXd theta = net.params.flatten();

    std::vector<SweepRow> rows;
    NetworkInstance work = net;
    for (double lam : learning_rates) {
        work.params.assign(theta - lam * total_grad);
        SweepRow row;
        row.learning_rate = lam;
        row.decrease = base_loss - total_loss(work);
        row.mean_cos = mean;
        row.min_cos = lo;
        row.max_cos = hi;
        rows.push_back(row);
    }
    return rows;
}

void save_bound_csv(const std::string& path, const std::vector<BoundReport>& reports,
                    const std::vector<double>& smoothness, const std::vector<double>& lambdas) {
    if (reports.size() != smoothness.size() || reports.size() != lambdas.size())
        throw ValidationError("bound CSV inputs must have equal lengths");
    std::ostringstream os;
    os << "instance_id,lambda,M,cos_beta,measured_decrease,tight_bound,stated_bound,holds\n";
    for (size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        os << i << ',' << fmt_g17(lambdas[i]) << ',' << fmt_g17(smoothness[i]) << ','
           << fmt_g17(r.cos_beta) << ',' << fmt_g17(r.measured_decrease) << ','
           << fmt_g17(r.tight_bound) << ',' << fmt_g17(r.stated_bound) << ','
           << (r.holds ? 1 : 0) << '\n';
    }
    write_text(path, os.str());
}

}  // namespace gradalign
