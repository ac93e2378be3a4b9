#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "gradalign/autodiff.hpp"
#include "gradalign/probe.hpp"
#include "gradalign/rng.hpp"

namespace gradalign {

struct SampleLoss {
    std::function<double(const Eigen::VectorXd&)> value;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad;
};

// l(theta) = 1/2 (theta - a)^T H (theta - a), H symmetric PSD.
SampleLoss quadratic_loss(Eigen::MatrixXd hessian, Eigen::VectorXd a);

struct TheoremProbe {
    SampleLoss l1, l2;
    Eigen::VectorXd theta;
    double smoothness = 0.0;     // M: Lipschitz constant of grad(l1 + l2)
    double learning_rate = 0.0;  // lambda, must satisfy lambda <= 1/M
};

struct BoundReport {
    double loss_before = 0.0;
    double loss_after = 0.0;
    double measured_decrease = 0.0;
    double tight_bound = 0.0;   // (lambda - M lambda^2 / 2) |g1 + g2|^2
    double stated_bound = 0.0;  // lambda/2 (2G + cos(beta) G^2), G = max grad norm^2
    double cos_beta = 0.0;
    double g1_norm2 = 0.0;
    double g2_norm2 = 0.0;
    double grad_bound = 0.0;  // G
    double slack = 0.0;       // measured - tight
    bool holds = false;       // measured >= tight - 1e-9
    Eigen::VectorXd theta_plus;
};

// One gradient-descent step theta+ = theta - lambda (g1 + g2) and the
// resulting loss decrease versus its bounds. Throws when lambda > 1/M.
BoundReport one_step_bound_check(const TheoremProbe& probe);

struct CosBetaResult {
    Eigen::MatrixXd cos_beta;       // symmetric over the included rows, unit diagonal
    std::vector<int> included;      // original row indices
    std::vector<int> excluded;      // zero-norm rows
};

// Pairwise cos(beta) over raw per-sample gradients, entries clamped to [-1, 1].
CosBetaResult pairwise_cos_beta(const Eigen::MatrixXd& grads);

struct QuadraticInstance {
    Eigen::MatrixXd h1, h2;
    Eigen::VectorXd a1, a2, theta;
    double smoothness = 0.0;  // exact: largest eigenvalue of h1 + h2
};

TheoremProbe to_probe(const QuadraticInstance& instance, double learning_rate);

// Random PSD quadratic pair; smoothness is exact.
QuadraticInstance random_quadratic(int dim, Rng& rng);

// Hessian of l1 + l2 is M*I, so the one-step decrease meets the tight bound
// with equality.
QuadraticInstance isotropic_quadratic(int dim, Rng& rng);

struct SweepRow {
    double learning_rate = 0.0;
    double decrease = 0.0;
    double mean_cos = 0.0;
    double min_cos = 0.0;
    double max_cos = 0.0;
};

// Empirical sweep on a ReLU network: no smoothness constant is claimed and
// nothing is asserted; the rows just record decrease vs alignment per lambda.
std::vector<SweepRow> relu_bound_sweep(const NetworkInstance& net, const ProbeSet& probe,
                                       const std::vector<double>& learning_rates,
                                       LossKind loss = LossKind::cross_entropy);

// CSV schema: instance_id,lambda,M,cos_beta,measured_decrease,tight_bound,
//             stated_bound,holds
void save_bound_csv(const std::string& path, const std::vector<BoundReport>& reports,
                    const std::vector<double>& smoothness, const std::vector<double>& lambdas);

}  // namespace gradalign
