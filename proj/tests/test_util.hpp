#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gradalign/archspace.hpp"
#include "gradalign/autodiff.hpp"
#include "gradalign/probe.hpp"
#include "gradalign/rng.hpp"

namespace testutil {

inline gradalign::NetworkInstance random_mlp(const std::vector<int>& dims, uint64_t seed,
                                             bool output_relu = false) {
    std::string id = "mlp";
    for (int d : dims) id += "-" + std::to_string(d);
    gradalign::NetworkInstance net = gradalign::make_mlp(dims, output_relu, id);
    gradalign::initialize(net, seed);
    return net;
}

inline Eigen::VectorXd random_vector(int dim, gradalign::Rng& rng, double scale = 1.0) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = scale * rng.normal();
    return v;
}

// Single-group probe around the given samples.
inline gradalign::ProbeSet probe_of(const Eigen::MatrixXd& xs, int label, int num_classes) {
    gradalign::ProbeSet probe;
    probe.dataset_id = "fixture";
    probe.num_classes = num_classes;
    probe.size = static_cast<int>(xs.cols());
    gradalign::ProbeSet::Group group;
    group.label = label;
    group.xs = xs;
    probe.groups.push_back(group);
    return probe;
}

}  // namespace testutil
