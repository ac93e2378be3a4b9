#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace gradalign {

// A stratified labeled mini-batch, grouped by class. Samples are stored as
// columns so batched forward passes can run on whole groups.
struct ProbeSet {
    struct Group {
        int label = 0;
        Eigen::MatrixXd xs;  // input_dim x count
        int count() const { return static_cast<int>(xs.cols()); }
    };

    std::string dataset_id;
    uint64_t seed = 0;
    int size = 0;
    int num_classes = 0;
    std::vector<Group> groups;  // ascending label

    int input_dim() const {
        return groups.empty() ? 0 : static_cast<int>(groups.front().xs.rows());
    }
};

}  // namespace gradalign
