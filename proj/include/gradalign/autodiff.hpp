#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gradalign/probe.hpp"

namespace gradalign {

enum class ParamKind { weight, bias };

struct ParamEntry {
    std::string layer;  // stable layer id, e.g. "c0.e03.fc0" or "head"
    ParamKind kind = ParamKind::weight;
    int rows = 0;
    int cols = 0;  // bias entries have cols == 1
    Eigen::MatrixXd value;

    int size() const { return rows * cols; }
};

// Ordered parameter store with a canonical flat layout: entries follow the
// topological order of their layers, weight before bias within a layer,
// row-major within an entry.
class ParameterSet {
public:
    std::vector<ParamEntry> entries;

    void rebuild_offsets();

    int dim() const { return dim_; }
    int offset(int entry_index) const { return offsets_[static_cast<size_t>(entry_index)]; }

    Eigen::VectorXd flatten() const;
    void assign(const Eigen::VectorXd& flat);

    double get_flat(int k) const;
    void add_flat(int k, double delta);

    struct Coord {
        int entry;
        int row;
        int col;
    };
    Coord locate(int k) const;

    bool all_finite() const;

private:
    std::vector<int> offsets_;
    int dim_ = 0;
};

enum class NodeKind { input, dense, relu, sum };

// One node of the computation graph. `sum` nodes add any number of inputs;
// a sum with no inputs is the zero vector of its dimension.
struct Node {
    NodeKind kind = NodeKind::sum;
    int dim = 0;
    std::vector<int> inputs;
    int weight_entry = -1;  // dense only
    int bias_entry = -1;
};

struct NetworkInstance {
    int input_dim = 0;
    int output_dim = 0;
    std::vector<Node> nodes;  // topological order; front() is the input, back() the logits
    ParameterSet params;
    std::string genome_id;

    std::vector<int> relu_nodes;  // topo order, rebuilt by finalize()

    void finalize();     // validates wiring, caches relu_nodes, rebuilds offsets
    int relu_units() const;
};

// Chain MLP [dims[0], dims[1], ..., dims.back()] with ReLU after every layer
// except (optionally) the last. Parameters are uninitialized (zero).
NetworkInstance make_mlp(const std::vector<int>& dims, bool output_relu, const std::string& id);

struct ForwardTrace {
    std::vector<Eigen::VectorXd> values;  // per-node outputs
    std::vector<uint8_t> code;            // ReLU on/off bits, relu nodes in topo order

    const Eigen::VectorXd& logits() const { return values.back(); }
};

ForwardTrace forward(const NetworkInstance& net, const Eigen::VectorXd& x);

// Column-batched forward; returns the logits for every column of xs.
Eigen::MatrixXd forward_batch(const NetworkInstance& net, const Eigen::MatrixXd& xs);

// Column-batched forward that also emits each column's ReLU activation code,
// packed little-endian into 64-bit words.
struct BatchCodes {
    Eigen::MatrixXd logits;
    std::vector<std::vector<uint64_t>> codes;  // one packed code per column
    int code_bits = 0;
};
BatchCodes forward_batch_codes(const NetworkInstance& net, const Eigen::MatrixXd& xs);

enum class LossKind { cross_entropy, mse };

double loss_value(const Eigen::VectorXd& logits, const Eigen::VectorXd& target, LossKind kind);

Eigen::VectorXd one_hot(int label, int classes);

struct LossGrad {
    double loss = 0.0;
    Eigen::VectorXd grad;  // flattened over ParameterSet
};

// Loss and exact parameter gradient for a single (x, target) pair.
LossGrad loss_and_gradient(const NetworkInstance& net, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& target, LossKind kind);

struct GradientMatrix {
    Eigen::MatrixXd rows;  // N x d, one per-sample gradient per row
    std::vector<int> labels;

    int samples() const { return static_cast<int>(rows.rows()); }
    int dim() const { return static_cast<int>(rows.cols()); }
};

// Per-sample gradients over a probe, rows in probe order (groups ascending by
// label, samples in group order). No parameter update occurs.
GradientMatrix per_sample_gradients(const NetworkInstance& net, const ProbeSet& probe,
                                    LossKind loss = LossKind::cross_entropy);

// Gradient of the mean loss over (xs, labels), accumulated in one buffer.
LossGrad batch_gradient(const NetworkInstance& net, const Eigen::MatrixXd& xs,
                        const std::vector<int>& labels, LossKind kind);

// Central-difference gradient estimate, one coordinate at a time.
Eigen::VectorXd finite_diff_gradient(const NetworkInstance& net, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& target, LossKind kind, double step);

}  // namespace gradalign
