#include "gradalign/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "gradalign/errors.hpp"

namespace gradalign {

void ParameterSet::rebuild_offsets() {
    offsets_.clear();
    offsets_.reserve(entries.size());
    int off = 0;
    for (const auto& e : entries) {
        offsets_.push_back(off);
        off += e.size();
    }
    dim_ = off;
}

Eigen::VectorXd ParameterSet::flatten() const {
    Eigen::VectorXd out(dim_);
    int k = 0;
    for (const auto& e : entries) {
        for (int r = 0; r < e.rows; ++r)
            for (int c = 0; c < e.cols; ++c) out[k++] = e.value(r, c);
    }
    return out;
}

void ParameterSet::assign(const Eigen::VectorXd& flat) {
    if (flat.size() != dim_) throw ValidationError("flat vector length does not match parameter dim");
    int k = 0;
    for (auto& e : entries) {
        for (int r = 0; r < e.rows; ++r)
            for (int c = 0; c < e.cols; ++c) e.value(r, c) = flat[k++];
    }
}

ParameterSet::Coord ParameterSet::locate(int k) const {
    if (k < 0 || k >= dim_) throw ValidationError("flat coordinate out of range");
    int idx = static_cast<int>(std::upper_bound(offsets_.begin(), offsets_.end(), k) - offsets_.begin()) - 1;
    const int local = k - offsets_[static_cast<size_t>(idx)];
    const int cols = entries[static_cast<size_t>(idx)].cols;
    return Coord{idx, local / cols, local % cols};
}

double ParameterSet::get_flat(int k) const {
    const Coord c = locate(k);
    return entries[static_cast<size_t>(c.entry)].value(c.row, c.col);
}

void ParameterSet::add_flat(int k, double delta) {
    const Coord c = locate(k);
    entries[static_cast<size_t>(c.entry)].value(c.row, c.col) += delta;
}

bool ParameterSet::all_finite() const {
    for (const auto& e : entries)
        if (!e.value.allFinite()) return false;
    return true;
}

void NetworkInstance::finalize() {
    params.rebuild_offsets();
    relu_nodes.clear();
    if (nodes.empty() || nodes.front().kind != NodeKind::input)
        throw ValidationError("network graph must start with an input node");
    for (size_t i = 0; i < nodes.size(); ++i) {
        const Node& n = nodes[i];
        for (int in : n.inputs) {
            if (in < 0 || static_cast<size_t>(in) >= i)
                throw ValidationError("graph inputs must reference earlier nodes");
        }
        switch (n.kind) {
            case NodeKind::input:
                if (i != 0) throw ValidationError("only node 0 may be the input");
                break;
            case NodeKind::dense: {
                if (n.inputs.size() != 1) throw ValidationError("dense node takes one input");
                const auto& w = params.entries.at(static_cast<size_t>(n.weight_entry));
                const auto& b = params.entries.at(static_cast<size_t>(n.bias_entry));
                if (w.rows != n.dim || w.cols != nodes[static_cast<size_t>(n.inputs[0])].dim ||
                    b.rows != n.dim || b.cols != 1)
                    throw ValidationError("dense node shape mismatch");
                break;
            }
            case NodeKind::relu:
                if (n.inputs.size() != 1 || nodes[static_cast<size_t>(n.inputs[0])].dim != n.dim)
                    throw ValidationError("relu node shape mismatch");
                relu_nodes.push_back(static_cast<int>(i));
                break;
            case NodeKind::sum:
                for (int in : n.inputs)
                    if (nodes[static_cast<size_t>(in)].dim != n.dim)
                        throw ValidationError("sum node dimension mismatch");
                break;
        }
    }
    input_dim = nodes.front().dim;
    output_dim = nodes.back().dim;
}

int NetworkInstance::relu_units() const {
    int n = 0;
    for (int r : relu_nodes) n += nodes[static_cast<size_t>(r)].dim;
    return n;
}

NetworkInstance make_mlp(const std::vector<int>& dims, bool output_relu, const std::string& id) {
    if (dims.size() < 2) throw ValidationError("mlp needs at least input and output dims");
    NetworkInstance net;
    net.genome_id = id;
    net.nodes.push_back(Node{NodeKind::input, dims[0], {}, -1, -1});
    int prev = 0;
    for (size_t l = 1; l < dims.size(); ++l) {
        const std::string layer = "fc" + std::to_string(l - 1);
        const int in_dim = dims[l - 1];
        const int out_dim = dims[l];
        const int wi = static_cast<int>(net.params.entries.size());
        net.params.entries.push_back(
            {layer, ParamKind::weight, out_dim, in_dim, Eigen::MatrixXd::Zero(out_dim, in_dim)});
        net.params.entries.push_back(
            {layer, ParamKind::bias, out_dim, 1, Eigen::MatrixXd::Zero(out_dim, 1)});
        net.nodes.push_back(Node{NodeKind::dense, out_dim, {prev}, wi, wi + 1});
        prev = static_cast<int>(net.nodes.size()) - 1;
        if (l + 1 < dims.size() || output_relu) {
            net.nodes.push_back(Node{NodeKind::relu, out_dim, {prev}, -1, -1});
            prev = static_cast<int>(net.nodes.size()) - 1;
        }
    }
    net.finalize();
    return net;
}

namespace {

void forward_values(const NetworkInstance& net, const Eigen::MatrixXd& x,
                    std::vector<Eigen::MatrixXd>& values) {
    values.resize(net.nodes.size());
    values[0] = x;
    for (size_t i = 1; i < net.nodes.size(); ++i) {
        const Node& n = net.nodes[i];
        switch (n.kind) {
            case NodeKind::input:
                break;
            case NodeKind::dense: {
                const auto& w = net.params.entries[static_cast<size_t>(n.weight_entry)].value;
                const auto& b = net.params.entries[static_cast<size_t>(n.bias_entry)].value;
                values[i] = (w * values[static_cast<size_t>(n.inputs[0])]).colwise() +
                            Eigen::VectorXd(b.col(0));
                break;
            }
            case NodeKind::relu:
                values[i] = values[static_cast<size_t>(n.inputs[0])].cwiseMax(0.0);
                break;
            case NodeKind::sum: {
                Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n.dim, x.cols());
                for (int in : n.inputs) acc += values[static_cast<size_t>(in)];
                values[i] = std::move(acc);
                break;
            }
        }
    }
}

}  // namespace

ForwardTrace forward(const NetworkInstance& net, const Eigen::VectorXd& x) {
    if (x.size() != net.input_dim) throw ValidationError("input dimension mismatch");
    std::vector<Eigen::MatrixXd> values;
    forward_values(net, x, values);
    ForwardTrace trace;
    trace.values.reserve(values.size());
    for (auto& v : values) trace.values.push_back(v.col(0));
    trace.code.reserve(static_cast<size_t>(net.relu_units()));
    for (int r : net.relu_nodes) {
        const auto& pre = trace.values[static_cast<size_t>(net.nodes[static_cast<size_t>(r)].inputs[0])];
        for (int k = 0; k < pre.size(); ++k) trace.code.push_back(pre[k] > 0.0 ? 1 : 0);
    }
    return trace;
}

Eigen::MatrixXd forward_batch(const NetworkInstance& net, const Eigen::MatrixXd& xs) {
    if (xs.rows() != net.input_dim) throw ValidationError("input dimension mismatch");
    std::vector<Eigen::MatrixXd> values;
    forward_values(net, xs, values);
    return values.back();
}

BatchCodes forward_batch_codes(const NetworkInstance& net, const Eigen::MatrixXd& xs) {
    if (xs.rows() != net.input_dim) throw ValidationError("input dimension mismatch");
    std::vector<Eigen::MatrixXd> values;
    forward_values(net, xs, values);

    BatchCodes out;
    out.logits = values.back();
    out.code_bits = net.relu_units();
    const size_t words = (static_cast<size_t>(out.code_bits) + 63) / 64;
    out.codes.assign(static_cast<size_t>(xs.cols()), std::vector<uint64_t>(words, 0));
    int bit = 0;
    for (int r : net.relu_nodes) {
        const auto& pre = values[static_cast<size_t>(net.nodes[static_cast<size_t>(r)].inputs[0])];
        for (int k = 0; k < pre.rows(); ++k, ++bit) {
            for (int j = 0; j < pre.cols(); ++j) {
                if (pre(k, j) > 0.0)
                    out.codes[static_cast<size_t>(j)][static_cast<size_t>(bit) / 64] |=
                        (uint64_t{1} << (bit % 64));
            }
        }
    }
    return out;
}

Eigen::VectorXd one_hot(int label, int classes) {
    if (label < 0 || label >= classes) throw ValidationError("label out of range");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(classes);
    v[label] = 1.0;
    return v;
}

double loss_value(const Eigen::VectorXd& logits, const Eigen::VectorXd& target, LossKind kind) {
    if (logits.size() != target.size()) throw ValidationError("loss target dimension mismatch");
    if (kind == LossKind::mse) return 0.5 * (logits - target).squaredNorm();
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return lse - logits.dot(target);
}

namespace {

Eigen::VectorXd loss_logit_gradient(const Eigen::VectorXd& logits, const Eigen::VectorXd& target,
                                    LossKind kind) {
    if (kind == LossKind::mse) return logits - target;
    const double m = logits.maxCoeff();
    Eigen::VectorXd p = (logits.array() - m).exp();
    p /= p.sum();
    return p - target;
}

// Reverse accumulation from the logits adjoint into `grad` (flattened, +=).
void backward(const NetworkInstance& net, const std::vector<Eigen::MatrixXd>& values,
              const Eigen::VectorXd& logit_adjoint, double scale, Eigen::VectorXd& grad) {
    std::vector<Eigen::VectorXd> adj(net.nodes.size());
    adj.back() = scale * logit_adjoint;
    for (size_t i = net.nodes.size(); i-- > 1;) {
        if (adj[i].size() == 0) continue;
        const Node& n = net.nodes[i];
        switch (n.kind) {
            case NodeKind::input:
                break;
            case NodeKind::dense: {
                const auto& w = net.params.entries[static_cast<size_t>(n.weight_entry)].value;
                const auto& in_val = values[static_cast<size_t>(n.inputs[0])];
                const int woff = net.params.offset(n.weight_entry);
                const int boff = net.params.offset(n.bias_entry);
                // row-major layout of the weight entry
                Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
                    gw(grad.data() + woff, w.rows(), w.cols());
                gw.noalias() += adj[i] * in_val.col(0).transpose();
                grad.segment(boff, w.rows()) += adj[i];
                auto& down = adj[static_cast<size_t>(n.inputs[0])];
                if (down.size() == 0) down = Eigen::VectorXd::Zero(w.cols());
                down.noalias() += w.transpose() * adj[i];
                break;
            }
            case NodeKind::relu: {
                const auto& pre = values[static_cast<size_t>(n.inputs[0])];
                auto& down = adj[static_cast<size_t>(n.inputs[0])];
                if (down.size() == 0) down = Eigen::VectorXd::Zero(n.dim);
                // subgradient at exactly 0 is 0
                down.array() += adj[i].array() * (pre.col(0).array() > 0.0).cast<double>();
                break;
            }
            case NodeKind::sum: {
                for (int in : n.inputs) {
                    auto& down = adj[static_cast<size_t>(in)];
                    if (down.size() == 0) down = Eigen::VectorXd::Zero(n.dim);
                    down += adj[i];
                }
                break;
            }
        }
    }
}

}  // namespace

LossGrad loss_and_gradient(const NetworkInstance& net, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& target, LossKind kind) {
    if (x.size() != net.input_dim) throw ValidationError("input dimension mismatch");
    std::vector<Eigen::MatrixXd> values;
    forward_values(net, x, values);
    LossGrad out;
    out.loss = loss_value(values.back().col(0), target, kind);
    out.grad = Eigen::VectorXd::Zero(net.params.dim());
    backward(net, values, loss_logit_gradient(values.back().col(0), target, kind), 1.0, out.grad);
    return out;
}

GradientMatrix per_sample_gradients(const NetworkInstance& net, const ProbeSet& probe,
                                    LossKind loss) {
    int total = 0;
    for (const auto& g : probe.groups) total += g.count();
    if (total == 0) throw ValidationError("empty probe");

    GradientMatrix gm;
    gm.rows.resize(total, net.params.dim());
    gm.labels.reserve(static_cast<size_t>(total));
    int row = 0;
    for (const auto& g : probe.groups) {
        const Eigen::VectorXd target = one_hot(g.label, probe.num_classes);
        for (int j = 0; j < g.count(); ++j) {
            const LossGrad lg = loss_and_gradient(net, g.xs.col(j), target, loss);
            gm.rows.row(row) = lg.grad.transpose();
            gm.labels.push_back(g.label);
            ++row;
        }
    }
    return gm;
}

LossGrad batch_gradient(const NetworkInstance& net, const Eigen::MatrixXd& xs,
                        const std::vector<int>& labels, LossKind kind) {
    const int n = static_cast<int>(xs.cols());
    if (n == 0) throw ValidationError("empty batch");
    if (labels.size() != static_cast<size_t>(n)) throw ValidationError("labels/batch size mismatch");

    LossGrad out;
    out.grad = Eigen::VectorXd::Zero(net.params.dim());
    const double scale = 1.0 / n;
    std::vector<Eigen::MatrixXd> values;
    for (int j = 0; j < n; ++j) {
        forward_values(net, xs.col(j), values);
        const Eigen::VectorXd target = one_hot(labels[static_cast<size_t>(j)], net.output_dim);
        out.loss += scale * loss_value(values.back().col(0), target, kind);
        backward(net, values, loss_logit_gradient(values.back().col(0), target, kind), scale,
                 out.grad);
    }
    return out;
}

Eigen::VectorXd finite_diff_gradient(const NetworkInstance& net, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& target, LossKind kind, double step) {
    if (step <= 0.0) throw ValidationError("finite-difference step must be positive");
    NetworkInstance work = net;
    const int d = work.params.dim();
    Eigen::VectorXd grad(d);
    for (int k = 0; k < d; ++k) {
        work.params.add_flat(k, step);
        const double up = loss_value(forward_batch(work, x).col(0), target, kind);
        work.params.add_flat(k, -2.0 * step);
        const double down = loss_value(forward_batch(work, x).col(0), target, kind);
        work.params.add_flat(k, step);
        grad[k] = (up - down) / (2.0 * step);
    }
    return grad;
}

}  // namespace gradalign
