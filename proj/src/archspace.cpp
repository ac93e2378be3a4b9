#include "gradalign/archspace.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "gradalign/errors.hpp"
#include "gradalign/rng.hpp"

namespace gradalign {

using nlohmann::json;

const std::array<std::pair<int, int>, kCellEdges>& cell_edge_list() {
    static const std::array<std::pair<int, int>, kCellEdges> edges = {
        {{0, 1}, {0, 2}, {1, 2}, {0, 3}, {1, 3}, {2, 3}}};
    return edges;
}

std::string op_name(EdgeOp op) {
    switch (op) {
        case EdgeOp::zero: return "zero";
        case EdgeOp::skip: return "skip";
        case EdgeOp::dense_relu: return "dense-relu";
        case EdgeOp::dense_linear: return "dense-linear";
        case EdgeOp::bottleneck_relu: return "bottleneck-relu";
    }
    throw ValidationError("bad edge op");
}

EdgeOp op_from_name(const std::string& name) {
    if (name == "zero") return EdgeOp::zero;
    if (name == "skip") return EdgeOp::skip;
    if (name == "dense-relu") return EdgeOp::dense_relu;
    if (name == "dense-linear") return EdgeOp::dense_linear;
    if (name == "bottleneck-relu") return EdgeOp::bottleneck_relu;
    throw ValidationError("unknown edge op '" + name +
                          "' (valid: zero, skip, dense-relu, dense-linear, bottleneck-relu)");
}

namespace {

const char* op_code(EdgeOp op) {
    switch (op) {
        case EdgeOp::zero: return "z";
        case EdgeOp::skip: return "s";
        case EdgeOp::dense_relu: return "dr";
        case EdgeOp::dense_linear: return "dl";
        case EdgeOp::bottleneck_relu: return "br";
    }
    return "?";
}

int bottleneck_inner(int width) { return std::max(1, width / 2); }

}  // namespace

std::string ArchGenome::id() const {
    std::ostringstream os;
    for (int e = 0; e < kCellEdges; ++e) {
        if (e) os << '.';
        os << op_code(edges[static_cast<size_t>(e)]);
    }
    os << "-w" << width << "-d" << depth;
    return os.str();
}

void ArchGenome::validate() const {
    if (width < 1) throw ValidationError("genome width must be >= 1");
    if (depth < 1) throw ValidationError("genome depth must be >= 1");
}

void SpaceSpec::validate() const {
    if (ops.empty() || widths.empty() || depths.empty())
        throw ValidationError("space spec alphabets must be non-empty");
    if (count < 1) throw ValidationError("space spec count must be >= 1");
    for (int w : widths)
        if (w < 1) throw ValidationError("space spec widths must be >= 1");
    for (int d : depths)
        if (d < 1) throw ValidationError("space spec depths must be >= 1");
}

NetworkInstance decode_genome(const ArchGenome& genome, int input_dim, int num_classes) {
    genome.validate();
    if (input_dim < 1 || num_classes < 1)
        throw ValidationError("decode needs positive input_dim and num_classes");

    NetworkInstance net;
    net.genome_id = genome.id();
    net.nodes.push_back(Node{NodeKind::input, input_dim, {}, -1, -1});

    const int width = genome.width;
    auto add_dense = [&](const std::string& layer, int src, int out_dim) {
        const int in_dim = net.nodes[static_cast<size_t>(src)].dim;
        const int wi = static_cast<int>(net.params.entries.size());
        net.params.entries.push_back(
            {layer, ParamKind::weight, out_dim, in_dim, Eigen::MatrixXd::Zero(out_dim, in_dim)});
        net.params.entries.push_back(
            {layer, ParamKind::bias, out_dim, 1, Eigen::MatrixXd::Zero(out_dim, 1)});
        net.nodes.push_back(Node{NodeKind::dense, out_dim, {src}, wi, wi + 1});
        return static_cast<int>(net.nodes.size()) - 1;
    };
    auto add_relu = [&](int src) {
        net.nodes.push_back(
            Node{NodeKind::relu, net.nodes[static_cast<size_t>(src)].dim, {src}, -1, -1});
        return static_cast<int>(net.nodes.size()) - 1;
    };

    int carry = 0;  // graph node carrying the current cell input
    for (int cell = 0; cell < genome.depth; ++cell) {
        std::array<int, 4> cell_node{carry, -1, -1, -1};
        for (int j = 1; j <= 3; ++j) {
            std::vector<int> contributions;
            for (int e = 0; e < kCellEdges; ++e) {
                const auto [src, dst] = cell_edge_list()[static_cast<size_t>(e)];
                if (dst != j) continue;
                const EdgeOp op = genome.edges[static_cast<size_t>(e)];
                if (op == EdgeOp::zero) continue;
                const int src_node = cell_node[static_cast<size_t>(src)];
                std::ostringstream layer;
                layer << 'c' << cell << ".e" << src << dst;
                switch (op) {
                    case EdgeOp::skip:
                        contributions.push_back(src_node);
                        break;
                    case EdgeOp::dense_linear:
                        contributions.push_back(add_dense(layer.str() + ".fc0", src_node, width));
                        break;
                    case EdgeOp::dense_relu:
                        contributions.push_back(
                            add_relu(add_dense(layer.str() + ".fc0", src_node, width)));
                        break;
                    case EdgeOp::bottleneck_relu: {
                        const int mid =
                            add_relu(add_dense(layer.str() + ".fc0", src_node, bottleneck_inner(width)));
                        contributions.push_back(add_dense(layer.str() + ".fc1", mid, width));
                        break;
                    }
                    case EdgeOp::zero:
                        break;
                }
            }
            int dim = width;  // a node fed only by zero edges is the zero vector of cell width
            if (!contributions.empty()) {
                dim = net.nodes[static_cast<size_t>(contributions.front())].dim;
                for (int c : contributions) {
                    if (net.nodes[static_cast<size_t>(c)].dim != dim)
                        throw ValidationError("dimension-incompatible skip in genome " + genome.id() +
                                              " (cell " + std::to_string(cell) + ", node " +
                                              std::to_string(j) + ")");
                }
            }
            net.nodes.push_back(Node{NodeKind::sum, dim, contributions, -1, -1});
            cell_node[static_cast<size_t>(j)] = static_cast<int>(net.nodes.size()) - 1;
        }
        carry = cell_node[3];
    }

    add_dense("head", carry, num_classes);
    net.finalize();
    return net;
}

void initialize(NetworkInstance& net, uint64_t seed) {
    // One stream per (genome id, seed), consumed in flat_index order.
    Rng rng(derive_seed(seed, net.genome_id));
    for (auto& e : net.params.entries) {
        if (e.kind == ParamKind::bias) {
            e.value.setZero();
            continue;
        }
        const double bound = std::sqrt(6.0 / e.cols);
        for (int r = 0; r < e.rows; ++r)
            for (int c = 0; c < e.cols; ++c) e.value(r, c) = rng.uniform(-bound, bound);
    }
}

long param_count(const ArchGenome& genome, int input_dim, int num_classes) {
    genome.validate();
    const int width = genome.width;
    auto dense_params = [](int in, int out) { return static_cast<long>(out) * in + out; };

    long total = 0;
    int carry_dim = input_dim;
    for (int cell = 0; cell < genome.depth; ++cell) {
        std::array<int, 4> dims{carry_dim, -1, -1, -1};
        for (int j = 1; j <= 3; ++j) {
            int dim = -1;
            for (int e = 0; e < kCellEdges; ++e) {
                const auto [src, dst] = cell_edge_list()[static_cast<size_t>(e)];
                if (dst != j) continue;
                const EdgeOp op = genome.edges[static_cast<size_t>(e)];
                if (op == EdgeOp::zero) continue;
                const int src_dim = dims[static_cast<size_t>(src)];
                int out_dim = width;
                switch (op) {
                    case EdgeOp::skip:
                        out_dim = src_dim;
                        break;
                    case EdgeOp::dense_linear:
                    case EdgeOp::dense_relu:
                        total += dense_params(src_dim, width);
                        break;
                    case EdgeOp::bottleneck_relu:
                        total += dense_params(src_dim, bottleneck_inner(width));
                        total += dense_params(bottleneck_inner(width), width);
                        break;
                    case EdgeOp::zero:
                        break;
                }
                if (dim == -1) dim = out_dim;
                if (dim != out_dim)
                    throw ValidationError("dimension-incompatible skip in genome " + genome.id());
            }
            dims[static_cast<size_t>(j)] = dim == -1 ? width : dim;
        }
        carry_dim = dims[3];
    }
    total += dense_params(carry_dim, num_classes);
    return total;
}

bool width_consistent(const ArchGenome& genome) {
    // Two symbolic dimensions: 0 = "input-sized", 1 = "width-sized". A node
    // mixing both only decodes when input_dim == width, so reject it.
    int carry = 0;
    for (int cell = 0; cell < genome.depth; ++cell) {
        std::array<int, 4> color{carry, -1, -1, -1};
        for (int j = 1; j <= 3; ++j) {
            int c = -1;
            for (int e = 0; e < kCellEdges; ++e) {
                const auto [src, dst] = cell_edge_list()[static_cast<size_t>(e)];
                if (dst != j) continue;
                const EdgeOp op = genome.edges[static_cast<size_t>(e)];
                if (op == EdgeOp::zero) continue;
                const int contrib =
                    op == EdgeOp::skip ? color[static_cast<size_t>(src)] : 1;
                if (c == -1) c = contrib;
                if (c != contrib) return false;
            }
            color[static_cast<size_t>(j)] = c == -1 ? 1 : c;
        }
        carry = color[3];
    }
    return true;
}

std::vector<ArchGenome> sample_space(const SpaceSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    std::vector<ArchGenome> out;
    std::set<std::string> seen;
    const long max_attempts = 1000 + 200L * spec.count;
    long attempts = 0;
    while (static_cast<int>(out.size()) < spec.count) {
        if (++attempts > max_attempts)
            throw ValidationError("space exhausted: could not sample " + std::to_string(spec.count) +
                                  " distinct genomes in " + std::to_string(max_attempts) +
                                  " attempts");
        ArchGenome g;
        for (int e = 0; e < kCellEdges; ++e)
            g.edges[static_cast<size_t>(e)] = spec.ops[rng.uniform_int(spec.ops.size())];
        g.width = spec.widths[rng.uniform_int(spec.widths.size())];
        g.depth = spec.depths[rng.uniform_int(spec.depths.size())];
        if (!width_consistent(g)) continue;
        if (!seen.insert(g.id()).second) continue;
        out.push_back(g);
    }
    return out;
}

namespace {

json genome_to_json(const ArchGenome& g) {
    json edges = json::array();
    for (EdgeOp op : g.edges) edges.push_back(op_name(op));
    return json{{"id", g.id()}, {"edges", edges}, {"width", g.width}, {"depth", g.depth}};
}

ArchGenome genome_from_json(const json& j) {
    ArchGenome g;
    const auto& edges = j.at("edges");
    if (!edges.is_array() || edges.size() != kCellEdges)
        throw ValidationError("genome 'edges' must be an array of 6 op names");
    for (int e = 0; e < kCellEdges; ++e)
        g.edges[static_cast<size_t>(e)] = op_from_name(edges[static_cast<size_t>(e)].get<std::string>());
    g.width = j.at("width").get<int>();
    g.depth = j.at("depth").get<int>();
    g.validate();
    if (j.contains("id") && j["id"].get<std::string>() != g.id())
        throw ValidationError("genome id '" + j["id"].get<std::string>() +
                              "' does not match its fields (expected '" + g.id() + "')");
    return g;
}

}  // namespace

std::string space_to_json(const std::vector<ArchGenome>& genomes) {
    json arr = json::array();
    for (const auto& g : genomes) arr.push_back(genome_to_json(g));
    return arr.dump(2) + "\n";
}

std::vector<ArchGenome> space_from_json(const std::string& text) {
    json arr;
    try {
        arr = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad space file: ") + e.what());
    }
    if (!arr.is_array()) throw ValidationError("space file must be a JSON array");
    std::vector<ArchGenome> out;
    out.reserve(arr.size());
    for (const auto& j : arr) out.push_back(genome_from_json(j));
    return out;
}

void save_space(const std::string& path, const std::vector<ArchGenome>& genomes) {
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot write space file: " + path);
    f << space_to_json(genomes);
}

std::vector<ArchGenome> load_space(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot read space file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return space_from_json(ss.str());
}

}  // namespace gradalign
