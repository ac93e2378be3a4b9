#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gradalign/autodiff.hpp"

namespace gradalign {

enum class EdgeOp { zero, skip, dense_relu, dense_linear, bottleneck_relu };

constexpr int kCellEdges = 6;

// Edge order of the 4-node cell DAG, grouped by target node:
// 0->1, 0->2, 1->2, 0->3, 1->3, 2->3.
const std::array<std::pair<int, int>, kCellEdges>& cell_edge_list();

std::string op_name(EdgeOp op);
EdgeOp op_from_name(const std::string& name);  // ValidationError on unknown op

struct ArchGenome {
    std::array<EdgeOp, kCellEdges> edges{};
    int width = 8;
    int depth = 1;

    // Stable identifier, a pure function of the fields above.
    std::string id() const;
    void validate() const;
};

struct SpaceSpec {
    std::vector<EdgeOp> ops;
    std::vector<int> widths;
    std::vector<int> depths;
    uint64_t seed = 0;
    int count = 1;

    void validate() const;
};

// Decodes the cell DAG into a computation graph with zeroed parameters.
// Node j of each cell sums the outputs of its incoming edge ops; a final
// dense layer maps the last cell's output to num_classes logits.
NetworkInstance decode_genome(const ArchGenome& genome, int input_dim, int num_classes);

// Fan-in uniform init: weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)), biases 0.
// Fully determined by (net.genome_id, seed).
void initialize(NetworkInstance& net, uint64_t seed);

// Closed-form parameter count; equals decode_genome(...).params.dim().
long param_count(const ArchGenome& genome, int input_dim, int num_classes);

// True when the genome decodes for every input dimension: no node may mix an
// input-sized skip with a width-sized contribution (they only coincide when
// input_dim happens to equal width, which sampling must not rely on).
bool width_consistent(const ArchGenome& genome);

// Uniform sampling of `count` distinct, width-consistent genomes.
std::vector<ArchGenome> sample_space(const SpaceSpec& spec);

// Genome file schema: {"id", "edges"[6], "width", "depth"}; a space file is a
// JSON array of such objects.
std::string space_to_json(const std::vector<ArchGenome>& genomes);
std::vector<ArchGenome> space_from_json(const std::string& text);
void save_space(const std::string& path, const std::vector<ArchGenome>& genomes);
std::vector<ArchGenome> load_space(const std::string& path);

}  // namespace gradalign
