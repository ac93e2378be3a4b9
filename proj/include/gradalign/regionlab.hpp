#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gradalign/archspace.hpp"
#include "gradalign/autodiff.hpp"
#include "gradalign/harness.hpp"

namespace gradalign {

struct Box {
    double xmin = -3.0, xmax = 3.0;
    double ymin = -3.0, ymax = 3.0;
};

using Polygon = std::vector<Eigen::Vector2d>;  // convex, CCW

double polygon_area(const Polygon& poly);

struct Region {
    Polygon poly;               // empty for grid censuses
    std::vector<uint8_t> code;  // ReLU on/off bits, flat unit order
};

struct RegionCensus {
    int count = 0;
    std::string method;  // "exact" or "grid"
    Box box;
    int resolution = 0;  // grid only
    std::vector<Region> regions;
};

// Planar ReLU chain [2, hidden..., 1]; ReLU follows every layer, the output
// one included when output_relu is set. Initialized from `seed`.
NetworkInstance planar_net(const std::vector<int>& hidden, uint64_t seed, bool output_relu = true);

// Exact census of the activation-code cells of a 2-input network inside the
// box: each ReLU unit's decision boundary (affine once all earlier units are
// gated) splits every cell it crosses. Degenerate splits retry once with a
// bumped tolerance, then raise DegenerateGeometryError.
RegionCensus count_regions_exact(const NetworkInstance& net, const Box& box, double tol = 1e-9);

// Grid oracle: activation codes on a resolution^2 lattice of cell centers,
// merged into 4-adjacent components. Always a lower bound on the exact count.
RegionCensus count_regions_grid(const NetworkInstance& net, const Box& box, int resolution);

// Exact counts for the unperturbed net (delta 0, first entry) and for each
// delta added to the given flat parameter coordinate.
std::vector<std::pair<double, int>> perturb_sensitivity(const NetworkInstance& net, int param_coord,
                                                        const std::vector<double>& deltas,
                                                        const Box& box);

// Largest affine-prediction residual over all exact regions: fit an affine
// map on 3 interior points, predict a 4th.
double max_affine_residual(const NetworkInstance& net, const RegionCensus& census,
                           uint64_t seed = 0);

// Tau report using the exact region count as the architecture score.
TauReport region_score_correlation(const std::vector<ArchGenome>& genomes, const ProbeSet& probe,
                                   const BenchmarkTable& bench, uint64_t init_base, const Box& box,
                                   TauVariant variant = TauVariant::tau_b);

std::string census_to_json(const RegionCensus& census, bool with_codes);

namespace regiondetail {

// Splits a convex CCW polygon by the signed-distance line d(p) = n.p + c
// (n unit length). Returns the positive- and negative-side parts; a part is
// empty when the polygon does not reach that side beyond the tolerance.
struct SplitResult {
    Polygon positive;
    Polygon negative;
};
SplitResult split_polygon(const Polygon& poly, const Eigen::Vector2d& normal, double offset,
                          double tol);

}  // namespace regiondetail

}  // namespace gradalign
