#include "gradalign/regionlab.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "gradalign/errors.hpp"
#include "gradalign/rng.hpp"

namespace gradalign {

double polygon_area(const Polygon& poly) {
    double twice = 0.0;
    for (size_t i = 0; i < poly.size(); ++i) {
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % poly.size()];
        twice += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * twice;
}

NetworkInstance planar_net(const std::vector<int>& hidden, uint64_t seed, bool output_relu) {
    std::vector<int> dims;
    dims.push_back(2);
    for (int h : hidden) {
        if (h < 1) throw ValidationError("hidden widths must be >= 1");
        dims.push_back(h);
    }
    dims.push_back(1);
    std::string id = "planar";
    for (int d : dims) id += "-" + std::to_string(d);
    NetworkInstance net = make_mlp(dims, output_relu, id);
    initialize(net, seed);
    return net;
}

namespace regiondetail {

SplitResult split_polygon(const Polygon& poly, const Eigen::Vector2d& normal, double offset,
                          double tol) {
    SplitResult result;
    const size_t n = poly.size();
    std::vector<double> dist(n);
    bool any_pos = false, any_neg = false;
    for (size_t i = 0; i < n; ++i) {
        dist[i] = normal.dot(poly[i]) + offset;
        any_pos |= dist[i] > tol;
        any_neg |= dist[i] < -tol;
    }
    if (!any_pos && !any_neg)
        throw DegenerateGeometryError("cell lies entirely within the boundary tolerance band");
    if (!any_neg) {
        result.positive = poly;
        return result;
    }
    if (!any_pos) {
        result.negative = poly;
        return result;
    }

    Polygon pos, neg;
    for (size_t i = 0; i < n; ++i) {
        const size_t j = (i + 1) % n;
        const double di = dist[i], dj = dist[j];
        if (di >= 0.0) pos.push_back(poly[i]);
        if (di <= 0.0) neg.push_back(poly[i]);
        if ((di > 0.0 && dj < 0.0) || (di < 0.0 && dj > 0.0)) {
            const double t = di / (di - dj);
            const Eigen::Vector2d cut = poly[i] + t * (poly[j] - poly[i]);
            pos.push_back(cut);
            neg.push_back(cut);
        }
    }
    constexpr double kMinArea = 1e-12;
    if (pos.size() < 3 || neg.size() < 3 || polygon_area(pos) < kMinArea ||
        polygon_area(neg) < kMinArea)
        throw DegenerateGeometryError("boundary nearly coincident with a cell edge");
    result.positive = std::move(pos);
    result.negative = std::move(neg);
    return result;
}

}  // namespace regiondetail

namespace {

constexpr int kMaxExactUnits = 64;

struct AffineForm {
    Eigen::MatrixXd a;  // dim x 2
    Eigen::VectorXd b;  // dim
};

// Affine form of `target` given gate masks for every ReLU node before it.
AffineForm affine_form(const NetworkInstance& net,
                       const std::vector<std::vector<uint8_t>>& gates, int target) {
    std::vector<AffineForm> forms(static_cast<size_t>(target) + 1);
    int relu_seen = 0;
    for (int i = 0; i <= target; ++i) {
        const Node& node = net.nodes[static_cast<size_t>(i)];
        AffineForm& f = forms[static_cast<size_t>(i)];
        switch (node.kind) {
            case NodeKind::input:
                f.a = Eigen::MatrixXd::Identity(2, 2);
                f.b = Eigen::VectorXd::Zero(2);
                break;
            case NodeKind::dense: {
                const auto& w = net.params.entries[static_cast<size_t>(node.weight_entry)].value;
                const auto& in = forms[static_cast<size_t>(node.inputs[0])];
                f.a = w * in.a;
                f.b = w * in.b + net.params.entries[static_cast<size_t>(node.bias_entry)].value.col(0);
                break;
            }
            case NodeKind::relu: {
                const auto& mask = gates.at(static_cast<size_t>(relu_seen++));
                const auto& in = forms[static_cast<size_t>(node.inputs[0])];
                f.a = Eigen::MatrixXd::Zero(node.dim, 2);
                f.b = Eigen::VectorXd::Zero(node.dim);
                for (int k = 0; k < node.dim; ++k) {
                    if (mask[static_cast<size_t>(k)]) {
                        f.a.row(k) = in.a.row(k);
                        f.b[k] = in.b[k];
                    }
                }
                break;
            }
            case NodeKind::sum: {
                f.a = Eigen::MatrixXd::Zero(node.dim, 2);
                f.b = Eigen::VectorXd::Zero(node.dim);
                for (int in : node.inputs) {
                    f.a += forms[static_cast<size_t>(in)].a;
                    f.b += forms[static_cast<size_t>(in)].b;
                }
                break;
            }
        }
    }
    return forms[static_cast<size_t>(target)];
}

struct ExactCell {
    Polygon poly;
    std::vector<std::vector<uint8_t>> gates;  // one mask per processed relu node
};

RegionCensus exact_census_at_tol(const NetworkInstance& net, const Box& box, double tol) {
    Polygon frame{{box.xmin, box.ymin}, {box.xmax, box.ymin}, {box.xmax, box.ymax},
                  {box.xmin, box.ymax}};
    std::vector<ExactCell> cells{{frame, {}}};

    for (int r : net.relu_nodes) {
        const int feed = net.nodes[static_cast<size_t>(r)].inputs[0];
        const int dim = net.nodes[static_cast<size_t>(r)].dim;
        std::vector<ExactCell> next;
        for (auto& cell : cells) {
            const AffineForm pre = affine_form(net, cell.gates, feed);

            struct Partial {
                Polygon poly;
                std::vector<uint8_t> bits;
            };
            std::vector<Partial> parts{{std::move(cell.poly), {}}};
            for (int k = 0; k < dim; ++k) {
                const Eigen::Vector2d w = pre.a.row(k).transpose();
                const double c = pre.b[k];
                const double norm = w.norm();
                std::vector<Partial> split_parts;
                for (auto& part : parts) {
                    if (norm < 1e-12) {
                        // constant pre-activation on the whole plane
                        part.bits.push_back(c > 0.0 ? 1 : 0);
                        split_parts.push_back(std::move(part));
                        continue;
                    }
                    auto halves =
                        regiondetail::split_polygon(part.poly, w / norm, c / norm, tol);
                    if (halves.negative.empty()) {
                        part.bits.push_back(1);
                        part.poly = std::move(halves.positive);
                        split_parts.push_back(std::move(part));
                    } else if (halves.positive.empty()) {
                        part.bits.push_back(0);
                        part.poly = std::move(halves.negative);
                        split_parts.push_back(std::move(part));
                    } else {
                        Partial on{std::move(halves.positive), part.bits};
                        on.bits.push_back(1);
                        split_parts.push_back(std::move(on));
                        part.bits.push_back(0);
                        part.poly = std::move(halves.negative);
                        split_parts.push_back(std::move(part));
                    }
                }
                parts = std::move(split_parts);
            }
            for (auto& part : parts) {
                ExactCell out;
                out.poly = std::move(part.poly);
                out.gates = cell.gates;
                out.gates.push_back(std::move(part.bits));
                next.push_back(std::move(out));
            }
        }
        cells = std::move(next);
    }

    RegionCensus census;
    census.method = "exact";
    census.box = box;
    census.count = static_cast<int>(cells.size());
    census.regions.reserve(cells.size());
    for (auto& cell : cells) {
        Region region;
        region.poly = std::move(cell.poly);
        for (const auto& mask : cell.gates)
            region.code.insert(region.code.end(), mask.begin(), mask.end());
        census.regions.push_back(std::move(region));
    }
    return census;
}

void check_box(const Box& box) {
    if (!(box.xmax > box.xmin) || !(box.ymax > box.ymin))
        throw ValidationError("degenerate bounding box");
}

}  // namespace

RegionCensus count_regions_exact(const NetworkInstance& net, const Box& box, double tol) {
    check_box(box);
    if (net.input_dim != 2) throw ValidationError("exact region counting needs a 2-input network");
    if (net.relu_units() > kMaxExactUnits)
        throw ValidationError("too many ReLU units for the exact counter");
    try {
        return exact_census_at_tol(net, box, tol);
    } catch (const DegenerateGeometryError&) {
        // one retry with a bumped tolerance, then give up
        return exact_census_at_tol(net, box, 1e-7);
    }
}

RegionCensus count_regions_grid(const NetworkInstance& net, const Box& box, int resolution) {
    check_box(box);
    if (net.input_dim != 2) throw ValidationError("grid region counting needs a 2-input network");
    if (resolution < 2) throw ValidationError("grid resolution must be >= 2");

    struct CodeHash {
        size_t operator()(const std::vector<uint64_t>& code) const noexcept {
            uint64_t h = 14695981039346656037ULL;
            for (uint64_t w : code) {
                h ^= w;
                h *= 1099511628211ULL;
            }
            return static_cast<size_t>(h);
        }
    };

    const double dx = (box.xmax - box.xmin) / resolution;
    const double dy = (box.ymax - box.ymin) / resolution;

    RegionCensus census;
    census.method = "grid";
    census.box = box;
    census.resolution = resolution;

    std::unordered_map<std::vector<uint64_t>, int, CodeHash> seen;
    Eigen::MatrixXd row_points(2, resolution);
    for (int j = 0; j < resolution; ++j) {
        const double y = box.ymin + (j + 0.5) * dy;
        for (int i = 0; i < resolution; ++i) {
            row_points(0, i) = box.xmin + (i + 0.5) * dx;
            row_points(1, i) = y;
        }
        BatchCodes codes = forward_batch_codes(net, row_points);
        for (int i = 0; i < resolution; ++i) {
            auto [it, inserted] =
                seen.emplace(std::move(codes.codes[static_cast<size_t>(i)]), static_cast<int>(seen.size()));
            if (inserted) {
                Region region;
                region.code.resize(static_cast<size_t>(codes.code_bits));
                for (int b = 0; b < codes.code_bits; ++b)
                    region.code[static_cast<size_t>(b)] =
                        (it->first[static_cast<size_t>(b) / 64] >> (b % 64)) & 1;
                census.regions.push_back(std::move(region));
            }
        }
    }
    census.count = static_cast<int>(seen.size());
    return census;
}

std::vector<std::pair<double, int>> perturb_sensitivity(const NetworkInstance& net, int param_coord,
                                                        const std::vector<double>& deltas,
                                                        const Box& box) {
    if (param_coord < 0 || param_coord >= net.params.dim())
        throw ValidationError("perturbation target out of range");
    std::vector<std::pair<double, int>> out;
    out.emplace_back(0.0, count_regions_exact(net, box).count);
    NetworkInstance work = net;
    for (double delta : deltas) {
        work.params.assign(net.params.flatten());
        work.params.add_flat(param_coord, delta);
        out.emplace_back(delta, count_regions_exact(work, box).count);
    }
    return out;
}

double max_affine_residual(const NetworkInstance& net, const RegionCensus& census, uint64_t seed) {
    (void)seed;
    double worst = 0.0;
    for (const auto& region : census.regions) {
        const size_t n = region.poly.size();
        if (n < 3) throw ValidationError("affine certificate needs polygonal regions");
        Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
        for (const auto& v : region.poly) centroid += v;
        centroid /= static_cast<double>(n);

        const size_t picks[3] = {0, n / 3, (2 * n) / 3};
        Eigen::Matrix3d a;
        Eigen::MatrixXd f(3, net.output_dim);
        for (int i = 0; i < 3; ++i) {
            const Eigen::Vector2d p = centroid + 0.6 * (region.poly[picks[i]] - centroid);
            a(i, 0) = p.x();
            a(i, 1) = p.y();
            a(i, 2) = 1.0;
            f.row(i) = forward_batch(net, p).col(0).transpose();
        }
        const Eigen::MatrixXd coef = a.partialPivLu().solve(f);
        const Eigen::VectorXd predicted =
            coef.transpose() * Eigen::Vector3d(centroid.x(), centroid.y(), 1.0);
        const Eigen::VectorXd actual = forward_batch(net, centroid).col(0);
        worst = std::max(worst, (predicted - actual).cwiseAbs().maxCoeff());
    }
    return worst;
}

TauReport region_score_correlation(const std::vector<ArchGenome>& genomes, const ProbeSet& probe,
                                   const BenchmarkTable& bench, uint64_t init_base, const Box& box,
                                   TauVariant variant) {
    if (probe.input_dim() != 2)
        throw ValidationError("region scoring needs a 2-d input space");
    std::vector<std::string> ids;
    std::vector<double> counts;
    for (const auto& g : genomes) {
        NetworkInstance net = decode_genome(g, 2, probe.num_classes);
        initialize(net, derive_seed(init_base, g.id()));
        ids.push_back(g.id());
        counts.push_back(static_cast<double>(count_regions_exact(net, box).count));
    }
    return evaluate_scores("regioncount", ids, counts, /*higher_is_better=*/true, bench, variant,
                           /*include_diverged=*/true);
}

std::string census_to_json(const RegionCensus& census, bool with_codes) {
    nlohmann::json j{
        {"count", census.count},
        {"method", census.method},
        {"box", {census.box.xmin, census.box.xmax, census.box.ymin, census.box.ymax}},
    };
    if (census.resolution > 0) j["resolution"] = census.resolution;
    if (with_codes) {
        nlohmann::json codes = nlohmann::json::array();
        for (const auto& region : census.regions) {
            std::string bits;
            for (uint8_t b : region.code) bits.push_back(b ? '1' : '0');
            codes.push_back(bits);
        }
        j["codes"] = codes;
    }
    return j.dump(2) + "\n";
}

}  // namespace gradalign
