#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gradalign/archspace.hpp"
#include "gradalign/autodiff.hpp"
#include "gradalign/errors.hpp"
#include "gradalign/harness.hpp"
#include "gradalign/metrics.hpp"
#include "gradalign/oracle.hpp"
#include "gradalign/regionlab.hpp"
#include "gradalign/regionlab.hpp"
#include "gradalign/theorem.hpp"

namespace py = pybind11;
using namespace gradalign;

namespace {

ArchGenome genome_from_dict(const py::dict& d) {
    ArchGenome g;
    const auto edges = d["edges"].cast<std::vector<std::string>>();
    if (edges.size() != kCellEdges) throw ValidationError("genome needs 6 edge ops");
    for (int e = 0; e < kCellEdges; ++e) g.edges[static_cast<size_t>(e)] = op_from_name(edges[static_cast<size_t>(e)]);
    g.width = d["width"].cast<int>();
    g.depth = d["depth"].cast<int>();
    return g;
}

py::dict genome_to_dict(const ArchGenome& g) {
    py::list edges;
    for (EdgeOp op : g.edges) edges.append(op_name(op));
    py::dict d;
    d["id"] = g.id();
    d["edges"] = edges;
    d["width"] = g.width;
    d["depth"] = g.depth;
    return d;
}

Box box_from_tuple(const std::vector<double>& v) {
    if (v.empty()) return Box{};
    if (v.size() != 4) throw ValidationError("box needs 4 values: xmin xmax ymin ymax");
    return Box{v[0], v[1], v[2], v[3]};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "training-free architecture scoring laboratory";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalErrorException", PyExc_ArithmeticError);

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("name", &Dataset::name)
        .def_readonly("input_dim", &Dataset::input_dim)
        .def_readonly("num_classes", &Dataset::num_classes)
        .def_readonly("train_x", &Dataset::train_x)
        .def_readonly("train_y", &Dataset::train_y)
        .def_readonly("test_x", &Dataset::test_x)
        .def_readonly("test_y", &Dataset::test_y);

    py::class_<ProbeSet>(m, "ProbeSet")
        .def_readonly("size", &ProbeSet::size)
        .def_readonly("num_classes", &ProbeSet::num_classes)
        .def_property_readonly("labels", [](const ProbeSet& p) {
            std::vector<int> labels;
            for (const auto& g : p.groups) labels.push_back(g.label);
            return labels;
        });

    m.def(
        "gen_space",
        [](int count, uint64_t seed, const std::vector<std::string>& ops,
           const std::vector<int>& widths, const std::vector<int>& depths) {
            SpaceSpec spec;
            for (const auto& name : ops) spec.ops.push_back(op_from_name(name));
            spec.widths = widths;
            spec.depths = depths;
            spec.count = count;
            spec.seed = seed;
            py::list out;
            for (const auto& g : sample_space(spec)) out.append(genome_to_dict(g));
            return out;
        },
        py::arg("count"), py::arg("seed") = 0,
        py::arg("ops") = std::vector<std::string>{"zero", "skip", "dense-relu", "dense-linear",
                                                  "bottleneck-relu"},
        py::arg("widths") = std::vector<int>{4, 8}, py::arg("depths") = std::vector<int>{1},
        "Sample distinct genomes; returns a list of genome dicts.");

    m.def(
        "param_count",
        [](const py::dict& genome, int input_dim, int num_classes) {
            return param_count(genome_from_dict(genome), input_dim, num_classes);
        },
        py::arg("genome"), py::arg("input_dim"), py::arg("num_classes"));

    m.def(
        "make_dataset",
        [](const std::string& kind, int classes, int train_per_class, int test_per_class,
           double noise, uint64_t seed) {
            DataSpec spec;
            spec.kind = data_kind_from_name(kind);
            spec.classes = classes;
            spec.train_per_class = train_per_class;
            spec.test_per_class = test_per_class;
            spec.noise = noise;
            return generate_dataset(spec, seed);
        },
        py::arg("kind") = "blobs", py::arg("classes") = 4, py::arg("train_per_class") = 50,
        py::arg("test_per_class") = 50, py::arg("noise") = 0.05, py::arg("seed") = 0);

    m.def("build_probe", &build_probe, py::arg("dataset"), py::arg("n"), py::arg("seed") = 0);

    m.def(
        "per_sample_gradients",
        [](const py::dict& genome, const ProbeSet& probe, uint64_t seed) {
            NetworkInstance net =
                decode_genome(genome_from_dict(genome), probe.input_dim(), probe.num_classes);
            initialize(net, seed);
            const GradientMatrix gm = per_sample_gradients(net, probe);
            return py::make_tuple(gm.rows, gm.labels);
        },
        py::arg("genome"), py::arg("probe"), py::arg("seed") = 0,
        "Per-sample loss gradients at initialization: (N x d matrix, labels).");

    m.def(
        "score",
        [](const py::dict& genome, const ProbeSet& probe, const std::string& metric,
           uint64_t seed) {
            const ScoreRecord r =
                score_architecture(genome_from_dict(genome), probe, metric_from_name(metric), seed);
            py::dict d;
            d["genome_id"] = r.genome_id;
            d["metric"] = metric_name(r.metric);
            d["score"] = r.score;
            d["score_normalized"] = r.score_normalized;
            d["higher_is_better"] = r.higher_is_better;
            d["per_class"] = r.per_class;
            return d;
        },
        py::arg("genome"), py::arg("probe"), py::arg("metric") = "gradalign1",
        py::arg("seed") = 0);

    m.def(
        "gradalign1",
        [](const Eigen::MatrixXd& grads) {
            return gradalign1(sign_matrix(grads), grads.colwise().mean());
        },
        py::arg("grads"), "Mean sign-gradient alignment with the sign of the mean gradient.");
    m.def(
        "gradalign2", [](const Eigen::MatrixXd& grads) { return gradalign2(sign_matrix(grads)); },
        py::arg("grads"), "Clamped log-determinant of the sign-gradient Gram matrix.");
    m.def(
        "gradsign", [](const Eigen::MatrixXd& grads) { return gradsign_score(sign_matrix(grads)); },
        py::arg("grads"));
    m.def("gradnorm", &grad_norm_score, py::arg("grads"));
    m.def("naswot", &naswot_from_codes, py::arg("codes"),
          "Log-determinant of the Hamming similarity kernel over activation codes.");

    m.def(
        "kendall_tau",
        [](const std::vector<double>& xs, const std::vector<double>& ys,
           const std::string& variant) {
            return kendall_tau(xs, ys,
                               variant == "tau_a" ? TauVariant::tau_a : TauVariant::tau_b);
        },
        py::arg("xs"), py::arg("ys"), py::arg("variant") = "tau_b");

    m.def(
        "train",
        [](const py::dict& genome, const Dataset& data, int epochs, double lr, int batch_size,
           double momentum, uint64_t seed, uint64_t init_seed) {
            TrainConfig cfg;
            cfg.epochs = epochs;
            cfg.lr = lr;
            cfg.batch_size = batch_size;
            cfg.momentum = momentum;
            cfg.seed = seed;
            const TrainResult r = train(genome_from_dict(genome), data, cfg, init_seed);
            py::dict d;
            d["accuracy"] = r.accuracy;
            d["loss_curve"] = r.loss_curve;
            d["epochs"] = r.epochs_run;
            return d;
        },
        py::arg("genome"), py::arg("dataset"), py::arg("epochs") = 50, py::arg("lr") = 0.1,
        py::arg("batch_size") = 32, py::arg("momentum") = 0.5, py::arg("seed") = 0,
        py::arg("init_seed") = 0);

    m.def(
        "count_regions",
        [](const std::vector<int>& hidden, uint64_t seed, const std::string& method,
           int resolution, const std::vector<double>& box, bool output_relu) {
            const NetworkInstance net = planar_net(hidden, seed, output_relu);
            const RegionCensus census = method == "grid"
                                            ? count_regions_grid(net, box_from_tuple(box), resolution)
                                            : count_regions_exact(net, box_from_tuple(box));
            py::dict d;
            d["count"] = census.count;
            d["method"] = census.method;
            py::list codes;
            for (const auto& region : census.regions) {
                std::string bits;
                for (uint8_t b : region.code) bits.push_back(b ? '1' : '0');
                codes.append(bits);
            }
            d["codes"] = codes;
            return d;
        },
        py::arg("hidden") = std::vector<int>{2, 2}, py::arg("seed") = 0,
        py::arg("method") = "exact", py::arg("resolution") = 500,
        py::arg("box") = std::vector<double>{}, py::arg("output_relu") = true,
        "Linear-region census of a planar [2, hidden..., 1] ReLU net.");

    m.def(
        "perturb_sensitivity",
        [](const std::vector<int>& hidden, uint64_t seed, int param,
           const std::vector<double>& deltas, const std::vector<double>& box) {
            return perturb_sensitivity(planar_net(hidden, seed), param, deltas,
                                       box_from_tuple(box));
        },
        py::arg("hidden") = std::vector<int>{2, 2}, py::arg("seed") = 0, py::arg("param") = 4,
        py::arg("deltas") = std::vector<double>{-0.5, -0.35, -0.2, -0.1, 0.1, 0.2, 0.35, 0.5},
        py::arg("box") = std::vector<double>{},
        "Exact region counts for the unperturbed net and each parameter delta.");

    m.def(
        "one_step_bound",
        [](const Eigen::MatrixXd& h1, const Eigen::VectorXd& a1, const Eigen::MatrixXd& h2,
           const Eigen::VectorXd& a2, const Eigen::VectorXd& theta, double lam) {
            QuadraticInstance inst;
            inst.h1 = h1;
            inst.h2 = h2;
            inst.a1 = a1;
            inst.a2 = a2;
            inst.theta = theta;
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h1 + h2,
                                                                    Eigen::EigenvaluesOnly);
            inst.smoothness = es.eigenvalues().maxCoeff();
            const BoundReport r = one_step_bound_check(to_probe(inst, lam));
            py::dict d;
            d["measured_decrease"] = r.measured_decrease;
            d["tight_bound"] = r.tight_bound;
            d["stated_bound"] = r.stated_bound;
            d["cos_beta"] = r.cos_beta;
            d["smoothness"] = inst.smoothness;
            d["holds"] = r.holds;
            return d;
        },
        py::arg("h1"), py::arg("a1"), py::arg("h2"), py::arg("a2"), py::arg("theta"),
        py::arg("lam"),
        "One-step loss decrease of the quadratic pair versus its bounds.");
}
