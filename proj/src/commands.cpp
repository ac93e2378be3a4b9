#include "gradalign/commands.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "gradalign/errors.hpp"
#include "gradalign/rng.hpp"
#include "gradalign/textio.hpp"
#include "gradalign/theorem.hpp"

namespace gradalign {

namespace fs = std::filesystem;
using nlohmann::json;

DataSpec DataOptions::spec() const {
    DataSpec s;
    s.kind = data_kind_from_name(kind);
    s.classes = classes;
    s.train_per_class = train_per_class;
    s.test_per_class = test_per_class;
    s.noise = noise;
    return s;
}

Dataset command_dataset(const DataOptions& options, uint64_t root_seed) {
    return generate_dataset(options.spec(), derive_seed(root_seed, "dataset"));
}

std::vector<ArchGenome> run_gen_space(const GenSpaceOptions& options) {
    SpaceSpec spec;
    for (const auto& name : options.ops) spec.ops.push_back(op_from_name(name));
    spec.widths = options.widths;
    spec.depths = options.depths;
    spec.count = options.count;
    spec.seed = options.seed;
    std::vector<ArchGenome> genomes = sample_space(spec);
    save_space(options.output, genomes);
    return genomes;
}

namespace {

template <class Fn>
void parallel_for(size_t n, int jobs, Fn&& fn) {
    if (jobs <= 1 || n < 2) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    const size_t workers = std::min(static_cast<size_t>(jobs), n);
    for (size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace

std::vector<ScoreRecord> run_score(const ScoreOptions& options) {
    std::vector<ArchGenome> genomes = load_space(options.space_path);
    std::sort(genomes.begin(), genomes.end(),
              [](const ArchGenome& a, const ArchGenome& b) { return a.id() < b.id(); });

    std::vector<Metric> metrics;
    for (const auto& name : options.metrics) metrics.push_back(metric_from_name(name));
    if (metrics.empty()) throw UsageError("no metrics requested");
    if (options.probe_n < 1 || options.probe_n > 128)
        throw UsageError("probe size must be between 1 and 128");

    const Dataset data = command_dataset(options.data, options.seed);
    const ProbeSet probe = build_probe(data, options.probe_n, derive_seed(options.seed, "probe"));
    const uint64_t init_base = derive_seed(options.seed, "init");

    std::vector<ScoreRecord> records(genomes.size() * metrics.size());
    parallel_for(genomes.size(), options.jobs, [&](size_t i) {
        const uint64_t init = derive_seed(init_base, genomes[i].id());
        for (size_t m = 0; m < metrics.size(); ++m)
            records[i * metrics.size() + m] = score_architecture(genomes[i], probe, metrics[m], init);
    });
    save_scores_csv(options.output, records);
    return records;
}

BenchmarkTable run_train_oracle(const TrainOracleOptions& options) {
    const std::vector<ArchGenome> genomes = load_space(options.space_path);
    const Dataset data = command_dataset(options.data, options.seed);

    TrainConfig config;
    config.epochs = options.epochs;
    config.lr = options.lr;
    config.batch_size = options.batch_size;
    config.momentum = options.momentum;
    config.seed = derive_seed(options.seed, "train");

    BenchmarkTable existing;
    const bool have_existing = fs::exists(options.output);
    if (have_existing) existing = load_bench_csv(options.output);

    const BenchmarkTable table =
        benchmark_space(genomes, data, config, derive_seed(options.seed, "init"),
                        have_existing ? &existing : nullptr, options.jobs);
    save_bench_csv(options.output, table);
    return table;
}

std::map<std::string, double> run_evaluate(const EvaluateOptions& options) {
    if (options.scores_paths.size() != options.bench_paths.size())
        throw UsageError("--scores and --bench must be given the same number of times");
    if (options.scores_paths.empty()) throw UsageError("nothing to evaluate");
    const TauVariant variant = options.tau_variant == "tau_a"   ? TauVariant::tau_a
                               : options.tau_variant == "tau_b" ? TauVariant::tau_b
                                                                : throw UsageError(
                                                                      "tau variant must be tau_a or tau_b");

    fs::create_directories(options.output_dir);
    std::map<std::string, std::vector<double>> taus_by_metric;
    std::vector<std::string> datasets;

    for (size_t pair = 0; pair < options.scores_paths.size(); ++pair) {
        const auto records = load_scores_csv(options.scores_paths[pair]);
        const auto bench = load_bench_csv(options.bench_paths[pair]);

        std::map<std::string, std::vector<ScoreRecord>> by_metric;
        for (const auto& r : records) by_metric[metric_name(r.metric)].push_back(r);

        std::vector<std::string> wanted = options.metrics;
        if (wanted.empty())
            for (const auto& [name, _] : by_metric) wanted.push_back(name);

        for (const auto& name : wanted) {
            const auto it = by_metric.find(name);
            if (it == by_metric.end())
                throw ValidationError("metric '" + name + "' not present in " +
                                      options.scores_paths[pair]);
            const TauReport report =
                evaluate_metric(it->second, bench, variant, options.include_diverged);
            const std::string stem = "report_" + report.metric + "_" + report.dataset;
            write_text((fs::path(options.output_dir) / (stem + ".json")).string(),
                       tau_report_to_json(report));
            save_ranking_csv((fs::path(options.output_dir) / ("ranking_" + report.metric + "_" +
                                                              report.dataset + ".csv"))
                                 .string(),
                             report);
            taus_by_metric[report.metric].push_back(report.tau);
            if (datasets.empty() || datasets.back() != report.dataset)
                datasets.push_back(report.dataset);
        }
    }

    std::map<std::string, double> means;
    json summary_means;
    for (const auto& [name, taus] : taus_by_metric) {
        double mean = 0.0;
        for (double t : taus) mean += t;
        mean /= static_cast<double>(taus.size());
        means[name] = mean;
        summary_means[name] = mean;
    }
    const json summary{{"datasets", datasets},
                       {"tau_variant", options.tau_variant},
                       {"mean_tau", summary_means}};
    write_text((fs::path(options.output_dir) / "summary.json").string(), summary.dump(2) + "\n");
    return means;
}

int run_theorem_check(const TheoremOptions& options) {
    if (options.trials < 1) throw UsageError("theorem check needs at least 1 trial");

    if (options.mode == "relu") {
        DataOptions data_options;
        const Dataset data = command_dataset(data_options, options.seed);
        const ProbeSet probe = build_probe(data, options.probe_n, derive_seed(options.seed, "probe"));
        NetworkInstance net = make_mlp({data.input_dim, 8, data.num_classes}, false, "mlp-2-8-4");
        initialize(net, derive_seed(options.seed, "init"));
        const auto rows = relu_bound_sweep(net, probe, options.lambda_grid);
        std::ostringstream os;
        os << "lambda,measured_decrease,mean_cos_beta,min_cos_beta,max_cos_beta\n";
        for (const auto& r : rows)
            os << fmt_g17(r.learning_rate) << ',' << fmt_g17(r.decrease) << ','
               << fmt_g17(r.mean_cos) << ',' << fmt_g17(r.min_cos) << ',' << fmt_g17(r.max_cos)
               << '\n';
        write_text(options.output, os.str());
        return 0;
    }

    const bool isotropic = options.mode == "isotropic";
    if (!isotropic && options.mode != "quadratic")
        throw UsageError("theorem mode must be quadratic, isotropic or relu");

    Rng rng(derive_seed(options.seed, "theorem-" + options.mode));
    std::vector<BoundReport> reports;
    std::vector<double> smoothness, lambdas;
    int violations = 0;
    for (int i = 0; i < options.trials; ++i) {
        const QuadraticInstance inst =
            isotropic ? isotropic_quadratic(options.dim, rng) : random_quadratic(options.dim, rng);
        // lambda uniform in (0, 1/M]
        const double lambda = (1.0 - rng.uniform()) / inst.smoothness;
        const BoundReport report = one_step_bound_check(to_probe(inst, lambda));
        violations += report.holds ? 0 : 1;
        reports.push_back(report);
        smoothness.push_back(inst.smoothness);
        lambdas.push_back(lambda);
    }
    save_bound_csv(options.output, reports, smoothness, lambdas);
    return violations;
}

void run_region_demo(const RegionDemoOptions& options) {
    if (options.seeds < 1) throw UsageError("region demo needs at least 1 seed");
    fs::create_directories(options.output_dir);

    const NetworkInstance census_net = planar_net(options.hidden, options.seed);
    int param = options.param;
    if (param < 0) {
        // first bias coordinate of the first layer
        for (size_t e = 0; e < census_net.params.entries.size(); ++e) {
            if (census_net.params.entries[e].kind == ParamKind::bias) {
                param = census_net.params.offset(static_cast<int>(e));
                break;
            }
        }
    }

    const RegionCensus census = count_regions_exact(census_net, options.box);
    write_text((fs::path(options.output_dir) / "census.json").string(),
               census_to_json(census, true));

    std::ostringstream os;
    os << "seed,param,delta,count\n";
    for (int s = 0; s < options.seeds; ++s) {
        const NetworkInstance net = planar_net(options.hidden, static_cast<uint64_t>(s));
        for (const auto& [delta, count] :
             perturb_sensitivity(net, param, options.deltas, options.box)) {
            os << s << ',' << param << ',' << fmt_g17(delta) << ',' << count << '\n';
        }
    }
    write_text((fs::path(options.output_dir) / "sensitivity.csv").string(), os.str());

    if (options.dump_polygons) {
        std::ostringstream ps;
        ps << "region,vertex,x,y\n";
        for (size_t r = 0; r < census.regions.size(); ++r)
            for (size_t v = 0; v < census.regions[r].poly.size(); ++v)
                ps << r << ',' << v << ',' << fmt_g17(census.regions[r].poly[v].x()) << ','
                   << fmt_g17(census.regions[r].poly[v].y()) << '\n';
        write_text((fs::path(options.output_dir) / "polygons.csv").string(), ps.str());
    }
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot read config file: " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad config file: ") + e.what());
    }

    RunConfig cfg;
    if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
    if (j.contains("jobs")) cfg.jobs = j["jobs"].get<int>();
    if (j.contains("output")) cfg.output = j["output"].get<std::string>();
    if (j.contains("metrics")) cfg.metrics = j["metrics"].get<std::vector<std::string>>();
    if (j.contains("probe") && j["probe"].contains("n")) cfg.probe_n = j["probe"]["n"].get<int>();
    if (j.contains("space")) {
        const auto& s = j["space"];
        if (s.contains("ops")) cfg.space.ops = s["ops"].get<std::vector<std::string>>();
        if (s.contains("widths")) cfg.space.widths = s["widths"].get<std::vector<int>>();
        if (s.contains("depths")) cfg.space.depths = s["depths"].get<std::vector<int>>();
        if (s.contains("count")) cfg.space.count = s["count"].get<int>();
    }
    if (j.contains("data")) {
        const auto& d = j["data"];
        if (d.contains("kind")) cfg.data.kind = d["kind"].get<std::string>();
        if (d.contains("classes")) cfg.data.classes = d["classes"].get<int>();
        if (d.contains("train_per_class")) cfg.data.train_per_class = d["train_per_class"].get<int>();
        if (d.contains("test_per_class")) cfg.data.test_per_class = d["test_per_class"].get<int>();
        if (d.contains("noise")) cfg.data.noise = d["noise"].get<double>();
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        if (t.contains("epochs")) cfg.epochs = t["epochs"].get<int>();
        if (t.contains("lr")) cfg.lr = t["lr"].get<double>();
        if (t.contains("batch_size")) cfg.batch_size = t["batch_size"].get<int>();
        if (t.contains("momentum")) cfg.momentum = t["momentum"].get<double>();
    }
    return cfg;
}

}  // namespace gradalign
