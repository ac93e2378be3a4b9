#include "gradalign/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "gradalign/errors.hpp"
#include "gradalign/rng.hpp"
#include "gradalign/textio.hpp"

namespace gradalign {

std::string data_kind_name(DataKind k) {
    switch (k) {
        case DataKind::blobs: return "blobs";
        case DataKind::spirals: return "spirals";
        case DataKind::xor_grid: return "xor-grid";
    }
    throw ValidationError("bad dataset kind");
}

DataKind data_kind_from_name(const std::string& name) {
    if (name == "blobs") return DataKind::blobs;
    if (name == "spirals") return DataKind::spirals;
    if (name == "xor-grid") return DataKind::xor_grid;
    throw UsageError("unknown dataset kind '" + name + "' (valid: blobs, spirals, xor-grid)");
}

void DataSpec::validate() const {
    if (train_per_class < 1 || test_per_class < 1)
        throw ValidationError("dataset per-class counts must be >= 1");
    if (noise < 0.0) throw ValidationError("dataset noise must be >= 0");
    if (kind == DataKind::blobs && classes < 2)
        throw ValidationError("blobs needs at least 2 classes");
}

namespace {

// Fills count samples of class `label` into consecutive columns.
void fill_blobs(Rng& rng, int label, int classes, double noise, Eigen::MatrixXd& x,
                std::vector<int>& y, int& col, int count) {
    const double angle = 2.0 * M_PI * label / classes;
    const double cx = std::cos(angle), cy = std::sin(angle);
    for (int i = 0; i < count; ++i, ++col) {
        x(0, col) = cx + noise * rng.normal();
        x(1, col) = cy + noise * rng.normal();
        y.push_back(label);
    }
}

void fill_spirals(Rng& rng, int label, double noise, Eigen::MatrixXd& x, std::vector<int>& y,
                  int& col, int count) {
    for (int i = 0; i < count; ++i, ++col) {
        const double t = rng.uniform(0.25, 1.0);
        const double angle = 3.0 * M_PI * t + label * M_PI;
        x(0, col) = t * std::cos(angle) + noise * rng.normal();
        x(1, col) = t * std::sin(angle) + noise * rng.normal();
        y.push_back(label);
    }
}

void fill_xor(Rng& rng, int label, double noise, Eigen::MatrixXd& x, std::vector<int>& y, int& col,
              int count) {
    for (int i = 0; i < count; ++i, ++col) {
        // quadrant pair per class: class 0 -> (+,+) or (-,-); class 1 -> mixed signs
        const bool alt = rng.uniform() < 0.5;
        const double sx = (label == 0) == alt ? 1.0 : -1.0;
        const double sy = alt ? 1.0 : -1.0;
        x(0, col) = sx * rng.uniform(0.05, 1.0) + noise * rng.normal();
        x(1, col) = sy * rng.uniform(0.05, 1.0) + noise * rng.normal();
        y.push_back(label);
    }
}

}  // namespace

Dataset generate_dataset(const DataSpec& spec, uint64_t seed) {
    spec.validate();
    const int classes = spec.kind == DataKind::blobs ? spec.classes : 2;

    Dataset ds;
    ds.name = data_kind_name(spec.kind);
    ds.input_dim = 2;
    ds.num_classes = classes;
    ds.seed = seed;
    ds.train_x.resize(2, classes * spec.train_per_class);
    ds.test_x.resize(2, classes * spec.test_per_class);

    Rng rng(derive_seed(seed, "dataset-" + ds.name));
    auto fill_split = [&](Eigen::MatrixXd& x, std::vector<int>& y, int per_class) {
        int col = 0;
        for (int c = 0; c < classes; ++c) {
            switch (spec.kind) {
                case DataKind::blobs: fill_blobs(rng, c, classes, spec.noise, x, y, col, per_class); break;
                case DataKind::spirals: fill_spirals(rng, c, spec.noise, x, y, col, per_class); break;
                case DataKind::xor_grid: fill_xor(rng, c, spec.noise, x, y, col, per_class); break;
            }
        }
    };
    fill_split(ds.train_x, ds.train_y, spec.train_per_class);
    fill_split(ds.test_x, ds.test_y, spec.test_per_class);
    return ds;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (lr <= 0.0) throw ValidationError("learning rate must be > 0");
    if (batch_size < 0) throw ValidationError("batch size must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ValidationError("momentum must be in [0, 1)");
}

double test_accuracy(const NetworkInstance& net, const Dataset& data) {
    const Eigen::MatrixXd logits = forward_batch(net, data.test_x);
    int correct = 0;
    for (int j = 0; j < logits.cols(); ++j) {
        int arg = 0;
        for (int k = 1; k < logits.rows(); ++k)
            if (logits(k, j) > logits(arg, j)) arg = k;  // ties -> lowest index
        correct += arg == data.test_y[static_cast<size_t>(j)];
    }
    return static_cast<double>(correct) / logits.cols();
}

namespace {

double mean_train_loss(const NetworkInstance& net, const Dataset& data) {
    const Eigen::MatrixXd logits = forward_batch(net, data.train_x);
    double total = 0.0;
    for (int j = 0; j < logits.cols(); ++j)
        total += loss_value(logits.col(j), one_hot(data.train_y[static_cast<size_t>(j)], data.num_classes),
                            LossKind::cross_entropy);
    return total / logits.cols();
}

}  // namespace

TrainResult train(const ArchGenome& genome, const Dataset& data, const TrainConfig& config,
                  uint64_t init_seed) {
    config.validate();
    NetworkInstance net = decode_genome(genome, data.input_dim, data.num_classes);
    initialize(net, init_seed);

    const int n = data.train_size();
    const int batch = config.batch_size == 0 ? n : std::min(config.batch_size, n);
    Rng shuffle_rng(derive_seed(config.seed, "batches-" + net.genome_id));

    Eigen::VectorXd velocity = Eigen::VectorXd::Zero(net.params.dim());
    Eigen::VectorXd snapshot = net.params.flatten();
    TrainResult result;

    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (int start = 0; start < n; start += batch) {
            const int count = std::min(batch, n - start);
            Eigen::MatrixXd xs(data.input_dim, count);
            std::vector<int> ys(static_cast<size_t>(count));
            for (int j = 0; j < count; ++j) {
                xs.col(j) = data.train_x.col(order[static_cast<size_t>(start + j)]);
                ys[static_cast<size_t>(j)] = data.train_y[static_cast<size_t>(order[static_cast<size_t>(start + j)])];
            }
            const LossGrad lg = batch_gradient(net, xs, ys, LossKind::cross_entropy);
            velocity = config.momentum * velocity - config.lr * lg.grad;
            Eigen::VectorXd theta = net.params.flatten() + velocity;
            net.params.assign(theta);
        }
        const double epoch_loss = net.params.all_finite() ? mean_train_loss(net, data)
                                                          : std::numeric_limits<double>::quiet_NaN();
        if (!std::isfinite(epoch_loss)) {
            net.params.assign(snapshot);
            throw TrainingDivergedError(
                "training diverged for genome " + net.genome_id + " at epoch " +
                    std::to_string(epoch + 1),
                epoch, test_accuracy(net, data), result.loss_curve);
        }
        result.loss_curve.push_back(epoch_loss);
        snapshot = net.params.flatten();
        result.epochs_run = epoch + 1;
    }
    result.accuracy = test_accuracy(net, data);
    return result;
}

const BenchRow* BenchmarkTable::find(const std::string& genome_id) const {
    for (const auto& r : rows)
        if (r.genome_id == genome_id) return &r;
    return nullptr;
}

BenchmarkTable benchmark_space(const std::vector<ArchGenome>& genomes, const Dataset& data,
                               const TrainConfig& config, uint64_t init_base,
                               const BenchmarkTable* existing, int jobs) {
    if (genomes.size() < 2) throw ValidationError("benchmark needs at least 2 genomes");

    BenchmarkTable table;
    std::vector<const ArchGenome*> todo;
    for (const auto& g : genomes) {
        if (const BenchRow* row = existing ? existing->find(g.id()) : nullptr)
            table.rows.push_back(*row);
        else
            todo.push_back(&g);
    }

    std::vector<BenchRow> fresh(todo.size());
    auto run_one = [&](size_t i) {
        const ArchGenome& g = *todo[i];
        BenchRow row;
        row.genome_id = g.id();
        row.dataset = data.name;
        row.seed = config.seed;
        try {
            TrainConfig cfg = config;
            const TrainResult r = train(g, data, cfg, derive_seed(init_base, g.id()));
            row.accuracy = r.accuracy;
            row.epochs = r.epochs_run;
        } catch (const TrainingDivergedError& e) {
            row.accuracy = e.accuracy;
            row.epochs = e.last_epoch;
            row.diverged = true;
        }
        fresh[i] = std::move(row);
    };

    if (jobs <= 1) {
        for (size_t i = 0; i < todo.size(); ++i) run_one(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        const int workers = std::min<size_t>(static_cast<size_t>(jobs), todo.size());
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < todo.size(); i = next.fetch_add(1)) run_one(i);
            });
        for (auto& t : pool) t.join();
    }

    for (auto& row : fresh) table.rows.push_back(std::move(row));
    std::sort(table.rows.begin(), table.rows.end(),
              [](const BenchRow& a, const BenchRow& b) { return a.genome_id < b.genome_id; });
    return table;
}

void save_bench_csv(const std::string& path, const BenchmarkTable& table) {
    std::ostringstream os;
    os << "genome_id,dataset,seed,accuracy,epochs,diverged\n";
    for (const auto& r : table.rows) {
        os << r.genome_id << ',' << r.dataset << ',' << r.seed << ',' << fmt_g17(r.accuracy) << ','
           << r.epochs << ',' << (r.diverged ? 1 : 0) << '\n';
    }
    write_text(path, os.str());
}

BenchmarkTable load_bench_csv(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw ValidationError("empty benchmark file: " + path);
    BenchmarkTable table;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_csv(lines[i]);
        if (f.size() != 6) throw ValidationError("bad benchmark row in " + path + ": " + lines[i]);
        BenchRow r;
        r.genome_id = f[0];
        r.dataset = f[1];
        r.seed = std::stoull(f[2]);
        r.accuracy = std::stod(f[3]);
        r.epochs = std::stoi(f[4]);
        r.diverged = f[5] == "1";
        table.rows.push_back(std::move(r));
    }
    return table;
}

}  // namespace gradalign
