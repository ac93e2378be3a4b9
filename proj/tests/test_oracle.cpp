#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "gradalign/errors.hpp"
#include "gradalign/oracle.hpp"
#include "gradalign/rng.hpp"

using namespace gradalign;

namespace {

ArchGenome uniform_genome(EdgeOp op, int width = 8, int depth = 1) {
    ArchGenome g;
    g.edges.fill(op);
    g.width = width;
    g.depth = depth;
    return g;
}

// Independent nearest-centroid classifier over the training centroids.
double nearest_centroid_accuracy(const Dataset& ds) {
    Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(ds.input_dim, ds.num_classes);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(ds.num_classes);
    for (int j = 0; j < ds.train_size(); ++j) {
        centroids.col(ds.train_y[static_cast<size_t>(j)]) += ds.train_x.col(j);
        counts[ds.train_y[static_cast<size_t>(j)]] += 1.0;
    }
    for (int c = 0; c < ds.num_classes; ++c) centroids.col(c) /= counts[c];
    int correct = 0;
    for (int j = 0; j < ds.test_size(); ++j) {
        int best = 0;
        double best_dist = (ds.test_x.col(j) - centroids.col(0)).squaredNorm();
        for (int c = 1; c < ds.num_classes; ++c) {
            const double dist = (ds.test_x.col(j) - centroids.col(c)).squaredNorm();
            if (dist < best_dist) {
                best = c;
                best_dist = dist;
            }
        }
        correct += best == ds.test_y[static_cast<size_t>(j)];
    }
    return static_cast<double>(correct) / ds.test_size();
}

}  // namespace

TEST_CASE("blobs: zero noise collapses samples onto the class centers") {
    DataSpec spec;
    spec.kind = DataKind::blobs;
    spec.classes = 4;
    spec.noise = 0.0;
    spec.train_per_class = 3;
    spec.test_per_class = 2;
    const Dataset ds = generate_dataset(spec, 1);
    for (int j = 0; j < ds.train_size(); ++j) {
        const int c = ds.train_y[static_cast<size_t>(j)];
        const double angle = 2.0 * M_PI * c / 4;
        CHECK(ds.train_x(0, j) == doctest::Approx(std::cos(angle)).epsilon(1e-12));
        CHECK(ds.train_x(1, j) == doctest::Approx(std::sin(angle)).epsilon(1e-12));
    }
}

TEST_CASE("datasets: generation is pure in (kind, params, seed)") {
    DataSpec spec;
    spec.kind = DataKind::spirals;
    spec.train_per_class = 20;
    spec.test_per_class = 10;
    const Dataset a = generate_dataset(spec, 9);
    const Dataset b = generate_dataset(spec, 9);
    CHECK(a.train_x == b.train_x);
    CHECK(a.test_x == b.test_x);
    CHECK(a.train_y == b.train_y);

    const Dataset c = generate_dataset(spec, 10);
    CHECK(a.train_x != c.train_x);
}

TEST_CASE("blobs: nearest-centroid oracle scores >= 0.99 at sigma 0.05") {
    DataSpec spec;
    spec.kind = DataKind::blobs;
    spec.classes = 4;
    spec.noise = 0.05;
    spec.train_per_class = 50;
    spec.test_per_class = 50;
    const Dataset ds = generate_dataset(spec, 7);
    CHECK(ds.train_size() == 200);
    CHECK(ds.test_size() == 200);
    CHECK(nearest_centroid_accuracy(ds) >= 0.99);
}

TEST_CASE("xor-grid: labels follow the quadrant parity") {
    DataSpec spec;
    spec.kind = DataKind::xor_grid;
    spec.noise = 0.0;
    spec.train_per_class = 40;
    spec.test_per_class = 10;
    const Dataset ds = generate_dataset(spec, 2);
    CHECK(ds.num_classes == 2);
    for (int j = 0; j < ds.train_size(); ++j) {
        const bool same_sign = ds.train_x(0, j) * ds.train_x(1, j) > 0.0;
        CHECK(ds.train_y[static_cast<size_t>(j)] == (same_sign ? 0 : 1));
    }
}

TEST_CASE("datasets: invalid params are rejected") {
    DataSpec spec;
    spec.train_per_class = 0;
    CHECK_THROWS_AS(generate_dataset(spec, 0), ValidationError);
    DataSpec negative_noise;
    negative_noise.noise = -0.1;
    CHECK_THROWS_AS(generate_dataset(negative_noise, 0), ValidationError);
}

TEST_CASE("train: all-zero genome stays at chance level") {
    DataSpec spec;
    spec.kind = DataKind::blobs;
    spec.classes = 4;
    spec.noise = 0.05;
    const Dataset ds = generate_dataset(spec, 3);

    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.lr = 0.1;
    cfg.seed = 1;
    const TrainResult r = train(uniform_genome(EdgeOp::zero), ds, cfg, 2);
    CHECK(r.accuracy == doctest::Approx(0.25).epsilon(0.2));  // 0.25 +- 0.05
    CHECK(std::abs(r.accuracy - 0.25) <= 0.05);
}

TEST_CASE("train: a dense-relu cell separates sigma 0.05 blobs") {
    DataSpec spec;
    spec.kind = DataKind::blobs;
    spec.classes = 4;
    spec.noise = 0.05;
    const Dataset ds = generate_dataset(spec, 3);

    ArchGenome g = uniform_genome(EdgeOp::zero, 16, 1);
    g.edges[3] = EdgeOp::dense_relu;  // (0,3)

    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.lr = 0.1;
    cfg.seed = 4;
    const TrainResult r = train(g, ds, cfg, 5);
    CHECK(r.accuracy >= 0.95);
    CHECK(r.epochs_run == 50);

    const TrainResult again = train(g, ds, cfg, 5);
    CHECK(again.accuracy == r.accuracy);  // bit-deterministic
    CHECK(again.loss_curve == r.loss_curve);
}

TEST_CASE("train: full-batch descent on the convex all-skip genome is monotone") {
    DataSpec spec;
    spec.kind = DataKind::blobs;
    spec.classes = 4;
    spec.noise = 0.05;
    const Dataset ds = generate_dataset(spec, 6);

    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.lr = 0.1;
    cfg.batch_size = 0;  // full batch
    cfg.momentum = 0.0;  // plain gradient descent
    cfg.seed = 2;
    const TrainResult r = train(uniform_genome(EdgeOp::skip), ds, cfg, 3);
    for (size_t e = 1; e < r.loss_curve.size(); ++e) CHECK(r.loss_curve[e] < r.loss_curve[e - 1]);
}

TEST_CASE("train: divergence carries the last finite epoch") {
    DataSpec spec;
    spec.kind = DataKind::blobs;
    spec.classes = 4;
    spec.noise = 0.05;
    const Dataset ds = generate_dataset(spec, 3);

    ArchGenome g = uniform_genome(EdgeOp::dense_linear, 16, 2);
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.lr = 1e4;  // guaranteed blow-up
    cfg.seed = 8;
    try {
        train(g, ds, cfg, 9);
        FAIL("expected divergence");
    } catch (const TrainingDivergedError& e) {
        CHECK(e.last_epoch < 60);
        CHECK(e.accuracy >= 0.0);
        CHECK(e.accuracy <= 1.0);
        CHECK(static_cast<int>(e.curve.size()) == e.last_epoch);
    }
}

TEST_CASE("benchmark_space: composition, monotone capacity and resume") {
    DataSpec spec;
    spec.kind = DataKind::blobs;
    spec.classes = 4;
    spec.noise = 0.05;
    const Dataset ds = generate_dataset(spec, 3);

    ArchGenome dense = uniform_genome(EdgeOp::zero, 16, 1);
    dense.edges[3] = EdgeOp::dense_relu;
    const std::vector<ArchGenome> genomes{uniform_genome(EdgeOp::zero), dense};

    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.lr = 0.1;
    cfg.seed = 12;
    const BenchmarkTable table = benchmark_space(genomes, ds, cfg, 13);
    REQUIRE(table.rows.size() == 2);

    // rows match individual train() calls
    for (const auto& g : genomes) {
        const TrainResult solo = train(g, ds, cfg, derive_seed(13, g.id()));
        CHECK(table.find(g.id())->accuracy == solo.accuracy);
    }

    // the all-zero genome cannot beat a trainable one (0.02 slack)
    CHECK(table.find(uniform_genome(EdgeOp::zero).id())->accuracy <=
          table.find(dense.id())->accuracy + 0.02);

    // resume: nothing retrains, rows identical
    const auto path = std::filesystem::temp_directory_path() / "gradalign_bench_test.csv";
    save_bench_csv(path.string(), table);
    const BenchmarkTable loaded = load_bench_csv(path.string());
    const BenchmarkTable resumed = benchmark_space(genomes, ds, cfg, 13, &loaded);
    REQUIRE(resumed.rows.size() == 2);
    for (size_t i = 0; i < table.rows.size(); ++i) {
        CHECK(resumed.rows[i].genome_id == table.rows[i].genome_id);
        CHECK(resumed.rows[i].accuracy == table.rows[i].accuracy);
    }
    std::filesystem::remove(path);
}

TEST_CASE("benchmark_space: divergence becomes a flagged row") {
    DataSpec spec;
    spec.kind = DataKind::blobs;
    spec.classes = 4;
    spec.noise = 0.05;
    const Dataset ds = generate_dataset(spec, 3);

    ArchGenome dense = uniform_genome(EdgeOp::zero, 8, 1);
    dense.edges[3] = EdgeOp::dense_relu;
    const std::vector<ArchGenome> genomes{uniform_genome(EdgeOp::dense_linear, 16, 2), dense};

    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.lr = 1e4;
    cfg.seed = 5;
    const BenchmarkTable table = benchmark_space(genomes, ds, cfg, 6);
    REQUIRE(table.rows.size() == 2);
    int diverged = 0;
    for (const auto& r : table.rows) diverged += r.diverged;
    CHECK(diverged >= 1);
}
