#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gradalign/textio.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(GRADALIGN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("gradalign_cli_" + std::to_string(::getpid()))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("cli: help exits 0, bad flags exit 2") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("gen-space --help") == 0);
    CHECK(run_cli("--no-such-flag") == 2);
    CHECK(run_cli("") == 2);  // a subcommand is required
}

TEST_CASE("cli: gen-space is deterministic byte for byte") {
    TempDir tmp;
    const auto a = tmp.path / "a.json";
    const auto b = tmp.path / "b.json";
    CHECK(run_cli("gen-space --count 1 --ops skip --widths 8 --depths 1 -o " + a.string()) == 0);
    const std::string text = slurp(a);
    CHECK(text.find("\"s.s.s.s.s.s-w8-d1\"") != std::string::npos);

    CHECK(run_cli("gen-space --count 12 --seed 7 -o " + a.string()) == 0);
    CHECK(run_cli("gen-space --count 12 --seed 7 -o " + b.string()) == 0);
    CHECK(slurp(a) == slurp(b));
}

TEST_CASE("cli: gen-space exhaustion exits 3") {
    TempDir tmp;
    CHECK(run_cli("gen-space --count 2 --ops skip --widths 8 --depths 1 -o " +
                  (tmp.path / "x.json").string()) == 3);
}

TEST_CASE("cli: score rejects unknown metrics with a usage error") {
    TempDir tmp;
    const auto space = tmp.path / "space.json";
    REQUIRE(run_cli("gen-space --count 3 --seed 1 -o " + space.string()) == 0);
    CHECK(run_cli("score --space " + space.string() + " --metrics bogus -o " +
                  (tmp.path / "s.csv").string()) == 2);
    CHECK(run_cli("score --space " + (tmp.path / "missing.json").string() + " -o " +
                  (tmp.path / "s.csv").string()) == 3);
    CHECK(run_cli("score --space " + space.string() + " --probe-n 200 -o " +
                  (tmp.path / "s.csv").string()) == 2);
}

TEST_CASE("cli: score emits one row per genome and metric") {
    TempDir tmp;
    const auto space = tmp.path / "space.json";
    const auto scores = tmp.path / "scores.csv";
    REQUIRE(run_cli("gen-space --count 5 --seed 3 --widths 4 --depths 1 -o " + space.string()) == 0);
    CHECK(run_cli("score --space " + space.string() +
                  " --metrics gradalign1,gradalign2,gradsign,naswot,gradnorm --probe-n 8 -o " +
                  scores.string()) == 0);
    const auto lines = gradalign::read_lines(scores.string());
    CHECK(lines.size() == 1 + 5 * 5);
    CHECK(lines[0] ==
          "genome_id,metric,score,score_normalized,higher_is_better,probe_seed,probe_size,wall_ms");
}

TEST_CASE("cli: evaluate composes fixture taus into a mean") {
    TempDir tmp;
    // two hand-written dataset pairs: tau 1.0 and tau 0.0
    gradalign::write_text((tmp.path / "s1.csv").string(),
                          "genome_id,metric,score,score_normalized,higher_is_better,probe_seed,"
                          "probe_size,wall_ms\n"
                          "a,gradalign1,1,0,1,0,4,0\n"
                          "b,gradalign1,2,0,1,0,4,0\n"
                          "c,gradalign1,3,0,1,0,4,0\n");
    gradalign::write_text((tmp.path / "b1.csv").string(),
                          "genome_id,dataset,seed,accuracy,epochs,diverged\n"
                          "a,blobs,0,0.1,5,0\nb,blobs,0,0.2,5,0\nc,blobs,0,0.3,5,0\n");
    // tau -1: fully reversed, so the mean over both datasets is 0
    gradalign::write_text((tmp.path / "s2.csv").string(),
                          "genome_id,metric,score,score_normalized,higher_is_better,probe_seed,"
                          "probe_size,wall_ms\n"
                          "a,gradalign1,1,0,1,0,4,0\n"
                          "b,gradalign1,2,0,1,0,4,0\n"
                          "c,gradalign1,3,0,1,0,4,0\n");
    gradalign::write_text((tmp.path / "b2.csv").string(),
                          "genome_id,dataset,seed,accuracy,epochs,diverged\n"
                          "a,spirals,0,0.3,5,0\nb,spirals,0,0.2,5,0\nc,spirals,0,0.1,5,0\n");

    const auto out = tmp.path / "reports";
    CHECK(run_cli("evaluate --scores " + (tmp.path / "s1.csv").string() + " --scores " +
                  (tmp.path / "s2.csv").string() + " --bench " + (tmp.path / "b1.csv").string() +
                  " --bench " + (tmp.path / "b2.csv").string() + " -o " + out.string()) == 0);
    CHECK(fs::exists(out / "report_gradalign1_blobs.json"));
    CHECK(fs::exists(out / "report_gradalign1_spirals.json"));
    CHECK(fs::exists(out / "ranking_gradalign1_blobs.csv"));
    const std::string summary = slurp(out / "summary.json");
    CHECK(summary.find("\"gradalign1\": 0.0") != std::string::npos);

    const std::string single = slurp(out / "report_gradalign1_blobs.json");
    CHECK(single.find("\"tau\": 1.0") != std::string::npos);
}

TEST_CASE("cli: all-tied scores surface the undefined tau as exit 4") {
    TempDir tmp;
    gradalign::write_text((tmp.path / "s.csv").string(),
                          "genome_id,metric,score,score_normalized,higher_is_better,probe_seed,"
                          "probe_size,wall_ms\n"
                          "a,gradalign1,5,0,1,0,4,0\n"
                          "b,gradalign1,5,0,1,0,4,0\n"
                          "c,gradalign1,5,0,1,0,4,0\n");
    gradalign::write_text((tmp.path / "b.csv").string(),
                          "genome_id,dataset,seed,accuracy,epochs,diverged\n"
                          "a,blobs,0,0.1,5,0\nb,blobs,0,0.2,5,0\nc,blobs,0,0.3,5,0\n");
    CHECK(run_cli("evaluate --scores " + (tmp.path / "s.csv").string() + " --bench " +
                  (tmp.path / "b.csv").string() + " -o " + (tmp.path / "rep").string()) == 4);
}

TEST_CASE("cli: parallel scoring writes rows in the same deterministic order") {
    TempDir tmp;
    const auto space = tmp.path / "space.json";
    REQUIRE(run_cli("gen-space --count 8 --seed 5 -o " + space.string()) == 0);
    const auto serial = tmp.path / "serial.csv";
    const auto parallel = tmp.path / "parallel.csv";
    CHECK(run_cli("score --space " + space.string() + " --probe-n 8 --jobs 1 -o " +
                  serial.string()) == 0);
    CHECK(run_cli("score --space " + space.string() + " --probe-n 8 --jobs 4 -o " +
                  parallel.string()) == 0);

    auto strip_wall = [](const fs::path& p) {
        std::string out;
        for (const auto& line : gradalign::read_lines(p.string()))
            out += line.substr(0, line.rfind(',')) + "\n";
        return out;
    };
    CHECK(strip_wall(serial) == strip_wall(parallel));
}

TEST_CASE("cli: theorem-check quadratic suite reports zero violations") {
    TempDir tmp;
    const auto csv = tmp.path / "bounds.csv";
    CHECK(run_cli("theorem-check --trials 50 --dim 4 --seed 2 -o " + csv.string()) == 0);
    const auto lines = gradalign::read_lines(csv.string());
    CHECK(lines.size() == 51);
    CHECK(lines[0] ==
          "instance_id,lambda,M,cos_beta,measured_decrease,tight_bound,stated_bound,holds");
    for (size_t i = 1; i < lines.size(); ++i)
        CHECK(lines[i].back() == '1');  // holds column
}

TEST_CASE("cli: region-demo emits census and sensitivity files") {
    TempDir tmp;
    CHECK(run_cli("region-demo --seeds 3 --deltas 0.1,-0.1 -o " + tmp.path.string()) == 0);
    CHECK(fs::exists(tmp.path / "census.json"));
    const auto lines = gradalign::read_lines((tmp.path / "sensitivity.csv").string());
    CHECK(lines[0] == "seed,param,delta,count");
    CHECK(lines.size() == 1 + 3 * 3);  // 3 seeds x (delta 0 + 2 deltas)
}

TEST_CASE("cli: config file provides defaults, flags override") {
    TempDir tmp;
    gradalign::write_text((tmp.path / "cfg.json").string(),
                          R"({"seed": 7, "space": {"count": 4, "widths": [4], "depths": [1]}})");
    const auto a = tmp.path / "a.json";
    const auto b = tmp.path / "b.json";
    CHECK(run_cli("--config " + (tmp.path / "cfg.json").string() + " gen-space -o " + a.string()) ==
          0);
    CHECK(run_cli("gen-space --seed 7 --count 4 --widths 4 --depths 1 -o " + b.string()) == 0);
    CHECK(slurp(a) == slurp(b));

    // flag wins over the config value
    const auto c = tmp.path / "c.json";
    CHECK(run_cli("--config " + (tmp.path / "cfg.json").string() + " gen-space --count 2 -o " +
                  c.string()) == 0);
    CHECK(slurp(c).find("\"id\"") != std::string::npos);
    const auto loaded = gradalign::read_lines(c.string());
    int ids = 0;
    for (const auto& line : loaded)
        if (line.find("\"id\"") != std::string::npos) ++ids;
    CHECK(ids == 2);
}
