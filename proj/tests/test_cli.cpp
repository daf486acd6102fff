#include <doctest.h>

#include <cstdlib>
#include <json.hpp>
#include <sys/wait.h>

#include "support.hpp"

using namespace ctwin;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

int ctwin_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(CTWIN_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kGraph = R"({"nodes": ["B1", "B2", "B3"], "lag_order": 1,
  "edges": [{"cause": "B2", "effect": "B1", "lags": [0, 1]},
            {"cause": "B3", "effect": "B1", "lags": [0, 1]},
            {"cause": "B3", "effect": "B2", "lags": [0]},
            {"cause": "B1", "effect": "B3", "lags": [1]}]})";

struct Workspace {
    TempDir dir{"cli"};
    fs::path graph = dir / "graph.json";
    fs::path block = dir / "block.txt";
    fs::path log = dir / "log.txt";

    Workspace() {
        write_text_file(graph, kGraph);
        const auto g = load_graph(graph);
        CouplingSet k(3, 1);
        k(0, 0, 1) = 0.5;
        k(0, 0, 2) = -0.3;
        k(0, 1, 2) = 0.6;
        k(1, 0, 1) = 0.2;
        k(1, 0, 2) = 0.3;
        k(1, 2, 0) = 0.4;
        NoiseSpec n;
        n.scale = Eigen::VectorXd::Ones(3);
        n.seed = 1;
        GenerateOptions opt;
        opt.sample_rate = 1000;
        save_series(block, generate_series(g, k, n, 4000, opt));
    }
    std::string q(const fs::path& p) const { return "'" + p.string() + "'"; }
    std::string output() const { return read_text_file(log); }
};

}  // namespace

TEST_CASE("cli: validate") {
    Workspace w;
    CHECK(ctwin_cli("validate --graph " + w.q(w.graph), w.log) == 0);
    CHECK(w.output().find("ok: 3 nodes") != std::string::npos);
    write_text_file(w.dir / "bad.json", R"({"nodes": 2, "edges": [{"cause": 1, "effect": 2}, {"cause": 2, "effect": 1}, {"cause": 1, "effect": 1}]})");
    CHECK(ctwin_cli("validate --graph " + w.q(w.dir / "bad.json"), w.log) == 1);
    CHECK(w.output().find("cycle") != std::string::npos);
    CHECK(w.output().find("self-edge") != std::string::npos);
    CHECK(ctwin_cli("validate", w.log) == 1);
    CHECK(ctwin_cli("validate --graph " + w.q(w.dir / "missing.json"), w.log) == 1);
    CHECK(ctwin_cli("frobnicate", w.log) == 1);
    CHECK(ctwin_cli("--version", w.log) == 0);
    CHECK(w.output().find(kToolVersion) != std::string::npos);
}

TEST_CASE("cli: fit, train, whatif and counterfactual") {
    Workspace w;
    const auto out = w.dir / "out";
    CHECK(ctwin_cli("fit --graph " + w.q(w.graph) + " --data " + w.q(w.block) + " --output-dir " + w.q(out), w.log) == 0);
    const auto fitted = out / "fit" / "block_00.csv";
    REQUIRE(fs::exists(fitted));
    CHECK(load_couplings(fitted, load_graph(w.graph))(0, 0, 1) == doctest::Approx(0.5).epsilon(0.05));

    CHECK(ctwin_cli("train --graph " + w.q(w.graph) + " --data " + w.q(w.block) + " --output-dir " + w.q(out) +
                        " --hidden-size 8 --seed 4",
                    w.log) == 0);
    CHECK(fs::exists(out / "train" / "block_00_trajectory.csv"));

    const auto sim = w.dir / "sim.txt";
    CHECK(ctwin_cli("whatif --graph " + w.q(w.graph) + " --couplings " + w.q(fitted) + " --driver " + w.q(w.block) +
                        " --target B1 --set 'B1<-B3@1=0.9' --output " + w.q(sim),
                    w.log) == 0);
    const auto s = load_block(sim);
    CHECK(s.samples() == 4000);
    CHECK(s.labels()[0] == "B1");
    CHECK(ctwin_cli("whatif --graph " + w.q(w.graph) + " --couplings " + w.q(fitted) + " --driver " + w.q(w.block) +
                        " --target B1 --set 'B2<-B3@1=0.9' --output " + w.q(sim),
                    w.log) == 1);

    const auto cf = w.dir / "cf.txt";
    CHECK(ctwin_cli("counterfactual --graph " + w.q(w.graph) + " --couplings " + w.q(fitted) + " --driver " +
                        w.q(w.block) + " --target B1 --remove-node B3 --output " + w.q(cf),
                    w.log) == 0);
    CHECK(load_block(cf).data() != s.data());
    CHECK(ctwin_cli("counterfactual --graph " + w.q(w.graph) + " --couplings " + w.q(fitted) + " --driver " +
                        w.q(w.block) + " --target B1 --output " + w.q(cf),
                    w.log) == 1);
}

TEST_CASE("cli: tfd and report") {
    Workspace w;
    const auto csv = w.dir / "tfd" / "b1.csv";
    CHECK(ctwin_cli("tfd --input " + w.q(w.block) + " --channel B1 --output " + w.q(csv) + " --spectrum " +
                        w.q(w.dir / "tfd" / "b1_spectrum.csv") + " --svg " + w.q(w.dir / "b1.svg") +
                        " --window-len 128 --hop 64 --split-freq 250",
                    w.log) == 0);
    CHECK(w.output().find("band_power_ratio") != std::string::npos);
    const auto tfd = parse_tfd(read_text_file(csv));
    CHECK(tfd.bins() == 65);
    CHECK(tfd.sample_rate == 1000.0);
    CHECK(ctwin_cli("tfd --input " + w.q(w.block) + " --channel B9 --output " + w.q(csv), w.log) == 2);
    CHECK(ctwin_cli("tfd --input " + w.q(w.block) + " --channel B1 --window kaiser --output " + w.q(csv), w.log) == 1);

    fs::create_directories(w.dir / "empty");
    CHECK(ctwin_cli("report --output-dir " + w.q(w.dir / "empty"), w.log) == 2);
    CHECK(ctwin_cli("report --output-dir " + w.q(w.dir.path()), w.log) == 0);
    CHECK(fs::exists(w.dir / "report" / "tfd_b1.svg"));
}

TEST_CASE("cli: data errors and divergence exit codes") {
    Workspace w;
    write_text_file(w.dir / "broken.txt", "1 2 3\n4 five 6\n");
    CHECK(ctwin_cli("fit --graph " + w.q(w.graph) + " --data " + w.q(w.dir / "broken.txt") + " --output-dir " +
                        w.q(w.dir / "o1"),
                    w.log) == 2);
    CHECK(w.output().find("row 2") != std::string::npos);
    Eigen::MatrixXd huge = Eigen::MatrixXd::Constant(200, 3, 1e150);
    for (Eigen::Index r = 0; r < 200; ++r) huge(r, r % 3) = -1e150;
    save_series(w.dir / "huge.txt", MultichannelSeries(huge));
    CHECK(ctwin_cli("train --graph " + w.q(w.graph) + " --data " + w.q(w.dir / "huge.txt") + " --output-dir " +
                        w.q(w.dir / "o2") + " --no-normalize --learning-rate 1e10",
                    w.log) == 3);
    const auto m = nlohmann::json::parse(read_text_file(w.dir / "o2" / "manifest.json"));
    CHECK(m.at("failed_stage") == "train");
}

TEST_CASE("cli: run and synth from a config") {
    Workspace w;
    write_text_file(w.dir / "config.json", R"({
      "graph": "graph.json", "output_dir": "out", "seed": 5,
      "data": {"synthetic": {"n_samples": 2000, "blocks": 2, "noise": {"scale": 1.0},
        "couplings": [{"cause": "B2", "effect": "B1", "lag": 0, "value": 0.5},
                      {"cause": "B1", "effect": "B3", "lag": 1, "value": 0.4}]}},
      "learner": {"hidden_size": 6}})");
    CHECK(ctwin_cli("run --config " + w.q(w.dir / "config.json"), w.log) == 0);
    CHECK(fs::exists(w.dir / "out" / "manifest.json"));
    CHECK(fs::exists(w.dir / "out" / "report" / "block_01_trajectory.svg"));
    CHECK(ctwin_cli("synth --config " + w.q(w.dir / "config.json") + " --output-dir " + w.q(w.dir / "s"), w.log) == 0);
    CHECK(read_text_file(w.dir / "s" / "block_01.txt") == read_text_file(w.dir / "out" / "data" / "block_01.txt"));
    CHECK(ctwin_cli("report --output-dir " + w.q(w.dir / "out"), w.log) == 0);
    CHECK(ctwin_cli("validate --config " + w.q(w.dir / "config.json"), w.log) == 0);
}
