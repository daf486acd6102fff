// ctwin: command-line front end for the causal digital twin library.
#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "ctwin/pipeline.hpp"
#include "ctwin/svg.hpp"
#include "ctwin/text_util.hpp"

namespace fs = std::filesystem;
using namespace ctwin;

namespace {

struct DirectOptions {
    std::string config;
    std::string graph;
    std::vector<std::string> data;
    std::string output_dir;
    double sample_rate = 0.0;
};

ExperimentConfig config_for(const DirectOptions& o, const std::vector<std::string>& stages,
                            const nlohmann::json& learner = nlohmann::json::object()) {
    ExperimentConfig cfg;
    if (!o.config.empty()) {
        cfg = load_config(o.config);
    } else {
        if (o.graph.empty() || o.data.empty())
            throw ValidationError("give --config, or --graph together with --data");
        nlohmann::ordered_json doc;
        doc["graph"] = fs::absolute(o.graph).string();
        doc["output_dir"] = fs::absolute(o.output_dir.empty() ? "out" : o.output_dir).string();
        std::vector<std::string> files;
        for (const auto& f : o.data) files.push_back(fs::absolute(f).string());
        doc["data"]["files"] = files;
        if (o.sample_rate > 0.0) doc["data"]["sample_rate"] = o.sample_rate;
        if (!learner.empty()) doc["learner"] = learner;
        cfg = parse_config(doc.dump(), fs::current_path());
    }
    if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
    cfg.stages = stages;
    return cfg;
}

void add_direct(CLI::App* cmd, DirectOptions& o) {
    cmd->add_option("--config", o.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--graph", o.graph, "Causal graph file (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--data", o.data, "Block files, one per day")->check(CLI::ExistingFile);
    cmd->add_option("--output-dir", o.output_dir, "Output directory");
    cmd->add_option("--sample-rate", o.sample_rate, "Sample rate in Hz");
}

void print_manifest_summary(const RunManifest& m, const fs::path& out) {
    for (const auto& s : m.stages)
        std::cout << s.name << ": " << s.outputs.size() << " output(s)\n";
    std::cout << "manifest: " << (out / "manifest.json").string() << "\n";
}

CouplingSet load_any_couplings(const std::string& path, const CausalGraph& graph) {
    return load_couplings(path, graph);
}

std::vector<std::size_t> resolve_nodes(const std::vector<std::string>& refs, const CausalGraph& graph) {
    std::vector<std::size_t> out;
    for (const auto& r : refs) out.push_back(graph.node_index(r));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Causal digital twin: learn SVAR couplings and run what-if experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    // validate
    std::string validate_graph_path, validate_config;
    auto* validate = app.add_subcommand("validate", "Check a causal graph (or a whole config)");
    validate->add_option("--graph", validate_graph_path, "Causal graph file")->check(CLI::ExistingFile);
    validate->add_option("--config", validate_config, "Experiment config")->check(CLI::ExistingFile);

    // synth
    std::string synth_config, synth_out;
    auto* synth = app.add_subcommand("synth", "Write the synthetic dataset described by a config");
    synth->add_option("--config", synth_config, "Experiment config")->required()->check(CLI::ExistingFile);
    synth->add_option("--output-dir", synth_out, "Directory for block and truth files");

    // fit
    DirectOptions fit_opts;
    auto* fit = app.add_subcommand("fit", "Least-squares SVAR fit per block");
    add_direct(fit, fit_opts);

    // train
    DirectOptions train_opts;
    std::size_t hidden = 0;
    double learning_rate = 0.0;
    std::uint64_t train_seed = 0;
    bool no_normalize = false, carry_over = false;
    auto* train = app.add_subcommand("train", "Online IMRNNS coupling estimation per block");
    add_direct(train, train_opts);
    train->add_option("--hidden-size", hidden, "Hidden units");
    train->add_option("--learning-rate", learning_rate, "Learning rate");
    auto* seed_opt = train->add_option("--seed", train_seed, "Weight initialization seed");
    train->add_flag("--no-normalize", no_normalize, "Disable running z-score of inputs");
    train->add_flag("--carry-over", carry_over, "Continue network state across blocks");

    // whatif / counterfactual share most options
    struct ScenarioOpts {
        std::string graph, couplings, driver, output;
        std::vector<std::string> targets, sets, remove_edges, remove_nodes;
        bool closed_loop = false;
    };
    ScenarioOpts wi, cf;
    auto add_scenario = [](CLI::App* cmd, ScenarioOpts& o) {
        cmd->add_option("--graph", o.graph, "Causal graph file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--couplings", o.couplings, "Coupling table (CSV)")->required()->check(CLI::ExistingFile);
        cmd->add_option("--driver", o.driver, "Measured series driving the simulation")->required()->check(CLI::ExistingFile);
        cmd->add_option("--target", o.targets, "Node(s) to simulate")->required();
        cmd->add_option("--output", o.output, "Simulated series file")->required();
        cmd->add_flag("--closed-loop", o.closed_loop, "Feed simulated targets back into lag terms");
    };
    auto* whatif = app.add_subcommand("whatif", "Re-simulate target nodes with modified couplings");
    add_scenario(whatif, wi);
    whatif->add_option("--set", wi.sets, "Coupling override EFFECT<-CAUSE@LAG=VALUE");
    auto* counterfactual = app.add_subcommand("counterfactual", "Re-simulate with influences removed");
    add_scenario(counterfactual, cf);
    counterfactual->add_option("--remove-edge", cf.remove_edges, "EFFECT<-CAUSE[@LAG]");
    counterfactual->add_option("--remove-node", cf.remove_nodes, "Remove every outgoing influence of NODE");

    // tfd
    std::string tfd_input, tfd_channel, tfd_output, tfd_spectrum, tfd_svg, tfd_window = "hann";
    SpectrogramParams tfd_params;
    double tfd_rate = 0.0, tfd_split = -1.0;
    auto* tfd = app.add_subcommand("tfd", "Spectrogram of one channel");
    tfd->add_option("--input", tfd_input, "Series file")->required()->check(CLI::ExistingFile);
    tfd->add_option("--channel", tfd_channel, "Channel label or 1-based index")->required();
    tfd->add_option("--output", tfd_output, "TFD table (CSV)")->required();
    tfd->add_option("--spectrum", tfd_spectrum, "Collapsed spectrum (CSV)");
    tfd->add_option("--svg", tfd_svg, "Heatmap SVG");
    tfd->add_option("--window-len", tfd_params.window_len, "Window length");
    tfd->add_option("--hop", tfd_params.hop, "Hop size");
    auto* nfft_opt = tfd->add_option("--nfft", tfd_params.nfft, "FFT size");
    tfd->add_option("--window", tfd_window, "rectangular | hann | hamming");
    tfd->add_option("--sample-rate", tfd_rate, "Override the file's sample rate");
    tfd->add_option("--split-freq", tfd_split, "Print the band power ratio above this frequency");

    // report
    std::string report_dir;
    auto* report = app.add_subcommand("report", "Render SVG/CSV report from a run directory");
    report->add_option("--output-dir", report_dir, "Run output directory")->required()->check(CLI::ExistingDirectory);

    // run
    std::string run_config, run_out;
    auto* run_cmd = app.add_subcommand("run", "Full pipeline from a config file");
    run_cmd->add_option("--config", run_config, "Experiment config")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--output-dir", run_out, "Override the output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (validate->parsed()) {
            CausalGraph graph;
            if (!validate_config.empty()) graph = load_config(validate_config).graph;
            else if (!validate_graph_path.empty()) graph = load_graph(validate_graph_path);
            else throw ValidationError("give --graph or --config");
            const auto rep = validate_graph(graph);
            if (rep.ok()) {
                std::cout << "ok: " << graph.node_count() << " nodes, " << graph.edges().size()
                          << " edges, lag order " << graph.lag_order() << "\n";
                return 0;
            }
            for (const auto& v : rep.violations) std::cout << to_string(v.kind) << ": " << v.message << "\n";
            return 1;
        }
        if (synth->parsed()) {
            auto cfg = load_config(synth_config);
            if (!cfg.synthetic) throw ValidationError("config has no synthetic dataset");
            const fs::path dir = synth_out.empty() ? cfg.output_dir / "data" : fs::path(synth_out);
            for (const auto& p : synth_dataset(*cfg.synthetic, dir)) std::cout << p.string() << "\n";
            return 0;
        }
        if (fit->parsed()) {
            auto cfg = config_for(fit_opts, {"validate", "data", "fit"});
            print_manifest_summary(run(cfg), cfg.output_dir);
            return 0;
        }
        if (train->parsed()) {
            nlohmann::json learner = nlohmann::json::object();
            if (hidden) learner["hidden_size"] = hidden;
            if (learning_rate > 0.0) learner["learning_rate"] = learning_rate;
            if (*seed_opt) learner["seed"] = train_seed;
            if (no_normalize) learner["normalize"] = false;
            auto cfg = config_for(train_opts, {"validate", "data", "train"}, learner);
            if (!train_opts.config.empty()) {
                if (hidden) cfg.learner.hidden_size = cfg.learner.context_size = hidden;
                if (learning_rate > 0.0) cfg.learner.learning_rate = learning_rate;
                if (*seed_opt) cfg.learner.seed = train_seed;
                if (no_normalize) cfg.learner.normalize = false;
                cfg.learner.validate();
            }
            if (carry_over) cfg.carry_over = true;
            print_manifest_summary(run(cfg), cfg.output_dir);
            return 0;
        }
        if (whatif->parsed() || counterfactual->parsed()) {
            const bool is_whatif = whatif->parsed();
            const auto& o = is_whatif ? wi : cf;
            const auto graph = load_graph(o.graph);
            require_valid(graph);
            const auto base = load_any_couplings(o.couplings, graph);
            const auto driver = load_block(o.driver, graph.node_count());
            const auto targets = resolve_nodes(o.targets, graph);
            CouplingSet modified = base;
            if (is_whatif) {
                for (const auto& s : o.sets) {
                    const auto eq = s.find('=');
                    if (eq == std::string::npos) throw ValidationError("--set needs EFFECT<-CAUSE@LAG=VALUE");
                    const auto ref = parse_edge_ref(std::string_view(s).substr(0, eq), graph);
                    const auto lag = ref.lag.value_or(0);
                    if (!graph.has_edge(ref.cause, ref.effect, lag))
                        throw ValidationError("--set names an edge not in the graph: " + s);
                    modified(lag, ref.effect, ref.cause) = parse_double(s.substr(eq + 1), "coupling value");
                }
            } else {
                std::vector<Removal> removals;
                for (const auto& e : o.remove_edges) {
                    const auto ref = parse_edge_ref(e, graph);
                    removals.push_back({ref.cause, ref.effect, ref.lag});
                }
                for (const auto& n : o.remove_nodes) removals.push_back({graph.node_index(n), std::nullopt, std::nullopt});
                if (removals.empty()) throw ValidationError("give --remove-edge or --remove-node");
                modified = counterfactual_remove(base, graph, removals);
            }
            WhatIfOptions options;
            options.closed_loop = o.closed_loop;
            const auto labelled = MultichannelSeries(driver.data(), driver.sample_rate(), graph.labels());
            save_series(o.output, whatif_run(modified, labelled, targets, options));
            std::cout << o.output << "\n";
            return 0;
        }
        if (tfd->parsed()) {
            const auto series = load_block(tfd_input);
            tfd_params.window = parse_window_type(tfd_window);
            if (!*nfft_opt) tfd_params.nfft = tfd_params.window_len;
            const double rate = tfd_rate > 0.0 ? tfd_rate : series.sample_rate();
            const auto matrix = spectrogram(series.channel(series.channel_index(tfd_channel)), tfd_params, rate);
            write_text_file(tfd_output, format_tfd(matrix));
            const auto spectrum = collapse_spectrum(matrix);
            if (!tfd_spectrum.empty()) write_text_file(tfd_spectrum, format_spectrum(spectrum));
            if (!tfd_svg.empty()) write_text_file(tfd_svg, svg_tfd_heatmap("TFD: " + tfd_channel, matrix));
            if (tfd_split >= 0.0)
                std::cout << "band_power_ratio " << format_double(band_power_ratio(spectrum, tfd_split)) << "\n";
            return 0;
        }
        if (report->parsed()) {
            for (const auto& p : emit_report(report_dir)) std::cout << p.string() << "\n";
            return 0;
        }
        if (run_cmd->parsed()) {
            auto cfg = load_config(run_config);
            if (!run_out.empty()) cfg.output_dir = run_out;
            print_manifest_summary(run(cfg), cfg.output_dir);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
