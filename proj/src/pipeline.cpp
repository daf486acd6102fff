#include "ctwin/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <numbers>

#include <json.hpp>

#include "ctwin/svg.hpp"
#include "ctwin/text_util.hpp"

namespace ctwin {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::function<double(std::size_t, std::size_t)> multisine_excitation(const ExcitationSpec& spec) {
    if (spec.tones == 0) throw ValidationError("excitation needs at least one tone");
    struct Tone {
        double freq, phase;
    };
    const double golden = std::numbers::phi;
    std::vector<std::vector<Tone>> tones;
    std::size_t max_channel = 0;
    for (auto c : spec.channels) max_channel = std::max(max_channel, c + 1);
    tones.resize(max_channel);
    for (auto c : spec.channels) {
        auto& list = tones[c];
        list.clear();
        for (std::size_t j = 0; j < spec.tones; ++j) {
            const double u = static_cast<double>(j + 1) * golden +
                             0.37 * static_cast<double>(c + 1) * std::numbers::sqrt2;
            const double v = static_cast<double>(j + 1) * std::numbers::sqrt3 +
                             static_cast<double>(c) * golden;
            // keep frequencies inside (0.02, 0.48) cycles/sample
            list.push_back({0.02 + 0.46 * (u - std::floor(u)),
                            2.0 * std::numbers::pi * (v - std::floor(v))});
        }
    }
    const double amp = spec.amplitude * std::sqrt(2.0 / static_cast<double>(spec.tones));
    return [tones, amp](std::size_t n, std::size_t channel) {
        if (channel >= tones.size()) return 0.0;
        double sum = 0.0;
        for (const auto& t : tones[channel])
            sum += std::sin(2.0 * std::numbers::pi * t.freq * static_cast<double>(n) + t.phase);
        return amp * sum;
    };
}

CouplingSet scheduled_couplings(const SynthSpec& spec, std::size_t block) {
    CouplingSet k = spec.base;
    const double position =
        spec.blocks > 1 ? static_cast<double>(block) / static_cast<double>(spec.blocks - 1) : 0.0;
    for (const auto& ramp : spec.schedule) {
        if (!spec.graph.has_edge(ramp.edge.cause, ramp.edge.effect, ramp.edge.lag))
            throw ValidationError("schedule ramps a coupling that is not in the graph");
        k(ramp.edge.lag, ramp.edge.effect, ramp.edge.cause) =
            ramp.from + (ramp.to - ramp.from) * position;
    }
    return k;
}

std::vector<SynthBlock> synth_blocks(const SynthSpec& spec) {
    if (spec.blocks == 0) throw ValidationError("synthetic dataset needs at least one block");
    GenerateOptions options;
    options.burn_in = spec.burn_in;
    options.sample_rate = spec.sample_rate;
    if (spec.excitation) options.excitation = multisine_excitation(*spec.excitation);
    std::vector<SynthBlock> out;
    for (std::size_t b = 0; b < spec.blocks; ++b) {
        auto truth = scheduled_couplings(spec, b);
        NoiseSpec noise = spec.noise;
        noise.seed = spec.noise.seed + b;
        try {
            auto series = generate_series(spec.graph, truth, noise, spec.n_samples, options);
            out.push_back({std::move(series), std::move(truth)});
        } catch (const ValidationError& ex) {
            throw ValidationError("block " + std::to_string(b) + ": " + ex.what());
        }
    }
    return out;
}

namespace {

std::string block_name(std::size_t b) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "block_%02zu", b);
    return buf;
}

std::vector<fs::path> write_synth(const SynthSpec& spec, const std::vector<SynthBlock>& blocks,
                                  const fs::path& dir) {
    std::vector<fs::path> written;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto series_path = dir / (block_name(b) + ".txt");
        save_series(series_path, blocks[b].series);
        char truth_name[32];
        std::snprintf(truth_name, sizeof truth_name, "truth_%02zu.csv", b);
        const auto truth_path = dir / truth_name;
        ordered_json meta;
        meta["kind"] = "couplings";
        meta["source"] = "truth";
        meta["block"] = b;
        meta["noise"] = {{"kind", to_string(spec.noise.kind)}, {"seed", spec.noise.seed + b}};
        meta["n_samples"] = spec.n_samples;
        save_couplings(truth_path, blocks[b].truth, spec.graph, meta.dump());
        written.push_back(series_path);
        written.push_back(truth_path);
        written.push_back(sidecar_path(truth_path));
    }
    return written;
}

}  // namespace

std::vector<fs::path> synth_dataset(const SynthSpec& spec, const fs::path& dir) {
    return write_synth(spec, synth_blocks(spec), dir);
}

bool ExperimentConfig::wants(const std::string& stage) const {
    return stages.empty() || std::find(stages.begin(), stages.end(), stage) != stages.end();
}

namespace {

std::size_t node_ref(const json& j, const CausalGraph& graph) {
    if (j.is_number_integer()) {
        const auto v = j.get<long long>();
        if (v < 1 || static_cast<std::size_t>(v) > graph.node_count())
            throw ValidationError("node index " + std::to_string(v) + " out of range");
        return static_cast<std::size_t>(v - 1);
    }
    return graph.node_index(j.get<std::string>());
}

std::vector<std::size_t> node_list(const json& j, const CausalGraph& graph) {
    std::vector<std::size_t> out;
    for (const auto& item : j) out.push_back(node_ref(item, graph));
    return out;
}

LaggedEdge edge_ref(const json& j, const CausalGraph& graph) {
    LaggedEdge e{node_ref(j.at("cause"), graph), node_ref(j.at("effect"), graph),
                 j.value("lag", std::size_t{0})};
    if (!graph.has_edge(e.cause, e.effect, e.lag))
        throw ValidationError("edge " + coupling_name(graph, e) + " is not in the graph");
    return e;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

CouplingSet couplings_from_json(const json& j, const CausalGraph& graph, const fs::path& base) {
    if (j.is_string()) return load_couplings(resolve(base, j.get<std::string>()), graph);
    CouplingSet k(graph.node_count(), graph.lag_order());
    for (const auto& item : j) {
        const auto e = edge_ref(item, graph);
        k(e.lag, e.effect, e.cause) = item.at("value").get<double>();
    }
    return k;
}

SynthSpec parse_synth(const json& j, const CausalGraph& graph, const fs::path& base,
                      std::uint64_t seed) {
    SynthSpec spec;
    spec.graph = graph;
    spec.base = couplings_from_json(j.at("couplings"), graph, base);
    const auto g = static_cast<Eigen::Index>(graph.node_count());
    const json noise = j.value("noise", json::object());
    spec.noise.kind = parse_noise_kind(noise.value("kind", std::string("laplace")));
    const json scale = noise.value("scale", json(1.0));
    if (scale.is_number()) {
        spec.noise.scale = Eigen::VectorXd::Constant(g, scale.get<double>());
    } else {
        const auto values = scale.get<std::vector<double>>();
        if (static_cast<Eigen::Index>(values.size()) != g)
            throw ValidationError("noise.scale needs one entry per node");
        spec.noise.scale = Eigen::Map<const Eigen::VectorXd>(values.data(), g);
    }
    spec.noise.seed = noise.value("seed", seed);
    spec.n_samples = j.value("n_samples", spec.n_samples);
    if (j.contains("burn_in") && !j.at("burn_in").is_null())
        spec.burn_in = j.at("burn_in").get<std::size_t>();
    spec.blocks = j.value("blocks", std::size_t{1});
    for (const auto& r : j.value("schedule", json::array()))
        spec.schedule.push_back({edge_ref(r, graph), r.at("from").get<double>(),
                                 r.at("to").get<double>()});
    if (j.contains("excitation")) {
        const auto& ex = j.at("excitation");
        ExcitationSpec e;
        e.channels = node_list(ex.at("channels"), graph);
        e.amplitude = ex.value("amplitude", e.amplitude);
        e.tones = ex.value("tones", e.tones);
        spec.excitation = e;
    }
    spec.sample_rate = j.value("sample_rate", 0.0);
    return spec;
}

Scenario parse_scenario(const json& j, const CausalGraph& graph) {
    Scenario s;
    s.name = j.at("name").get<std::string>();
    if (s.name.empty() || s.name.find_first_of("/\\ ") != std::string::npos)
        throw ValidationError("scenario names must be non-empty and contain no spaces or slashes");
    const auto kind = j.value("kind", std::string("whatif"));
    if (kind == "whatif") s.kind = Scenario::Kind::WhatIf;
    else if (kind == "counterfactual") s.kind = Scenario::Kind::Counterfactual;
    else throw ValidationError("scenario kind must be 'whatif' or 'counterfactual'");
    const auto source = j.value("couplings", std::string("fit"));
    if (source == "fit") s.source = CouplingSource::Fit;
    else if (source == "learner") s.source = CouplingSource::Learner;
    else if (source == "truth") s.source = CouplingSource::Truth;
    else throw ValidationError("scenario couplings must be 'fit', 'learner' or 'truth'");
    s.base_block = j.value("base_block", std::size_t{0});
    s.driver_block = j.value("driver_block", s.base_block);
    s.targets = node_list(j.at("targets"), graph);
    for (const auto& o : j.value("set", json::array()))
        s.overrides.push_back({edge_ref(o, graph), o.at("value").get<double>()});
    for (const auto& r : j.value("remove", json::array())) {
        Removal rm;
        rm.cause = node_ref(r.contains("node") ? r.at("node") : r.at("cause"), graph);
        if (r.contains("effect")) rm.effect = node_ref(r.at("effect"), graph);
        if (r.contains("lag")) rm.lag = r.at("lag").get<std::size_t>();
        if (rm.effect && !graph.has_link(rm.cause, *rm.effect))
            throw ValidationError("scenario '" + s.name + "' removes an edge not in the graph");
        s.removals.push_back(rm);
    }
    s.closed_loop = j.value("closed_loop", false);
    if (j.contains("reference_block")) s.reference_block = j.at("reference_block").get<std::size_t>();
    return s;
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
    ExperimentConfig cfg;
    cfg.base_dir = base_dir;
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& ex) {
        throw ValidationError(std::string("config is not valid JSON: ") + ex.what());
    }
    try {
        cfg.snapshot = ordered_json::parse(json_text).dump();
        cfg.seed = doc.value("seed", std::uint64_t{0});
        const auto& graph = doc.at("graph");
        if (graph.is_string()) {
            cfg.graph_path = resolve(base_dir, graph.get<std::string>());
            cfg.graph = load_graph(cfg.graph_path);
        } else {
            cfg.graph = parse_graph(graph.dump());
        }
        require_valid(cfg.graph);
        cfg.output_dir = resolve(base_dir, doc.value("output_dir", std::string("out")));
        if (doc.contains("stages")) {
            cfg.stages = doc.at("stages").get<std::vector<std::string>>();
            for (const auto& s : cfg.stages)
                if (std::find(all_stages().begin(), all_stages().end(), s) == all_stages().end())
                    throw ValidationError("unknown stage '" + s + "'");
        }

        const json data = doc.value("data", json::object());
        for (const auto& f : data.value("files", std::vector<std::string>{}))
            cfg.files.push_back(resolve(base_dir, f));
        if (data.contains("sample_rate")) cfg.sample_rate = data.at("sample_rate").get<double>();
        if (data.contains("synthetic"))
            cfg.synthetic = parse_synth(data.at("synthetic"), cfg.graph, base_dir, cfg.seed);
        if (cfg.files.empty() && !cfg.synthetic && cfg.stages != std::vector<std::string>{"validate"})
            throw ValidationError("config lists no data files and no synthetic dataset");
        if (!cfg.files.empty() && cfg.synthetic)
            throw ValidationError("config may use data files or a synthetic dataset, not both");

        json learner = doc.value("learner", json::object());
        cfg.carry_over = learner.value("carry_over", false);
        learner.erase("carry_over");
        NetworkConfig defaults;
        defaults.seed = cfg.seed;
        cfg.learner = parse_network_config(learner.dump(), defaults);

        for (const auto& s : doc.value("scenarios", json::array()))
            cfg.scenarios.push_back(parse_scenario(s, cfg.graph));
        for (std::size_t i = 0; i < cfg.scenarios.size(); ++i)
            for (std::size_t k = 0; k < i; ++k)
                if (cfg.scenarios[i].name == cfg.scenarios[k].name)
                    throw ValidationError("duplicate scenario name '" + cfg.scenarios[i].name + "'");

        const json tfd = doc.value("tfd", json::object());
        cfg.tfd.params.window_len = tfd.value("window_len", cfg.tfd.params.window_len);
        cfg.tfd.params.hop = tfd.value("hop", cfg.tfd.params.hop);
        cfg.tfd.params.nfft = tfd.value("nfft", cfg.tfd.params.window_len);
        cfg.tfd.params.window = parse_window_type(tfd.value("window", std::string("hann")));
        if (tfd.contains("split_freq")) cfg.tfd.split_freq = tfd.at("split_freq").get<double>();
        if (tfd.contains("channels")) cfg.tfd.channels = node_list(tfd.at("channels"), cfg.graph);
    } catch (const json::exception& ex) {
        throw ValidationError(std::string("malformed config: ") + ex.what());
    }
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    return parse_config(read_text_file(path), path.parent_path());
}

std::string recovery_json(const std::vector<CouplingSet>& estimates,
                          const std::vector<CouplingSet>& truth, const CausalGraph& graph) {
    const ParamLayout layout(graph);
    ordered_json doc;
    doc["blocks"] = ordered_json::array();
    for (std::size_t b = 0; b < estimates.size() && b < truth.size(); ++b) {
        const Eigen::VectorXd err =
            (flatten(estimates[b], layout) - flatten(truth[b], layout)).cwiseAbs();
        doc["blocks"].push_back({{"block", b},
                                 {"mean_abs_error", err.mean()},
                                 {"max_abs_error", err.maxCoeff()}});
    }
    return doc.dump(2) + "\n";
}

std::string format_manifest(const RunManifest& manifest, const ExperimentConfig& config) {
    ordered_json doc;
    doc["tool"] = "ctwin";
    doc["version"] = kToolVersion;
    doc["complete"] = manifest.complete;
    if (!manifest.complete) {
        doc["failed_stage"] = manifest.failed_stage;
        doc["error"] = manifest.error;
    }
    doc["config"] = config.snapshot.empty() ? ordered_json::object()
                                            : ordered_json::parse(config.snapshot);
    doc["inputs"] = ordered_json::array();
    for (const auto& [path, sum] : manifest.inputs)
        doc["inputs"].push_back({{"path", path.generic_string()}, {"sha256", sum}});
    doc["stages"] = ordered_json::array();
    for (const auto& stage : manifest.stages) {
        ordered_json s;
        s["name"] = stage.name;
        s["outputs"] = ordered_json::array();
        for (const auto& out : stage.outputs)
            s["outputs"].push_back({{"path", out.generic_string()},
                                    {"sha256", sha256_file(config.output_dir / out)}});
        doc["stages"].push_back(s);
    }
    return doc.dump(2) + "\n";
}

namespace {

struct RunState {
    std::vector<MultichannelSeries> blocks;
    std::vector<CouplingSet> truth;
    std::vector<FitReport> fits;
    std::vector<TrainResult> trains;
    struct ScenarioOutput {
        MultichannelSeries simulated;
        MultichannelSeries baseline;
    };
    std::vector<ScenarioOutput> scenarios;
};

fs::path relative_to(const fs::path& p, const fs::path& base) {
    auto rel = p.lexically_relative(base);
    return rel.empty() ? p : rel;
}

std::string tfd_tag(const std::string& source, const std::string& channel) {
    return source + "_" + channel;
}

CouplingSet scenario_couplings(const Scenario& s, const ExperimentConfig& cfg,
                               const RunState& state) {
    const auto b = s.base_block;
    switch (s.source) {
        case CouplingSource::Fit:
            if (b >= state.fits.size())
                throw ValidationError("scenario '" + s.name + "' needs the fit stage for block " +
                                      std::to_string(b));
            return state.fits[b].couplings;
        case CouplingSource::Learner:
            if (b >= state.trains.size())
                throw ValidationError("scenario '" + s.name + "' needs the train stage for block " +
                                      std::to_string(b));
            // the learner reports couplings between z-scored channels
            return to_raw_units(state.trains[b].estimate, state.trains[b].channel_scale);
        case CouplingSource::Truth:
            if (b >= state.truth.size())
                throw ValidationError("scenario '" + s.name + "' needs a synthetic dataset");
            return state.truth[b];
    }
    (void)cfg;
    throw Error("unreachable coupling source");
}

}  // namespace

RunManifest run(const ExperimentConfig& cfg) {
    RunManifest manifest;
    RunState state;
    const auto& out = cfg.output_dir;
    fs::create_directories(out);
    const auto& graph = cfg.graph;

    auto write_manifest = [&] {
        write_text_file(out / "manifest.json", format_manifest(manifest, cfg));
        ordered_json timings;
        timings["stages"] = ordered_json::array();
        for (const auto& s : manifest.stages)
            timings["stages"].push_back({{"name", s.name}, {"seconds", s.seconds}});
        write_text_file(out / "timings.json", timings.dump(2) + "\n");
    };

    auto stage = [&](const std::string& name, const std::function<void(std::vector<fs::path>&)>& body) {
        StageRecord record{name, {}, 0.0};
        const auto start = std::chrono::steady_clock::now();
        try {
            body(record.outputs);
        } catch (const std::exception& ex) {
            manifest.complete = false;
            manifest.failed_stage = name;
            manifest.error = ex.what();
            manifest.stages.push_back(record);
            write_manifest();
            const int code = dynamic_cast<const Error*>(&ex)
                                 ? dynamic_cast<const Error&>(ex).exit_code()
                                 : 4;
            throw Error("stage '" + name + "' failed: " + ex.what(), code);
        }
        record.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        for (auto& p : record.outputs) p = relative_to(p, out);
        manifest.stages.push_back(std::move(record));
    };

    if (!cfg.graph_path.empty())
        manifest.inputs.emplace_back(relative_to(cfg.graph_path, cfg.base_dir),
                                     sha256_file(cfg.graph_path));
    for (const auto& f : cfg.files)
        manifest.inputs.emplace_back(relative_to(f, cfg.base_dir), sha256_file(f));

    stage("validate", [&](auto& outputs) {
        require_valid(graph);
        write_text_file(out / "graph.json", dump_graph(graph));
        outputs.push_back(out / "graph.json");
    });

    const bool needs_data = cfg.wants("data") || cfg.wants("fit") || cfg.wants("train") ||
                            cfg.wants("scenarios") || cfg.wants("tfd");
    if (needs_data) {
        stage("data", [&](auto& outputs) {
            if (cfg.synthetic) {
                auto blocks = synth_blocks(*cfg.synthetic);
                for (auto& p : write_synth(*cfg.synthetic, blocks, out / "data")) outputs.push_back(p);
                for (auto& b : blocks) {
                    state.truth.push_back(b.truth);
                    state.blocks.push_back(std::move(b.series));
                }
            } else {
                for (const auto& f : cfg.files) {
                    auto s = load_block(f, graph.node_count());
                    if (cfg.sample_rate)
                        s = MultichannelSeries(s.data(), *cfg.sample_rate, graph.labels());
                    else
                        s = MultichannelSeries(s.data(), s.sample_rate(), graph.labels());
                    state.blocks.push_back(std::move(s));
                }
            }
        });
    }

    if (cfg.wants("fit")) {
        stage("fit", [&](auto& outputs) {
            for (std::size_t b = 0; b < state.blocks.size(); ++b) {
                auto report = ols_svar_fit(state.blocks[b], graph);
                if (!report.ok()) {
                    std::string nodes;
                    for (auto n : report.rank_deficient_nodes) nodes += " " + graph.label(n);
                    throw DataError("rank-deficient regressors in " + block_name(b) + " for node(s):" + nodes);
                }
                ordered_json meta;
                meta["kind"] = "couplings";
                meta["source"] = "ols";
                meta["block"] = b;
                meta["units"] = "raw";
                std::vector<double> resid(report.residual_variance.data(),
                                          report.residual_variance.data() + report.residual_variance.size());
                meta["residual_variance"] = resid;
                const ParamLayout layout(graph);
                const Eigen::VectorXd se = flatten(report.standard_errors, layout);
                meta["standard_errors"] = std::vector<double>(se.data(), se.data() + se.size());
                const auto path = out / "fit" / (block_name(b) + ".csv");
                save_couplings(path, report.couplings, graph, meta.dump());
                outputs.push_back(path);
                outputs.push_back(sidecar_path(path));
                state.fits.push_back(std::move(report));
            }
            if (!state.truth.empty()) {
                std::vector<CouplingSet> est;
                for (const auto& f : state.fits) est.push_back(f.couplings);
                write_text_file(out / "fit" / "recovery.json", recovery_json(est, state.truth, graph));
                outputs.push_back(out / "fit" / "recovery.json");
            }
        });
    }

    if (cfg.wants("train")) {
        stage("train", [&](auto& outputs) {
            const auto n = state.blocks.size();
            state.trains.resize(n);
            if (cfg.carry_over) {
                std::optional<NetworkState> carried;
                for (std::size_t b = 0; b < n; ++b) {
                    state.trains[b] = train_online(state.blocks[b], graph, cfg.learner, carried);
                    carried = state.trains[b].final_state;
                }
            } else {
                std::vector<std::future<TrainResult>> jobs;
                for (std::size_t b = 0; b < n; ++b)
                    jobs.push_back(std::async(std::launch::async, [&, b] {
                        return train_online(state.blocks[b], graph, cfg.learner);
                    }));
                for (std::size_t b = 0; b < n; ++b) state.trains[b] = jobs[b].get();
            }
            for (std::size_t b = 0; b < n; ++b) {
                const auto& r = state.trains[b];
                ordered_json meta;
                meta["kind"] = "couplings";
                meta["source"] = "imrnns";
                meta["block"] = b;
                meta["units"] = cfg.learner.normalize ? "normalized" : "raw";
                meta["channel_scale"] =
                    std::vector<double>(r.channel_scale.data(), r.channel_scale.data() + r.channel_scale.size());
                meta["config"] = ordered_json::parse(network_config_json(cfg.learner));
                const auto path = out / "train" / (block_name(b) + ".csv");
                save_couplings(path, r.estimate, graph, meta.dump());
                const auto traj = out / "train" / (block_name(b) + "_trajectory.csv");
                save_trajectory(traj, r, graph, cfg.learner);
                for (const auto& p : {path, sidecar_path(path), traj, sidecar_path(traj)})
                    outputs.push_back(p);
            }
            if (!state.truth.empty()) {
                std::vector<CouplingSet> est;
                for (const auto& r : state.trains) est.push_back(to_raw_units(r.estimate, r.channel_scale));
                write_text_file(out / "train" / "recovery.json", recovery_json(est, state.truth, graph));
                outputs.push_back(out / "train" / "recovery.json");
            }
        });
    }

    if (cfg.wants("scenarios") && !cfg.scenarios.empty()) {
        stage("scenarios", [&](auto& outputs) {
            for (const auto& s : cfg.scenarios) {
                if (s.driver_block >= state.blocks.size())
                    throw ValidationError("scenario '" + s.name + "' drives with missing block " +
                                          std::to_string(s.driver_block));
                const CouplingSet base = scenario_couplings(s, cfg, state);
                CouplingSet modified = base;
                for (const auto& o : s.overrides) modified(o.edge.lag, o.edge.effect, o.edge.cause) = o.value;
                if (!s.removals.empty()) modified = counterfactual_remove(modified, graph, s.removals);
                WhatIfOptions options;
                options.closed_loop = s.closed_loop;
                const auto& driver = state.blocks[s.driver_block];
                auto simulated = whatif_run(modified, driver, s.targets, options);
                auto baseline = whatif_run(base, driver, s.targets, options);
                const auto dir = out / "scenarios" / s.name;
                ordered_json meta;
                meta["kind"] = "couplings";
                meta["source"] = "scenario";
                meta["scenario"] = s.name;
                meta["units"] = "raw";
                save_couplings(dir / "couplings.csv", modified, graph, meta.dump());
                save_series(dir / "simulated.txt", simulated);
                save_series(dir / "baseline.txt", baseline);
                for (const auto& p : {dir / "couplings.csv", sidecar_path(dir / "couplings.csv"),
                                      dir / "simulated.txt", dir / "baseline.txt"})
                    outputs.push_back(p);
                state.scenarios.push_back({std::move(simulated), std::move(baseline)});
            }
        });
    }

    if (cfg.wants("tfd")) {
        stage("tfd", [&](auto& outputs) {
            if (state.blocks.empty()) throw ValidationError("tfd stage has no data");
            std::string summary = "source,channel,band_power_ratio,similarity_to_reference,reference\n";
            auto analyse = [&](const MultichannelSeries& series, std::size_t channel,
                               const std::string& source) {
                const auto tfd = spectrogram(series.channel(channel), cfg.tfd.params, series.sample_rate());
                const auto tag = tfd_tag(source, graph.label(channel));
                const auto path = out / "tfd" / (tag + ".csv");
                const auto spec_path = out / "tfd" / (tag + "_spectrum.csv");
                write_text_file(path, format_tfd(tfd));
                const auto spectrum = collapse_spectrum(tfd);
                write_text_file(spec_path, format_spectrum(spectrum));
                outputs.push_back(path);
                outputs.push_back(spec_path);
                return spectrum;
            };
            auto split_for = [&](const MultichannelSeries& s) {
                const double fs = s.sample_rate() > 0.0 ? s.sample_rate() : 1.0;
                return cfg.tfd.split_freq.value_or(fs / 4.0);
            };
            std::vector<std::size_t> channels = cfg.tfd.channels;
            if (channels.empty())
                for (std::size_t c = 0; c < graph.node_count(); ++c) channels.push_back(c);

            // spectra of measured blocks, kept for scenario references
            std::vector<std::vector<std::optional<Spectrum>>> block_spectra(
                state.blocks.size(), std::vector<std::optional<Spectrum>>(graph.node_count()));
            auto block_spectrum = [&](std::size_t b, std::size_t c) -> const Spectrum& {
                auto& slot = block_spectra[b][c];
                if (!slot) slot = analyse(state.blocks[b], c, block_name(b));
                return *slot;
            };
            for (std::size_t b = 0; b < state.blocks.size(); ++b)
                for (auto c : channels) {
                    const auto& sp = block_spectrum(b, c);
                    summary += block_name(b) + "," + graph.label(c) + "," +
                               format_double(band_power_ratio(sp, split_for(state.blocks[b]))) + ",,\n";
                }
            for (std::size_t i = 0; i < state.scenarios.size(); ++i) {
                const auto& s = cfg.scenarios[i];
                const auto& outcome = state.scenarios[i];
                if (s.reference_block && *s.reference_block >= state.blocks.size())
                    throw ValidationError("scenario '" + s.name + "' references a missing block");
                for (auto c : s.targets) {
                    for (const auto& [series, suffix] :
                         {std::pair{&outcome.simulated, "simulated"}, std::pair{&outcome.baseline, "baseline"}}) {
                        const auto source = s.name + "_" + suffix;
                        const auto sp = analyse(*series, c, source);
                        std::string similarity, reference;
                        if (s.reference_block) {
                            similarity = format_double(
                                spectral_similarity(sp, block_spectrum(*s.reference_block, c)));
                            reference = block_name(*s.reference_block);
                        }
                        summary += source + "," + graph.label(c) + "," +
                                   format_double(band_power_ratio(sp, split_for(*series))) + "," +
                                   similarity + "," + reference + "\n";
                    }
                }
            }
            write_text_file(out / "summary.csv", summary);
            outputs.push_back(out / "summary.csv");
        });
    }

    if (cfg.wants("report")) {
        stage("report", [&](auto& outputs) {
            for (const auto& p : emit_report(out)) outputs.push_back(out / p);
        });
    }

    manifest.complete = true;
    write_manifest();
    return manifest;
}

TfdMatrix parse_tfd(std::string_view text) {
    TfdMatrix tfd;
    std::vector<std::vector<double>> rows;
    bool header_done = false;
    for (const auto& raw : split(text, '\n')) {
        std::string line = raw;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            for (const auto& token : split_whitespace(line.substr(1))) {
                const auto eq = token.find('=');
                if (eq == std::string::npos) continue;
                const auto key = token.substr(0, eq);
                const auto value = token.substr(eq + 1);
                if (key == "window") tfd.params.window = parse_window_type(value);
                else if (key == "window_len") tfd.params.window_len = static_cast<std::size_t>(parse_double(value, key));
                else if (key == "hop") tfd.params.hop = static_cast<std::size_t>(parse_double(value, key));
                else if (key == "nfft") tfd.params.nfft = static_cast<std::size_t>(parse_double(value, key));
                else if (key == "sample_rate") tfd.sample_rate = parse_double(value, key);
            }
            continue;
        }
        const auto cells = split(line, ',');
        if (!header_done) {
            header_done = true;
            tfd.freq_axis.resize(static_cast<Eigen::Index>(cells.size() - 1));
            for (std::size_t k = 1; k < cells.size(); ++k)
                tfd.freq_axis(static_cast<Eigen::Index>(k - 1)) = parse_double(cells[k], "frequency");
            continue;
        }
        if (static_cast<Eigen::Index>(cells.size()) != tfd.freq_axis.size() + 1)
            throw DataError("TFD row has the wrong number of columns");
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(parse_double(c, "TFD value"));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("TFD table has no slices");
    tfd.power.resize(static_cast<Eigen::Index>(rows.size()), tfd.freq_axis.size());
    tfd.time_axis.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) {
        tfd.time_axis(static_cast<Eigen::Index>(t)) = rows[t][0];
        for (Eigen::Index k = 0; k < tfd.freq_axis.size(); ++k)
            tfd.power(static_cast<Eigen::Index>(t), k) = rows[t][static_cast<std::size_t>(k + 1)];
    }
    return tfd;
}

namespace {

std::vector<fs::path> sorted_files(const fs::path& dir) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir)) return files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string trajectory_svg(const std::string& title, const std::string& csv) {
    const auto lines = split(csv, '\n');
    if (lines.empty()) throw DataError("empty trajectory file");
    const auto header = split(lines[0], ',');
    if (header.size() < 3 || header[0] != "step" || header[1] != "E")
        throw DataError("trajectory file has an unexpected header");
    std::vector<std::vector<double>> cols(header.size());
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cells = split(lines[i], ',');
        if (cells.size() != header.size()) throw DataError("ragged trajectory row");
        for (std::size_t c = 0; c < cells.size(); ++c) cols[c].push_back(parse_double(cells[c], "trajectory value"));
    }
    if (cols[0].empty()) throw DataError("trajectory file has no rows");
    auto to_vec = [](const std::vector<double>& v) {
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    };
    std::vector<Trace> traces;
    for (std::size_t c = 2; c < header.size(); ++c) traces.push_back({header[c], to_vec(cols[c])});
    return svg_line_plot(title, to_vec(cols[0]), traces, "sample", "smoothed coupling");
}

}  // namespace

std::vector<fs::path> emit_report(const fs::path& output_dir) {
    std::vector<fs::path> written;
    const auto report_dir = output_dir / "report";
    for (const auto& f : sorted_files(output_dir / "train")) {
        const auto name = f.filename().string();
        if (!ends_with(name, "_trajectory.csv")) continue;
        const auto stem = f.stem().string();
        const auto path = report_dir / (stem + ".svg");
        write_text_file(path, trajectory_svg("Coupling trajectories: " + stem, read_text_file(f)));
        written.push_back(relative_to(path, output_dir));
    }
    for (const auto& f : sorted_files(output_dir / "tfd")) {
        const auto name = f.filename().string();
        if (!ends_with(name, ".csv") || ends_with(name, "_spectrum.csv")) continue;
        const auto stem = f.stem().string();
        const auto path = report_dir / ("tfd_" + stem + ".svg");
        write_text_file(path, svg_tfd_heatmap("TFD: " + stem, parse_tfd(read_text_file(f))));
        written.push_back(relative_to(path, output_dir));
    }
    if (fs::exists(output_dir / "summary.csv")) {
        const auto path = report_dir / "summary.csv";
        write_text_file(path, read_text_file(output_dir / "summary.csv"));
        written.push_back(relative_to(path, output_dir));
    }
    if (written.empty())
        throw DataError("no stage outputs to report in " + output_dir.string());
    return written;
}

}  // namespace ctwin
