#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctwin/baselines.hpp"
#include "ctwin/graph.hpp"
#include "ctwin/imrnns.hpp"
#include "ctwin/persist.hpp"
#include "ctwin/series.hpp"
#include "ctwin/spectral.hpp"
#include "ctwin/svar.hpp"

namespace ctwin {

inline constexpr const char* kToolVersion = "0.1.0";

/// Linear ramp of one coupling across the blocks of a synthetic dataset.
struct ScheduleRamp {
    LaggedEdge edge;
    double from = 0.0;
    double to = 0.0;
};

/// Deterministic multisine added to the innovations of the listed channels.
struct ExcitationSpec {
    std::vector<std::size_t> channels;
    double amplitude = 1.0;
    std::size_t tones = 8;
};

std::function<double(std::size_t, std::size_t)> multisine_excitation(const ExcitationSpec& spec);

struct SynthSpec {
    CausalGraph graph;
    CouplingSet base;
    NoiseSpec noise;
    std::size_t n_samples = 20000;
    std::optional<std::size_t> burn_in;
    std::size_t blocks = 1;
    std::vector<ScheduleRamp> schedule;
    std::optional<ExcitationSpec> excitation;
    double sample_rate = 0.0;
};

struct SynthBlock {
    MultichannelSeries series;
    CouplingSet truth;
};

/// Block b uses noise seed `noise.seed + b` and the schedule evaluated at
/// b / (blocks - 1).
CouplingSet scheduled_couplings(const SynthSpec& spec, std::size_t block);
std::vector<SynthBlock> synth_blocks(const SynthSpec& spec);
/// Writes block_XX.txt and truth_XX.csv (+ sidecar) into `dir`; returns the paths.
std::vector<std::filesystem::path> synth_dataset(const SynthSpec& spec,
                                                 const std::filesystem::path& dir);

enum class CouplingSource { Fit, Learner, Truth };

struct CouplingOverride {
    LaggedEdge edge;
    double value = 0.0;
};

struct Scenario {
    enum class Kind { WhatIf, Counterfactual };
    std::string name;
    Kind kind = Kind::WhatIf;
    CouplingSource source = CouplingSource::Fit;
    std::size_t base_block = 0;    ///< block whose fitted couplings are modified
    std::size_t driver_block = 0;  ///< block whose measurements drive the simulation
    std::vector<std::size_t> targets;
    std::vector<CouplingOverride> overrides;
    std::vector<Removal> removals;
    bool closed_loop = false;
    std::optional<std::size_t> reference_block;
};

struct TfdSettings {
    SpectrogramParams params;
    /// Defaults to a quarter of the sample rate.
    std::optional<double> split_freq;
    /// Defaults to every channel.
    std::vector<std::size_t> channels;
};

struct ExperimentConfig {
    std::filesystem::path base_dir;
    std::filesystem::path graph_path;
    CausalGraph graph;
    std::vector<std::filesystem::path> files;
    std::optional<double> sample_rate;
    std::optional<SynthSpec> synthetic;
    NetworkConfig learner;
    bool carry_over = false;
    std::vector<Scenario> scenarios;
    TfdSettings tfd;
    std::filesystem::path output_dir;
    std::uint64_t seed = 0;
    std::vector<std::string> stages;
    /// The config document as read, embedded in the manifest.
    std::string snapshot;

    bool wants(const std::string& stage) const;
};

inline const std::vector<std::string>& all_stages() {
    static const std::vector<std::string> stages = {"validate", "data",  "fit",   "train",
                                                    "scenarios", "tfd", "report"};
    return stages;
}

/// Relative paths resolve against `base_dir`.
ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

struct StageRecord {
    std::string name;
    std::vector<std::filesystem::path> outputs;  ///< relative to the output directory
    double seconds = 0.0;
};

struct RunManifest {
    bool complete = false;
    std::string failed_stage;
    std::string error;
    std::vector<std::pair<std::filesystem::path, std::string>> inputs;  ///< path, sha256
    std::vector<StageRecord> stages;
};

/// Executes the configured stages, writing every output plus manifest.json (and
/// timings.json, which is excluded from the manifest) into the output directory.
/// A failing stage still leaves an incomplete manifest behind.
RunManifest run(const ExperimentConfig& config);

std::string format_manifest(const RunManifest& manifest, const ExperimentConfig& config);

/// Renders report/ from the outputs found in a run directory: one trajectory
/// plot per learner run, one heatmap per TFD table, and a copy of summary.csv.
std::vector<std::filesystem::path> emit_report(const std::filesystem::path& output_dir);

/// Reads a TFD table written by format_tfd.
TfdMatrix parse_tfd(std::string_view text);

/// Mean and max absolute coupling error per block, as a JSON document.
std::string recovery_json(const std::vector<CouplingSet>& estimates,
                          const std::vector<CouplingSet>& truth, const CausalGraph& graph);

}  // namespace ctwin
