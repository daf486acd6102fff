#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "ctwin/graph.hpp"
#include "ctwin/imrnns.hpp"

namespace ctwin {

/// Coupling table: header `lag,effect,cause,value`, one row per layout entry,
/// node labels as in the graph.
std::string format_couplings(const CouplingSet& couplings, const ParamLayout& layout,
                             const CausalGraph& graph);
/// Rows may come in any order; edges not listed stay zero. Unknown edges and
/// edges outside the graph are rejected.
CouplingSet parse_couplings(std::string_view text, const CausalGraph& graph);
CouplingSet load_couplings(const std::filesystem::path& path, const CausalGraph& graph);

/// Writes `<path>` and the JSON sidecar `<path>.json`. `metadata` must be a JSON
/// object (as text); the layout is added to it.
void save_couplings(const std::filesystem::path& path, const CouplingSet& couplings,
                    const CausalGraph& graph, std::string_view metadata_json = "{}");

/// Trajectory table: `step,E,<coupling names...>`, one row per learner step.
std::string format_trajectory(const TrainResult& result, const CausalGraph& graph);
void save_trajectory(const std::filesystem::path& path, const TrainResult& result,
                     const CausalGraph& graph, const NetworkConfig& config);

std::string network_config_json(const NetworkConfig& config);
NetworkConfig parse_network_config(std::string_view json_text, NetworkConfig defaults = {});

std::filesystem::path sidecar_path(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Parses "EFFECT<-CAUSE", "EFFECT<-CAUSE@LAG" against the graph.
struct EdgeRef {
    std::size_t cause = 0;
    std::size_t effect = 0;
    std::optional<std::size_t> lag;
};
EdgeRef parse_edge_ref(std::string_view text, const CausalGraph& graph);

}  // namespace ctwin
