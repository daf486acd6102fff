#include "ctwin/persist.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <memory>
#include <set>

#include <json.hpp>

#include "ctwin/text_util.hpp"

namespace ctwin {

using ordered_json = nlohmann::ordered_json;

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    auto p = path;
    p += ".json";
    return p;
}

std::string format_couplings(const CouplingSet& couplings, const ParamLayout& layout,
                             const CausalGraph& graph) {
    const Eigen::VectorXd values = flatten(couplings, layout);
    std::string out = "lag,effect,cause,value\n";
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto& p = layout[i];
        out += std::to_string(p.lag) + "," + graph.label(p.effect) + "," + graph.label(p.cause) +
               "," + format_double(values(static_cast<Eigen::Index>(i))) + "\n";
    }
    return out;
}

CouplingSet parse_couplings(std::string_view text, const CausalGraph& graph) {
    CouplingSet out(graph.node_count(), graph.lag_order());
    std::size_t line_no = 0;
    bool header_seen = false;
    for (const auto& raw : split(text, '\n')) {
        ++line_no;
        std::string line = raw;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        if (!header_seen) {
            header_seen = true;
            if (line.rfind("lag,", 0) == 0) continue;
        }
        const auto cells = split(line, ',');
        if (cells.size() != 4)
            throw DataError("coupling row " + std::to_string(line_no) + " needs 4 fields");
        std::size_t lag = 0;
        const auto& lag_text = cells[0];
        auto [ptr, ec] = std::from_chars(lag_text.data(), lag_text.data() + lag_text.size(), lag);
        if (ec != std::errc{} || ptr != lag_text.data() + lag_text.size())
            throw DataError("bad lag '" + lag_text + "' at coupling row " + std::to_string(line_no));
        const auto effect = graph.node_index(cells[1]);
        const auto cause = graph.node_index(cells[2]);
        if (!graph.has_edge(cause, effect, lag))
            throw ValidationError("coupling " + cells[1] + "<-" + cells[2] + " at lag " +
                                  lag_text + " is not an edge of the graph");
        out(lag, effect, cause) = parse_double(cells[3], "coupling value");
    }
    return out;
}

CouplingSet load_couplings(const std::filesystem::path& path, const CausalGraph& graph) {
    return parse_couplings(read_text_file(path), graph);
}

namespace {

ordered_json layout_json(const ParamLayout& layout, const CausalGraph& graph) {
    auto arr = ordered_json::array();
    for (const auto& p : layout.entries())
        arr.push_back({{"lag", p.lag},
                       {"effect", graph.label(p.effect)},
                       {"cause", graph.label(p.cause)},
                       {"name", coupling_name(graph, p)}});
    return arr;
}

}  // namespace

void save_couplings(const std::filesystem::path& path, const CouplingSet& couplings,
                    const CausalGraph& graph, std::string_view metadata_json) {
    const ParamLayout layout(graph);
    write_text_file(path, format_couplings(couplings, layout, graph));
    ordered_json meta = ordered_json::parse(metadata_json);
    meta["layout"] = layout_json(layout, graph);
    write_text_file(sidecar_path(path), meta.dump(2) + "\n");
}

std::string format_trajectory(const TrainResult& result, const CausalGraph& graph) {
    std::string out = "step,E";
    for (const auto& p : result.layout.entries()) out += "," + coupling_name(graph, p);
    out += '\n';
    for (Eigen::Index i = 0; i < result.trajectory.rows(); ++i) {
        out += std::to_string(result.first_sample + static_cast<std::size_t>(i)) + "," +
               format_double(result.error_norm(i));
        for (Eigen::Index j = 0; j < result.trajectory.cols(); ++j)
            out += "," + format_double(result.trajectory(i, j));
        out += '\n';
    }
    return out;
}

std::string network_config_json(const NetworkConfig& c) {
    ordered_json j;
    j["hidden_size"] = c.hidden_size;
    j["context_size"] = c.context_size;
    j["context_delay"] = c.context_delay;
    j["learning_rate"] = c.learning_rate;
    j["complex_step"] = c.complex_step;
    j["weight_init_scale"] = c.weight_init_scale;
    j["seed"] = c.seed;
    j["estimate_smoothing"] = c.estimate_smoothing;
    j["normalize"] = c.normalize;
    j["append_raw_lags"] = c.append_raw_lags;
    j["input_bias"] = c.input_bias;
    j["slope_rule"] = c.slope_rule == SlopeRule::Exact ? "exact" : "legacy";
    return j.dump();
}

NetworkConfig parse_network_config(std::string_view json_text, NetworkConfig c) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
        static const std::set<std::string> known = {
            "hidden_size", "context_size", "context_delay", "learning_rate",
            "complex_step", "weight_init_scale", "seed", "estimate_smoothing",
            "normalize", "append_raw_lags", "input_bias", "slope_rule"};
        for (const auto& item : j.items())
            if (!known.contains(item.key()))
                throw ValidationError("unknown learner option '" + item.key() + "'");
        c.hidden_size = j.value("hidden_size", c.hidden_size);
        c.context_size = j.value("context_size", j.contains("hidden_size") && !j.contains("context_size")
                                                     ? c.hidden_size
                                                     : c.context_size);
        c.context_delay = j.value("context_delay", c.context_delay);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.complex_step = j.value("complex_step", c.complex_step);
        c.weight_init_scale = j.value("weight_init_scale", c.weight_init_scale);
        c.seed = j.value("seed", c.seed);
        c.estimate_smoothing = j.value("estimate_smoothing", c.estimate_smoothing);
        c.normalize = j.value("normalize", c.normalize);
        c.append_raw_lags = j.value("append_raw_lags", c.append_raw_lags);
        c.input_bias = j.value("input_bias", c.input_bias);
        const auto rule = j.value("slope_rule", std::string(c.slope_rule == SlopeRule::Exact ? "exact" : "legacy"));
        if (rule == "exact") c.slope_rule = SlopeRule::Exact;
        else if (rule == "legacy") c.slope_rule = SlopeRule::Legacy;
        else throw ValidationError("slope_rule must be 'exact' or 'legacy'");
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("malformed learner config: ") + ex.what());
    }
    c.validate();
    return c;
}

void save_trajectory(const std::filesystem::path& path, const TrainResult& result,
                     const CausalGraph& graph, const NetworkConfig& config) {
    write_text_file(path, format_trajectory(result, graph));
    ordered_json meta;
    meta["kind"] = "trajectory";
    meta["first_sample"] = result.first_sample;
    meta["steps"] = result.trajectory.rows();
    meta["units"] = config.normalize ? "normalized" : "raw";
    meta["config"] = ordered_json::parse(network_config_json(config));
    meta["layout"] = layout_json(result.layout, graph);
    write_text_file(sidecar_path(path), meta.dump(2) + "\n");
}

std::string sha256_hex(std::string_view bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1)
        throw Error("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) {
    return sha256_hex(read_text_file(path));
}

EdgeRef parse_edge_ref(std::string_view text, const CausalGraph& graph) {
    const auto arrow = text.find("<-");
    if (arrow == std::string_view::npos)
        throw ValidationError("edge reference '" + std::string(text) + "' must look like EFFECT<-CAUSE[@LAG]");
    EdgeRef ref;
    ref.effect = graph.node_index(text.substr(0, arrow));
    auto rest = text.substr(arrow + 2);
    const auto at = rest.find('@');
    ref.cause = graph.node_index(rest.substr(0, at));
    if (at != std::string_view::npos) {
        const auto lag_text = rest.substr(at + 1);
        std::size_t lag = 0;
        auto [ptr, ec] = std::from_chars(lag_text.data(), lag_text.data() + lag_text.size(), lag);
        if (ec != std::errc{} || ptr != lag_text.data() + lag_text.size())
            throw ValidationError("bad lag in edge reference '" + std::string(text) + "'");
        ref.lag = lag;
    }
    return ref;
}

}  // namespace ctwin
