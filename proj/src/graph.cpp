#include "ctwin/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <queue>
#include <sstream>

#include <json.hpp>

namespace ctwin {

bool canonical_less(const LaggedEdge& a, const LaggedEdge& b) {
    if (a.lag != b.lag) return a.lag < b.lag;
    if (a.effect != b.effect) return a.effect < b.effect;
    return a.cause < b.cause;
}

CausalGraph::CausalGraph(std::vector<std::string> labels, std::size_t lag_order,
                         std::vector<LaggedEdge> edges)
    : labels_(std::move(labels)), lag_order_(lag_order), edges_(std::move(edges)) {
    std::sort(edges_.begin(), edges_.end(), canonical_less);
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

std::vector<LaggedEdge> CausalGraph::edges_at(std::size_t lag) const {
    std::vector<LaggedEdge> out;
    for (const auto& e : edges_)
        if (e.lag == lag) out.push_back(e);
    return out;
}

bool CausalGraph::has_edge(std::size_t cause, std::size_t effect, std::size_t lag) const {
    return std::binary_search(edges_.begin(), edges_.end(), LaggedEdge{cause, effect, lag},
                              canonical_less);
}

bool CausalGraph::has_link(std::size_t cause, std::size_t effect) const {
    return std::any_of(edges_.begin(), edges_.end(), [&](const LaggedEdge& e) {
        return e.cause == cause && e.effect == effect;
    });
}

std::size_t CausalGraph::node_index(std::string_view ref) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
        if (labels_[i] == ref) return i;
    std::size_t one_based = 0;
    const auto* end = ref.data() + ref.size();
    auto [ptr, ec] = std::from_chars(ref.data(), end, one_based);
    if (ec == std::errc{} && ptr == end && one_based >= 1 && one_based <= labels_.size())
        return one_based - 1;
    throw ValidationError("unknown node '" + std::string(ref) + "'");
}

CausalGraph CausalGraph::without_link(std::size_t cause, std::size_t effect,
                                      std::optional<std::size_t> lag) const {
    std::vector<LaggedEdge> kept;
    for (const auto& e : edges_) {
        const bool hit = e.cause == cause && e.effect == effect && (!lag || e.lag == *lag);
        if (!hit) kept.push_back(e);
    }
    return CausalGraph(labels_, lag_order_, std::move(kept));
}

bool ValidationReport::has(ViolationKind kind) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.kind == kind; });
}

const char* to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::SelfEdge: return "self-edge";
        case ViolationKind::Cycle: return "cycle";
        case ViolationKind::IndexOutOfRange: return "index out of range";
    }
    return "unknown";
}

std::optional<std::vector<std::size_t>> topological_order(
    std::size_t node_count, const std::vector<LaggedEdge>& edges) {
    std::vector<std::vector<std::size_t>> children(node_count);
    std::vector<std::size_t> indegree(node_count, 0);
    for (const auto& e : edges) {
        if (e.cause >= node_count || e.effect >= node_count) return std::nullopt;
        children[e.cause].push_back(e.effect);
        ++indegree[e.effect];
    }
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t i = 0; i < node_count; ++i)
        if (indegree[i] == 0) ready.push(i);
    std::vector<std::size_t> order;
    order.reserve(node_count);
    while (!ready.empty()) {
        const auto n = ready.top();
        ready.pop();
        order.push_back(n);
        for (auto child : children[n])
            if (--indegree[child] == 0) ready.push(child);
    }
    if (order.size() != node_count) return std::nullopt;
    return order;
}

ValidationReport validate_graph(const CausalGraph& graph) {
    ValidationReport report;
    const auto g = graph.node_count();
    auto name = [&](std::size_t i) {
        return i < g ? graph.label(i) : "#" + std::to_string(i + 1);
    };
    if (g == 0)
        report.violations.push_back({ViolationKind::IndexOutOfRange, "graph has no nodes"});

    std::vector<LaggedEdge> instantaneous;
    for (const auto& e : graph.edges()) {
        const auto where = " (" + name(e.cause) + " -> " + name(e.effect) + ", lag " +
                           std::to_string(e.lag) + ")";
        if (e.cause >= g || e.effect >= g) {
            report.violations.push_back(
                {ViolationKind::IndexOutOfRange, "node index out of range" + where});
            continue;
        }
        if (e.lag > graph.lag_order()) {
            report.violations.push_back(
                {ViolationKind::IndexOutOfRange, "lag exceeds lag_order" + where});
            continue;
        }
        if (e.cause == e.effect) {
            report.violations.push_back({ViolationKind::SelfEdge, "self-edge" + where});
            continue;
        }
        if (e.lag == 0) instantaneous.push_back(e);
    }
    if (g > 0 && !topological_order(g, instantaneous)) {
        report.violations.push_back(
            {ViolationKind::Cycle, "cycle among instantaneous edges"});
    }
    return report;
}

void require_valid(const CausalGraph& graph) {
    const auto report = validate_graph(graph);
    if (report.ok()) return;
    std::string msg = "invalid causal graph:";
    for (const auto& v : report.violations) msg += "\n  " + v.message;
    throw ValidationError(msg);
}

CouplingSet::CouplingSet(std::size_t node_count, std::size_t lag_order)
    : node_count_(node_count),
      matrices_(lag_order + 1, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(node_count),
                                                     static_cast<Eigen::Index>(node_count))) {}

CouplingSet::CouplingSet(std::vector<Eigen::MatrixXd> matrices) : matrices_(std::move(matrices)) {
    if (matrices_.empty()) throw ValidationError("coupling set needs at least A[0]");
    node_count_ = static_cast<std::size_t>(matrices_.front().rows());
    for (const auto& a : matrices_) {
        if (static_cast<std::size_t>(a.rows()) != node_count_ ||
            static_cast<std::size_t>(a.cols()) != node_count_)
            throw ValidationError("coupling matrices must all be square and equally sized");
    }
}

bool CouplingSet::zero_diagonal() const {
    for (const auto& a : matrices_)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            if (a(i, i) != 0.0) return false;
    return true;
}

bool CouplingSet::respects(const CausalGraph& graph) const {
    if (node_count_ != graph.node_count() || lag_order() != graph.lag_order()) return false;
    for (std::size_t m = 0; m < matrices_.size(); ++m)
        for (std::size_t e = 0; e < node_count_; ++e)
            for (std::size_t c = 0; c < node_count_; ++c)
                if ((*this)(m, e, c) != 0.0 && (e == c || !graph.has_edge(c, e, m)))
                    return false;
    return true;
}

bool operator==(const CouplingSet& a, const CouplingSet& b) {
    if (a.matrices_.size() != b.matrices_.size() || a.node_count_ != b.node_count_)
        return false;
    for (std::size_t m = 0; m < a.matrices_.size(); ++m)
        if (a.matrices_[m] != b.matrices_[m]) return false;
    return true;
}

ParamLayout::ParamLayout(const CausalGraph& graph)
    : node_count_(graph.node_count()), lag_order_(graph.lag_order()), entries_(graph.edges()) {
    require_valid(graph);
    if (entries_.empty()) throw ValidationError("causal graph has no edges to estimate");
}

std::optional<std::size_t> ParamLayout::index_of(std::size_t cause, std::size_t effect,
                                                 std::size_t lag) const {
    const LaggedEdge key{cause, effect, lag};
    auto it = std::lower_bound(entries_.begin(), entries_.end(), key, canonical_less);
    if (it == entries_.end() || !(*it == key)) return std::nullopt;
    return static_cast<std::size_t>(it - entries_.begin());
}

Eigen::VectorXd flatten(const CouplingSet& couplings, const ParamLayout& layout) {
    if (couplings.node_count() != layout.node_count() ||
        couplings.lag_order() != layout.lag_order())
        throw ValidationError("coupling set dimensions do not match the parameter layout");
    Eigen::VectorXd out(static_cast<Eigen::Index>(layout.size()));
    std::size_t nonzero_in_layout = 0;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto& p = layout[i];
        out(static_cast<Eigen::Index>(i)) = couplings(p.lag, p.effect, p.cause);
        if (out(static_cast<Eigen::Index>(i)) != 0.0) ++nonzero_in_layout;
    }
    std::size_t nonzero_total = 0;
    for (const auto& a : couplings.matrices())
        nonzero_total += static_cast<std::size_t>((a.array() != 0.0).count());
    if (nonzero_total != nonzero_in_layout)
        throw ValidationError("coupling set has nonzero entries outside the graph mask");
    return out;
}

CouplingSet unflatten(const Eigen::VectorXd& params, const ParamLayout& layout) {
    return CouplingSet(unflatten_matrices<double>(params, layout));
}

namespace {

std::size_t resolve_ref(const nlohmann::json& ref, const std::vector<std::string>& labels) {
    if (ref.is_number_integer()) {
        const auto v = ref.get<long long>();
        if (v < 1) throw ValidationError("node indices in graph files are 1-based");
        return static_cast<std::size_t>(v - 1);
    }
    if (ref.is_string()) {
        const auto s = ref.get<std::string>();
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == s) return i;
        throw ValidationError("edge references unknown node '" + s + "'");
    }
    throw ValidationError("node reference must be a label or a 1-based index");
}

}  // namespace

CausalGraph parse_graph(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("graph file is not valid JSON: ") + ex.what());
    }
    try {
        std::vector<std::string> labels;
        const auto& nodes = doc.at("nodes");
        if (nodes.is_number_integer()) {
            const auto n = nodes.get<std::size_t>();
            for (std::size_t i = 0; i < n; ++i) labels.push_back("B" + std::to_string(i + 1));
        } else {
            labels = nodes.get<std::vector<std::string>>();
        }
        const auto lag_order = doc.value("lag_order", std::size_t{0});
        std::vector<LaggedEdge> edges;
        for (const auto& e : doc.value("edges", nlohmann::json::array())) {
            const auto cause = resolve_ref(e.at("cause"), labels);
            const auto effect = resolve_ref(e.at("effect"), labels);
            const auto lags = e.value("lags", std::vector<std::size_t>{0});
            for (auto m : lags) edges.push_back({cause, effect, m});
        }
        return CausalGraph(std::move(labels), lag_order, std::move(edges));
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("malformed graph file: ") + ex.what());
    }
}

std::string dump_graph(const CausalGraph& graph) {
    nlohmann::ordered_json doc;
    doc["nodes"] = graph.labels();
    doc["lag_order"] = graph.lag_order();
    // one entry per (cause, effect) pair, lags collected in ascending order
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& e : graph.edges()) {
        std::pair<std::size_t, std::size_t> key{e.effect, e.cause};
        if (std::find(pairs.begin(), pairs.end(), key) == pairs.end()) pairs.push_back(key);
    }
    std::sort(pairs.begin(), pairs.end());
    auto edges = nlohmann::ordered_json::array();
    for (const auto& [effect, cause] : pairs) {
        std::vector<std::size_t> lags;
        for (const auto& e : graph.edges())
            if (e.cause == cause && e.effect == effect) lags.push_back(e.lag);
        std::sort(lags.begin(), lags.end());
        nlohmann::ordered_json item;
        item["cause"] = cause < graph.node_count() ? nlohmann::ordered_json(graph.label(cause))
                                                   : nlohmann::ordered_json(cause + 1);
        item["effect"] = effect < graph.node_count()
                             ? nlohmann::ordered_json(graph.label(effect))
                             : nlohmann::ordered_json(effect + 1);
        item["lags"] = lags;
        edges.push_back(item);
    }
    doc["edges"] = edges;
    return doc.dump(2) + "\n";
}

CausalGraph load_graph(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open graph file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_graph(buffer.str());
}

std::string coupling_name(const CausalGraph& graph, const LaggedEdge& edge) {
    return "k" + std::to_string(edge.lag) + "[" + graph.label(edge.effect) + "<-" +
           graph.label(edge.cause) + "]";
}

}  // namespace ctwin
