#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctwin/errors.hpp"

namespace ctwin {

/// Directed influence of `cause` onto `effect` at a given lag (0 = instantaneous).
/// Node indices are 0-based.
struct LaggedEdge {
    std::size_t cause = 0;
    std::size_t effect = 0;
    std::size_t lag = 0;

    friend bool operator==(const LaggedEdge&, const LaggedEdge&) = default;
};

/// Canonical parameter order: lag-major, then effect, then cause.
bool canonical_less(const LaggedEdge& a, const LaggedEdge& b);

/// Expert-supplied causal graph: node labels, lag order and the directed edge
/// masks for every lag. Construction never rejects content; use validate_graph.
class CausalGraph {
public:
    CausalGraph() = default;
    CausalGraph(std::vector<std::string> labels, std::size_t lag_order,
                std::vector<LaggedEdge> edges);

    std::size_t node_count() const { return labels_.size(); }
    std::size_t lag_order() const { return lag_order_; }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::string& label(std::size_t node) const { return labels_.at(node); }

    /// All edges in canonical order, duplicates removed.
    const std::vector<LaggedEdge>& edges() const { return edges_; }
    std::vector<LaggedEdge> edges_at(std::size_t lag) const;
    bool has_edge(std::size_t cause, std::size_t effect, std::size_t lag) const;
    /// True when (cause, effect) is present at any lag.
    bool has_link(std::size_t cause, std::size_t effect) const;

    /// Resolves a node reference: an exact label, or a 1-based index.
    std::size_t node_index(std::string_view ref) const;

    /// Copy without the given edges (every lag when `lag` is empty).
    CausalGraph without_link(std::size_t cause, std::size_t effect,
                             std::optional<std::size_t> lag = std::nullopt) const;

private:
    std::vector<std::string> labels_;
    std::size_t lag_order_ = 0;
    std::vector<LaggedEdge> edges_;
};

enum class ViolationKind { SelfEdge, Cycle, IndexOutOfRange };

struct Violation {
    ViolationKind kind;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    bool has(ViolationKind kind) const;
};

const char* to_string(ViolationKind kind);

ValidationReport validate_graph(const CausalGraph& graph);

/// Throws ValidationError listing every violation.
void require_valid(const CausalGraph& graph);

/// Kahn ordering over `edges`, smallest ready index first. Empty when cyclic.
std::optional<std::vector<std::size_t>> topological_order(
    std::size_t node_count, const std::vector<LaggedEdge>& edges);

/// Coupling matrices A[0..M]; A[m](e, c) is the coupling from cause c onto
/// effect e at lag m.
class CouplingSet {
public:
    CouplingSet() = default;
    CouplingSet(std::size_t node_count, std::size_t lag_order);
    explicit CouplingSet(std::vector<Eigen::MatrixXd> matrices);

    std::size_t node_count() const { return node_count_; }
    std::size_t lag_order() const { return matrices_.empty() ? 0 : matrices_.size() - 1; }

    const Eigen::MatrixXd& at(std::size_t lag) const { return matrices_.at(lag); }
    Eigen::MatrixXd& at(std::size_t lag) { return matrices_.at(lag); }
    const std::vector<Eigen::MatrixXd>& matrices() const { return matrices_; }

    double operator()(std::size_t lag, std::size_t effect, std::size_t cause) const {
        return matrices_.at(lag)(static_cast<Eigen::Index>(effect),
                                 static_cast<Eigen::Index>(cause));
    }
    double& operator()(std::size_t lag, std::size_t effect, std::size_t cause) {
        return matrices_.at(lag)(static_cast<Eigen::Index>(effect),
                                 static_cast<Eigen::Index>(cause));
    }

    /// Every diagonal entry and every entry outside the graph mask is exactly zero.
    bool respects(const CausalGraph& graph) const;
    bool zero_diagonal() const;

    friend bool operator==(const CouplingSet& a, const CouplingSet& b);

private:
    std::size_t node_count_ = 0;
    std::vector<Eigen::MatrixXd> matrices_;
};

/// Bijection between masked coupling matrices and the flat parameter vector.
class ParamLayout {
public:
    ParamLayout() = default;
    /// Requires a valid graph.
    explicit ParamLayout(const CausalGraph& graph);

    std::size_t size() const { return entries_.size(); }
    std::size_t node_count() const { return node_count_; }
    std::size_t lag_order() const { return lag_order_; }
    const std::vector<LaggedEdge>& entries() const { return entries_; }
    const LaggedEdge& operator[](std::size_t i) const { return entries_[i]; }

    /// Position of an edge in the parameter vector, if present.
    std::optional<std::size_t> index_of(std::size_t cause, std::size_t effect,
                                        std::size_t lag) const;

private:
    std::size_t node_count_ = 0;
    std::size_t lag_order_ = 0;
    std::vector<LaggedEdge> entries_;
};

Eigen::VectorXd flatten(const CouplingSet& couplings, const ParamLayout& layout);
CouplingSet unflatten(const Eigen::VectorXd& params, const ParamLayout& layout);

/// Scalar-generic unflatten used by the simulation layer (complex step).
template <typename Scalar>
std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> unflatten_matrices(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& params, const ParamLayout& layout) {
    if (static_cast<std::size_t>(params.size()) != layout.size()) {
        throw ValidationError("parameter vector length " + std::to_string(params.size()) +
                              " does not match layout size " + std::to_string(layout.size()));
    }
    const auto g = static_cast<Eigen::Index>(layout.node_count());
    std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> out(
        layout.lag_order() + 1,
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(g, g));
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto& p = layout[i];
        out[p.lag](static_cast<Eigen::Index>(p.effect), static_cast<Eigen::Index>(p.cause)) =
            params(static_cast<Eigen::Index>(i));
    }
    return out;
}

/// Graph file: {"nodes": [...], "lag_order": M,
///              "edges": [{"cause": ref, "effect": ref, "lags": [...]}, ...]}
/// where a node reference is a label or a 1-based index.
CausalGraph parse_graph(std::string_view json_text);
std::string dump_graph(const CausalGraph& graph);
CausalGraph load_graph(const std::filesystem::path& path);

/// Human-readable coupling name, e.g. "k1[B1<-B3]".
std::string coupling_name(const CausalGraph& graph, const LaggedEdge& edge);

}  // namespace ctwin
