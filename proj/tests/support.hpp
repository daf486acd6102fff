#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>

#include "ctwin/pipeline.hpp"
#include "ctwin/text_util.hpp"

namespace testing_support {

using namespace ctwin;

// Random DAG on lag 0 (edges only from higher to lower index under a random
// permutation) plus random lagged edges, no self-edges. Always at least one edge.
inline CausalGraph random_graph(std::mt19937_64& rng, std::size_t g, std::size_t m,
                                double density = 0.5) {
    std::vector<std::size_t> perm(g);
    for (std::size_t i = 0; i < g; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::bernoulli_distribution keep(density);
    std::vector<LaggedEdge> edges;
    for (std::size_t lag = 0; lag <= m; ++lag)
        for (std::size_t a = 0; a < g; ++a)
            for (std::size_t b = 0; b < g; ++b) {
                if (a == b) continue;
                if (lag == 0 && a <= b) continue;
                if (keep(rng)) edges.push_back({perm[a], perm[b], lag});
            }
    if (edges.empty()) edges.push_back({perm[1], perm[0], 0});
    return CausalGraph(default_labels(g), m, edges);
}

// Masked couplings uniform in (-amp, amp), shrunk until the companion radius
// drops below `radius`.
inline CouplingSet random_couplings(std::mt19937_64& rng, const CausalGraph& graph,
                                    double amp = 0.6, double radius = 0.9) {
    std::uniform_real_distribution<double> u(-amp, amp);
    CouplingSet k(graph.node_count(), graph.lag_order());
    for (const auto& e : graph.edges()) k(e.lag, e.effect, e.cause) = u(rng);
    while (companion_spectral_radius(k) >= radius) {
        for (std::size_t m = 0; m <= graph.lag_order(); ++m) k.at(m) *= 0.8;
    }
    return k;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double amp = 1.0) {
    std::uniform_real_distribution<double> u(-amp, amp);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
    return v;
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c,
                                     double amp = 1.0) {
    std::uniform_real_distribution<double> u(-amp, amp);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
    return m;
}

inline LagWindow random_lags(std::mt19937_64& rng, std::size_t g, std::size_t m) {
    LagWindow lags;
    for (std::size_t i = 0; i < m; ++i) lags.push_back(random_vector(rng, static_cast<Eigen::Index>(g)));
    return lags;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("ctwin_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

private:
    std::filesystem::path path_;
};

}  // namespace testing_support
