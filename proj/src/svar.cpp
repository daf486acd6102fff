#include "ctwin/svar.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace ctwin {

LagWindow lag_window(const MultichannelSeries& series, std::size_t n, std::size_t lag_order) {
    if (n < lag_order) throw ValidationError("not enough history for the lag window");
    LagWindow lags;
    lags.reserve(lag_order);
    for (std::size_t m = 1; m <= lag_order; ++m) lags.push_back(series.row(n - m));
    return lags;
}

Eigen::VectorXd simulate_step(const CouplingSet& couplings, const Eigen::VectorXd& y_now,
                              const LagWindow& lags) {
    return simulate_step<double>(couplings.matrices(), y_now, lags);
}

const char* to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::Gaussian: return "gaussian";
        case NoiseKind::Laplace: return "laplace";
        case NoiseKind::Uniform: return "uniform";
    }
    return "unknown";
}

NoiseKind parse_noise_kind(std::string_view name) {
    if (name == "gaussian") return NoiseKind::Gaussian;
    if (name == "laplace") return NoiseKind::Laplace;
    if (name == "uniform") return NoiseKind::Uniform;
    throw ValidationError("unknown noise kind '" + std::string(name) + "'");
}

Eigen::MatrixXd noise_realization(const NoiseSpec& noise, std::size_t rows,
                                  std::size_t channels) {
    if (static_cast<std::size_t>(noise.scale.size()) != channels)
        throw ValidationError("noise scale needs one entry per channel");
    for (Eigen::Index c = 0; c < noise.scale.size(); ++c)
        if (!(noise.scale(c) >= 0.0) || !std::isfinite(noise.scale(c)))
            throw ValidationError("noise scales must be finite and non-negative");

    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto open_unit = [&] {
        double u = 0.0;
        while (u == 0.0) u = unit(rng);
        return u;
    };

    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(channels));
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        for (Eigen::Index c = 0; c < out.cols(); ++c) {
            const double sd = noise.scale(c);
            double draw = 0.0;
            switch (noise.kind) {
                case NoiseKind::Gaussian: draw = normal(rng); break;
                case NoiseKind::Laplace: {
                    // unit-variance Laplace by inverse CDF
                    const double u = open_unit();
                    const double b = 1.0 / std::sqrt(2.0);
                    draw = u < 0.5 ? b * std::log(2.0 * u) : -b * std::log(2.0 * (1.0 - u));
                    break;
                }
                case NoiseKind::Uniform: draw = (2.0 * unit(rng) - 1.0) * std::sqrt(3.0); break;
            }
            out(r, c) = sd * draw;
        }
    }
    return out;
}

namespace {

std::vector<LaggedEdge> instantaneous_pattern(const Eigen::MatrixXd& a0) {
    std::vector<LaggedEdge> edges;
    for (Eigen::Index e = 0; e < a0.rows(); ++e)
        for (Eigen::Index c = 0; c < a0.cols(); ++c)
            if (e != c && a0(e, c) != 0.0)
                edges.push_back({static_cast<std::size_t>(c), static_cast<std::size_t>(e), 0});
    return edges;
}

/// Solves (I - A0) X = rhs in place.
void structural_solve(const Eigen::MatrixXd& a0, Eigen::MatrixXd& rhs) {
    const auto g = static_cast<std::size_t>(a0.rows());
    if (auto order = topological_order(g, instantaneous_pattern(a0))) {
        for (auto e : *order) {
            const auto ei = static_cast<Eigen::Index>(e);
            for (Eigen::Index c = 0; c < a0.cols(); ++c)
                if (c != ei && a0(ei, c) != 0.0) rhs.row(ei) += a0(ei, c) * rhs.row(c);
        }
        return;
    }
    const Eigen::MatrixXd structural = Eigen::MatrixXd::Identity(a0.rows(), a0.cols()) - a0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(structural);
    if (!lu.isInvertible()) throw Error("structural matrix I - A0 is singular");
    rhs = lu.solve(rhs);
}

}  // namespace

double companion_spectral_radius(const CouplingSet& couplings) {
    const auto lag_order = couplings.lag_order();
    const auto g = static_cast<Eigen::Index>(couplings.node_count());
    if (lag_order == 0 || g == 0) return 0.0;
    const auto dim = g * static_cast<Eigen::Index>(lag_order);

    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t m = 1; m <= lag_order; ++m) {
        Eigen::MatrixXd reduced = couplings.at(m);
        structural_solve(couplings.at(0), reduced);
        companion.block(0, g * static_cast<Eigen::Index>(m - 1), g, g) = reduced;
    }
    if (lag_order > 1)
        companion.block(g, 0, dim - g, dim - g).setIdentity();

    // Gelfand's formula by repeated squaring: rho = lim ||C^(2^k)||^(1/2^k).
    // Plain vector power iteration stalls on complex-conjugate dominant pairs.
    double log_scale = 0.0;  // log of the accumulated normalization of C^(2^k)
    Eigen::MatrixXd power = companion;
    double weight = 1.0;     // 2^-k
    constexpr int kSquarings = 60;
    for (int k = 0; k <= kSquarings; ++k) {
        const double norm = power.cwiseAbs().rowwise().sum().maxCoeff();
        if (norm == 0.0) return 0.0;
        log_scale += weight * std::log(norm);
        if (k == kSquarings) break;
        power /= norm;
        power = (power * power).eval();
        weight *= 0.5;
    }
    return std::exp(log_scale);
}

std::size_t default_burn_in(const CausalGraph& graph) {
    return 10 * graph.lag_order() * graph.node_count();
}

MultichannelSeries generate_series(const CausalGraph& graph, const CouplingSet& couplings,
                                   const NoiseSpec& noise, std::size_t n_samples,
                                   const GenerateOptions& options) {
    require_valid(graph);
    if (!couplings.respects(graph))
        throw ValidationError("coupling set does not respect the causal graph mask");
    if (n_samples == 0) throw ValidationError("n_samples must be positive");
    const double radius = companion_spectral_radius(couplings);
    if (radius >= kStabilityLimit)
        throw ValidationError("unstable coupling set: companion spectral radius " +
                              std::to_string(radius) + " >= " + std::to_string(kStabilityLimit));

    const auto g = graph.node_count();
    const auto lag_order = graph.lag_order();
    const auto burn_in = options.burn_in.value_or(default_burn_in(graph));
    const auto total = burn_in + n_samples;
    Eigen::MatrixXd y = noise_realization(noise, total, g);
    if (options.excitation)
        for (std::size_t n = 0; n < total; ++n)
            for (std::size_t c = 0; c < g; ++c)
                y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c)) +=
                    options.excitation(n, c);

    const auto order = topological_order(g, graph.edges_at(0));
    if (!order) throw Error("instantaneous edges are cyclic after validation");
    const auto& a0 = couplings.at(0);

    Eigen::VectorXd current(static_cast<Eigen::Index>(g));
    for (std::size_t n = 0; n < total; ++n) {
        const auto row = static_cast<Eigen::Index>(n);
        Eigen::VectorXd driven = y.row(row).transpose();
        for (std::size_t m = 1; m <= lag_order && m <= n; ++m)
            driven += couplings.at(m) * y.row(row - static_cast<Eigen::Index>(m)).transpose();
        current.setZero();
        for (auto e : *order) {
            const auto ei = static_cast<Eigen::Index>(e);
            current(ei) = driven(ei) + a0.row(ei).dot(current);
        }
        y.row(row) = current.transpose();
    }
    Eigen::MatrixXd kept = y.bottomRows(static_cast<Eigen::Index>(n_samples));
    return MultichannelSeries(std::move(kept), options.sample_rate, graph.labels());
}

MultichannelSeries whatif_run(const CouplingSet& couplings, const MultichannelSeries& driver,
                              const std::vector<std::size_t>& targets,
                              const WhatIfOptions& options) {
    const auto g = couplings.node_count();
    const auto lag_order = couplings.lag_order();
    if (driver.channels() != g)
        throw ValidationError("driver has " + std::to_string(driver.channels()) +
                              " channels, couplings expect " + std::to_string(g));
    if (driver.samples() <= lag_order)
        throw ValidationError("driver is shorter than the lag order");
    if (targets.empty()) throw ValidationError("what-if run needs at least one target node");

    std::vector<bool> is_target(g, false);
    for (auto t : targets) {
        if (t >= g) throw ValidationError("target node index out of range");
        is_target[t] = true;
    }
    // instantaneous dependencies among targets decide the evaluation order
    std::vector<LaggedEdge> target_edges;
    const auto& a0 = couplings.at(0);
    for (std::size_t e = 0; e < g; ++e)
        for (std::size_t c = 0; c < g; ++c)
            if (e != c && is_target[e] && is_target[c] &&
                a0(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(c)) != 0.0)
                target_edges.push_back({c, e, 0});
    const auto order = topological_order(g, target_edges);
    if (!order)
        throw ValidationError("target nodes depend on each other instantaneously in a cycle");

    Eigen::MatrixXd out = driver.data();
    for (std::size_t n = lag_order; n < driver.samples(); ++n) {
        const auto row = static_cast<Eigen::Index>(n);
        LagWindow lags;
        for (std::size_t m = 1; m <= lag_order; ++m) {
            const auto past = row - static_cast<Eigen::Index>(m);
            lags.push_back(options.closed_loop ? Eigen::VectorXd(out.row(past).transpose())
                                               : driver.row(n - m));
        }
        Eigen::VectorXd y_now = driver.row(n);
        for (auto e : *order) {
            if (!is_target[e]) continue;
            const auto ei = static_cast<Eigen::Index>(e);
            y_now(ei) = simulate_step(couplings, y_now, lags)(ei);
        }
        out.row(row) = y_now.transpose();
    }
    return MultichannelSeries(std::move(out), driver.sample_rate(), driver.labels());
}

CouplingSet counterfactual_remove(const CouplingSet& couplings, const CausalGraph& graph,
                                  const std::vector<Removal>& removals) {
    const auto g = graph.node_count();
    if (couplings.node_count() != g || couplings.lag_order() != graph.lag_order())
        throw ValidationError("coupling set does not match the causal graph");
    CouplingSet out = couplings;
    for (const auto& r : removals) {
        if (r.cause >= g) throw ValidationError("counterfactual names an unknown node");
        if (r.lag && *r.lag > graph.lag_order())
            throw ValidationError("counterfactual lag exceeds the lag order");
        if (r.effect) {
            if (*r.effect >= g) throw ValidationError("counterfactual names an unknown node");
            const bool known = r.lag ? graph.has_edge(r.cause, *r.effect, *r.lag)
                                     : graph.has_link(r.cause, *r.effect);
            if (!known)
                throw ValidationError("counterfactual edge " + graph.label(r.cause) + " -> " +
                                      graph.label(*r.effect) + " is not in the graph");
        }
        for (std::size_t m = 0; m <= graph.lag_order(); ++m) {
            if (r.lag && *r.lag != m) continue;
            for (std::size_t e = 0; e < g; ++e)
                if (!r.effect || *r.effect == e) out(m, e, r.cause) = 0.0;
        }
    }
    return out;
}

}  // namespace ctwin
