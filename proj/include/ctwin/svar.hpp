#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ctwin/errors.hpp"
#include "ctwin/graph.hpp"
#include "ctwin/series.hpp"

namespace ctwin {

/// Past samples [y[n-1], ..., y[n-M]].
using LagWindow = std::vector<Eigen::VectorXd>;

LagWindow lag_window(const MultichannelSeries& series, std::size_t n, std::size_t lag_order);

/// One-step causal-graph simulation
///   y_hat = A[0] y_now + sum_m A[m] lags[m-1].
/// Generic in the coupling scalar so the simulation layer can be evaluated
/// with complex-valued parameters.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> simulate_step(
    const std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>& couplings,
    const Eigen::VectorXd& y_now, const LagWindow& lags) {
    if (couplings.empty()) throw ValidationError("simulate_step needs at least A[0]");
    const auto g = couplings.front().rows();
    if (y_now.size() != g) throw ValidationError("y_now length does not match coupling size");
    if (lags.size() + 1 != couplings.size())
        throw ValidationError("lag window length does not match lag order");
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out = couplings[0] * y_now.cast<Scalar>();
    for (std::size_t m = 1; m < couplings.size(); ++m) {
        if (lags[m - 1].size() != g) throw ValidationError("lag vector has wrong length");
        out += couplings[m] * lags[m - 1].cast<Scalar>();
    }
    return out;
}

Eigen::VectorXd simulate_step(const CouplingSet& couplings, const Eigen::VectorXd& y_now,
                              const LagWindow& lags);

enum class NoiseKind { Gaussian, Laplace, Uniform };

const char* to_string(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view name);

/// Innovation process. `scale` holds the per-channel standard deviation; a zero
/// entry silences that channel.
struct NoiseSpec {
    NoiseKind kind = NoiseKind::Laplace;
    Eigen::VectorXd scale;
    std::uint64_t seed = 0;
};

/// rows x G innovations, a deterministic function of the spec.
Eigen::MatrixXd noise_realization(const NoiseSpec& noise, std::size_t rows, std::size_t channels);

/// Spectral radius of the companion matrix of the reduced-form VAR
/// B[m] = (I - A[0])^-1 A[m]. Zero when there are no lags.
double companion_spectral_radius(const CouplingSet& couplings);

inline constexpr double kStabilityLimit = 0.999;

struct GenerateOptions {
    /// Defaults to 10 * M * G.
    std::optional<std::size_t> burn_in;
    /// Deterministic input added to the innovations; called with the absolute
    /// sample index (burn-in included) and the channel.
    std::function<double(std::size_t, std::size_t)> excitation;
    double sample_rate = 0.0;
};

std::size_t default_burn_in(const CausalGraph& graph);

/// Draws y[n] = (I - A[0])^-1 (sum_m A[m] y[n-m] + e[n]) from zero initial
/// history and drops the burn-in prefix.
MultichannelSeries generate_series(const CausalGraph& graph, const CouplingSet& couplings,
                                   const NoiseSpec& noise, std::size_t n_samples,
                                   const GenerateOptions& options = {});

struct WhatIfOptions {
    /// Feed simulated target values back into the lag terms.
    bool closed_loop = false;
};

/// Replaces the target channels of `driver` with the one-step simulation under
/// `couplings`; every other channel is copied from the driver. The first M
/// samples keep their driver values.
MultichannelSeries whatif_run(const CouplingSet& couplings, const MultichannelSeries& driver,
                              const std::vector<std::size_t>& targets,
                              const WhatIfOptions& options = {});

/// Selects couplings to zero: the influence of `cause` on `effect` (or on every
/// node when `effect` is empty), at one lag or at all lags.
struct Removal {
    std::size_t cause = 0;
    std::optional<std::size_t> effect;
    std::optional<std::size_t> lag;
};

CouplingSet counterfactual_remove(const CouplingSet& couplings, const CausalGraph& graph,
                                  const std::vector<Removal>& removals);

}  // namespace ctwin
