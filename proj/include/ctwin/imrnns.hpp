#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "ctwin/graph.hpp"
#include "ctwin/series.hpp"
#include "ctwin/svar.hpp"

namespace ctwin {

/// How the hidden-layer slope is computed during backpropagation.
enum class SlopeRule {
    /// (1 + X1)(1 - X1) / 2, the derivative of the bipolar sigmoid.
    Exact,
    /// 2 X1 (1 - X1), kept for reproducing the original derivation.
    Legacy,
};

struct NetworkConfig {
    std::size_t hidden_size = 16;
    /// Number of hidden outputs copied into the context layer (<= hidden_size).
    std::size_t context_size = 16;
    std::size_t context_delay = 1;
    double learning_rate = 1e-3;
    double complex_step = 1e-20;
    double weight_init_scale = 1.0;
    std::uint64_t seed = 0;
    /// Exponential smoothing factor for the reported coupling estimate.
    double estimate_smoothing = 0.999;
    /// Running per-channel z-score of the inputs.
    bool normalize = true;
    /// Append y[n-1..n-M] to the network input.
    bool append_raw_lags = false;
    /// Append a constant 1 to the network input.
    bool input_bias = true;
    SlopeRule slope_rule = SlopeRule::Exact;
    /// Keep the per-sample X0..X3, e, E record.
    bool record_trace = false;

    /// Throws ValidationError on out-of-range values.
    void validate() const;
    std::size_t input_size(std::size_t channels, std::size_t lag_order) const;
};

struct NetworkState {
    Eigen::MatrixXd w1;  ///< hidden x input
    Eigen::MatrixXd w2;  ///< outputs x hidden
    /// Delayed hidden outputs, oldest first; front() feeds the next input.
    std::deque<Eigen::VectorXd> context;
    Eigen::VectorXd k_smoothed;
    std::size_t step = 0;
};

NetworkState init_state(const NetworkConfig& config, const ParamLayout& layout);

/// 2 / (1 + exp(-u)) - 1, elementwise.
double bipolar_sigmoid(double u);
Eigen::VectorXd bipolar_sigmoid(const Eigen::VectorXd& u);
/// Slope of the activation expressed through its output X1.
Eigen::VectorXd bipolar_sigmoid_slope(const Eigen::VectorXd& x1, SlopeRule rule);

struct ForwardPass {
    Eigen::VectorXd x1;  ///< hidden outputs
    Eigen::VectorXd x2;  ///< coupling estimates
};

ForwardPass forward(const NetworkState& state, const Eigen::VectorXd& x0);

/// Simulation layer: the one-step causal-graph simulation driven by the
/// network's coupling estimates.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sim_layer(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x2, const Eigen::VectorXd& y_now,
    const LagWindow& lags, const ParamLayout& layout) {
    return simulate_step<Scalar>(unflatten_matrices<Scalar>(x2, layout), y_now, lags);
}

Eigen::VectorXd sim_layer(const Eigen::VectorXd& x2, const Eigen::VectorXd& y_now,
                          const LagWindow& lags, const ParamLayout& layout);

struct SimJacobian {
    Eigen::MatrixXd jacobian;     ///< G x Q, d X3 / d X2
    Eigen::VectorXd contraction;  ///< Q, jacobian^T e
};

/// Complex-step Jacobian of the simulation layer, column j being
/// Im(sim(x2 + i h u_j)) / h.
SimJacobian sim_jacobian(const Eigen::VectorXd& x2, const Eigen::VectorXd& y_now,
                         const LagWindow& lags, const ParamLayout& layout, double step,
                         const Eigen::VectorXd& error);

/// Applies W2 += eta (J^T e) X1^T and W1 += eta (slope .* W2^T J^T e) X0^T.
/// Throws DivergenceError when any weight turns non-finite.
void backprop_update(NetworkState& state, const Eigen::VectorXd& x0, const ForwardPass& pass,
                     const Eigen::VectorXd& contraction, double learning_rate, SlopeRule rule);

/// Pushes the first `context_size` hidden outputs and drops the oldest entry.
void update_context(NetworkState& state, const Eigen::VectorXd& x1, std::size_t context_size);

/// Network input [y_now, context, (lags), (1)].
Eigen::VectorXd build_input(const NetworkState& state, const NetworkConfig& config,
                            const Eigen::VectorXd& y_now, const LagWindow& lags);

struct StepTrace {
    Eigen::VectorXd x0, x1, x2, x3, error;
    double error_norm = 0.0;
};

/// Welford running mean/variance per channel.
class RunningScaler {
public:
    explicit RunningScaler(std::size_t channels = 0);
    void observe(const Eigen::VectorXd& y);
    Eigen::VectorXd apply(const Eigen::VectorXd& y) const;
    Eigen::VectorXd mean() const { return mean_; }
    Eigen::VectorXd stddev() const;

private:
    std::size_t count_ = 0;
    Eigen::VectorXd mean_;
    Eigen::VectorXd m2_;
};

/// Online identity-mapping recurrent learner over a causal-graph simulation layer.
class ImrnnsLearner {
public:
    ImrnnsLearner(const CausalGraph& graph, NetworkConfig config);
    ImrnnsLearner(const CausalGraph& graph, NetworkConfig config, NetworkState initial);

    /// One online update with raw (unnormalized) measurements.
    StepTrace step(const Eigen::VectorXd& y_now, const LagWindow& lags);

    const NetworkState& state() const { return state_; }
    const NetworkConfig& config() const { return config_; }
    const ParamLayout& layout() const { return layout_; }
    const RunningScaler& scaler() const { return scaler_; }
    CouplingSet estimate() const { return unflatten(state_.k_smoothed, layout_); }

private:
    NetworkConfig config_;
    ParamLayout layout_;
    NetworkState state_;
    RunningScaler scaler_;
};

struct TrainResult {
    ParamLayout layout;
    CouplingSet estimate;
    /// Row i is k_smoothed after the update at sample first_sample + i.
    Eigen::MatrixXd trajectory;
    Eigen::VectorXd error_norm;
    std::size_t first_sample = 0;
    NetworkState final_state;
    /// Final running standard deviation per channel (ones without normalization).
    Eigen::VectorXd channel_scale;
    std::vector<StepTrace> trace;
};

TrainResult train_online(const MultichannelSeries& series, const CausalGraph& graph,
                         const NetworkConfig& config,
                         std::optional<NetworkState> initial = std::nullopt);

/// Converts couplings between z-scored channels back to raw units:
/// k_raw(e, c) = k(e, c) * scale(e) / scale(c).
CouplingSet to_raw_units(const CouplingSet& normalized, const Eigen::VectorXd& scale);

}  // namespace ctwin
