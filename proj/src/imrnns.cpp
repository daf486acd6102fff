#include "ctwin/imrnns.hpp"

#include <cmath>
#include <random>
#include <string>

namespace ctwin {

void NetworkConfig::validate() const {
    if (hidden_size == 0) throw ValidationError("hidden_size must be positive");
    if (context_size > hidden_size)
        throw ValidationError("context_size cannot exceed hidden_size");
    if (context_size > 0 && context_delay == 0)
        throw ValidationError("context_delay must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ValidationError("learning_rate must be positive");
    if (!(complex_step > 0.0) || !std::isfinite(complex_step))
        throw ValidationError("complex_step must be positive");
    if (!(weight_init_scale >= 0.0) || !std::isfinite(weight_init_scale))
        throw ValidationError("weight_init_scale must be non-negative");
    if (!(estimate_smoothing >= 0.0 && estimate_smoothing < 1.0))
        throw ValidationError("estimate_smoothing must lie in [0, 1)");
}

std::size_t NetworkConfig::input_size(std::size_t channels, std::size_t lag_order) const {
    return channels + context_size + (append_raw_lags ? channels * lag_order : 0) +
           (input_bias ? 1 : 0);
}

NetworkState init_state(const NetworkConfig& config, const ParamLayout& layout) {
    config.validate();
    const auto inputs = static_cast<Eigen::Index>(
        config.input_size(layout.node_count(), layout.lag_order()));
    const auto hidden = static_cast<Eigen::Index>(config.hidden_size);
    const auto outputs = static_cast<Eigen::Index>(layout.size());

    std::mt19937_64 rng(config.seed);
    auto fill = [&](Eigen::MatrixXd& w, Eigen::Index fan_in) {
        const double s = config.weight_init_scale / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-s, s);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = s > 0.0 ? dist(rng) : 0.0;
    };

    NetworkState state;
    state.w1.resize(hidden, inputs);
    state.w2.resize(outputs, hidden);
    fill(state.w1, inputs);
    fill(state.w2, hidden);
    if (config.context_size > 0)
        state.context.assign(config.context_delay,
                             Eigen::VectorXd::Zero(static_cast<Eigen::Index>(config.context_size)));
    state.k_smoothed = Eigen::VectorXd::Zero(outputs);
    return state;
}

// 2 / (1 + exp(-u)) - 1 == tanh(u / 2); the tanh form keeps the odd symmetry exact
double bipolar_sigmoid(double u) { return std::tanh(0.5 * u); }

Eigen::VectorXd bipolar_sigmoid(const Eigen::VectorXd& u) {
    return u.unaryExpr([](double v) { return bipolar_sigmoid(v); });
}

Eigen::VectorXd bipolar_sigmoid_slope(const Eigen::VectorXd& x1, SlopeRule rule) {
    const Eigen::ArrayXd a = x1.array();
    if (rule == SlopeRule::Legacy) return (2.0 * a * (1.0 - a)).matrix();
    return ((1.0 + a) * (1.0 - a) * 0.5).matrix();
}

ForwardPass forward(const NetworkState& state, const Eigen::VectorXd& x0) {
    if (x0.size() != state.w1.cols())
        throw ValidationError("network input has length " + std::to_string(x0.size()) +
                              ", expected " + std::to_string(state.w1.cols()));
    ForwardPass pass;
    pass.x1 = bipolar_sigmoid(state.w1 * x0);
    pass.x2 = state.w2 * pass.x1;
    return pass;
}

Eigen::VectorXd sim_layer(const Eigen::VectorXd& x2, const Eigen::VectorXd& y_now,
                          const LagWindow& lags, const ParamLayout& layout) {
    return sim_layer<double>(x2, y_now, lags, layout);
}

SimJacobian sim_jacobian(const Eigen::VectorXd& x2, const Eigen::VectorXd& y_now,
                         const LagWindow& lags, const ParamLayout& layout, double step,
                         const Eigen::VectorXd& error) {
    using Complex = std::complex<double>;
    const auto q = x2.size();
    const auto g = static_cast<Eigen::Index>(layout.node_count());
    if (error.size() != g) throw ValidationError("error vector length does not match G");

    SimJacobian out;
    out.jacobian.resize(g, q);
    Eigen::VectorXcd perturbed = x2.cast<Complex>();
    for (Eigen::Index j = 0; j < q; ++j) {
        perturbed(j) += Complex(0.0, step);
        const Eigen::VectorXcd x3 = sim_layer<Complex>(perturbed, y_now, lags, layout);
        out.jacobian.col(j) = x3.imag() / step;
        perturbed(j) = Complex(x2(j), 0.0);
    }
    out.contraction = out.jacobian.transpose() * error;
    return out;
}

void backprop_update(NetworkState& state, const Eigen::VectorXd& x0, const ForwardPass& pass,
                     const Eigen::VectorXd& contraction, double learning_rate, SlopeRule rule) {
    const Eigen::VectorXd hidden_signal =
        bipolar_sigmoid_slope(pass.x1, rule).cwiseProduct(state.w2.transpose() * contraction);
    state.w2.noalias() += learning_rate * contraction * pass.x1.transpose();
    state.w1.noalias() += learning_rate * hidden_signal * x0.transpose();
    if (!state.w1.allFinite() || !state.w2.allFinite())
        throw DivergenceError("network weights became non-finite at step " +
                                  std::to_string(state.step),
                              state.step);
}

void update_context(NetworkState& state, const Eigen::VectorXd& x1, std::size_t context_size) {
    if (context_size == 0 || state.context.empty()) return;
    state.context.push_back(x1.head(static_cast<Eigen::Index>(context_size)));
    state.context.pop_front();
}

Eigen::VectorXd build_input(const NetworkState& state, const NetworkConfig& config,
                            const Eigen::VectorXd& y_now, const LagWindow& lags) {
    const auto g = static_cast<std::size_t>(y_now.size());
    Eigen::VectorXd x0(static_cast<Eigen::Index>(config.input_size(g, lags.size())));
    Eigen::Index pos = 0;
    x0.segment(pos, y_now.size()) = y_now;
    pos += y_now.size();
    if (config.context_size > 0) {
        const auto& ctx = state.context.front();
        x0.segment(pos, ctx.size()) = ctx;
        pos += ctx.size();
    }
    if (config.append_raw_lags) {
        for (const auto& lag : lags) {
            x0.segment(pos, lag.size()) = lag;
            pos += lag.size();
        }
    }
    if (config.input_bias) x0(pos++) = 1.0;
    return x0;
}

RunningScaler::RunningScaler(std::size_t channels)
    : mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(channels))),
      m2_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(channels))) {}

void RunningScaler::observe(const Eigen::VectorXd& y) {
    ++count_;
    const Eigen::VectorXd delta = y - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta.cwiseProduct(y - mean_);
}

Eigen::VectorXd RunningScaler::stddev() const {
    if (count_ < 2) return Eigen::VectorXd::Ones(mean_.size());
    Eigen::VectorXd sd = (m2_ / static_cast<double>(count_ - 1)).cwiseSqrt();
    for (Eigen::Index i = 0; i < sd.size(); ++i)
        if (!(sd(i) > 0.0)) sd(i) = 1.0;
    return sd;
}

Eigen::VectorXd RunningScaler::apply(const Eigen::VectorXd& y) const {
    return (y - mean_).cwiseQuotient(stddev());
}

ImrnnsLearner::ImrnnsLearner(const CausalGraph& graph, NetworkConfig config)
    : config_(config), layout_(graph), scaler_(graph.node_count()) {
    state_ = init_state(config_, layout_);
}

ImrnnsLearner::ImrnnsLearner(const CausalGraph& graph, NetworkConfig config,
                             NetworkState initial)
    : config_(config), layout_(graph), state_(std::move(initial)), scaler_(graph.node_count()) {
    config_.validate();
    const auto inputs = config_.input_size(layout_.node_count(), layout_.lag_order());
    if (static_cast<std::size_t>(state_.w1.cols()) != inputs ||
        static_cast<std::size_t>(state_.w1.rows()) != config_.hidden_size ||
        static_cast<std::size_t>(state_.w2.rows()) != layout_.size() ||
        state_.w2.cols() != state_.w1.rows() ||
        static_cast<std::size_t>(state_.k_smoothed.size()) != layout_.size())
        throw ValidationError("initial network state does not match the configuration");
    if (config_.context_size > 0 && state_.context.size() != config_.context_delay)
        throw ValidationError("initial context buffer does not match the configuration");
}

StepTrace ImrnnsLearner::step(const Eigen::VectorXd& y_now, const LagWindow& lags) {
    Eigen::VectorXd y = y_now;
    LagWindow past = lags;
    if (config_.normalize) {
        scaler_.observe(y_now);
        y = scaler_.apply(y_now);
        for (auto& lag : past) lag = scaler_.apply(lag);
    }

    StepTrace trace;
    trace.x0 = build_input(state_, config_, y, past);
    const ForwardPass pass = forward(state_, trace.x0);
    trace.x3 = sim_layer(pass.x2, y, past, layout_);
    // identity mapping: the target is the measurement itself
    trace.error = y - trace.x3;
    trace.error_norm = trace.error.squaredNorm();
    const SimJacobian jac =
        sim_jacobian(pass.x2, y, past, layout_, config_.complex_step, trace.error);
    backprop_update(state_, trace.x0, pass, jac.contraction, config_.learning_rate,
                    config_.slope_rule);
    update_context(state_, pass.x1, config_.context_size);
    const double beta = config_.estimate_smoothing;
    state_.k_smoothed = beta * state_.k_smoothed + (1.0 - beta) * pass.x2;
    ++state_.step;

    trace.x1 = pass.x1;
    trace.x2 = pass.x2;
    return trace;
}

TrainResult train_online(const MultichannelSeries& series, const CausalGraph& graph,
                         const NetworkConfig& config, std::optional<NetworkState> initial) {
    require_valid(graph);
    if (series.channels() != graph.node_count())
        throw DataError("series has " + std::to_string(series.channels()) +
                        " channels, graph has " + std::to_string(graph.node_count()) + " nodes");
    const auto lag_order = graph.lag_order();
    if (series.samples() <= lag_order + 1)
        throw DataError("series too short: need more than " + std::to_string(lag_order + 1) +
                        " samples");

    ImrnnsLearner learner = initial ? ImrnnsLearner(graph, config, std::move(*initial))
                                    : ImrnnsLearner(graph, config);
    const auto steps = series.samples() - lag_order;
    TrainResult result;
    result.layout = learner.layout();
    result.first_sample = lag_order;
    result.trajectory.resize(static_cast<Eigen::Index>(steps),
                             static_cast<Eigen::Index>(result.layout.size()));
    result.error_norm.resize(static_cast<Eigen::Index>(steps));
    if (config.record_trace) result.trace.reserve(steps);

    for (std::size_t i = 0; i < steps; ++i) {
        const auto n = lag_order + i;
        auto trace = learner.step(series.row(n), lag_window(series, n, lag_order));
        const auto row = static_cast<Eigen::Index>(i);
        result.trajectory.row(row) = learner.state().k_smoothed.transpose();
        result.error_norm(row) = trace.error_norm;
        if (config.record_trace) result.trace.push_back(std::move(trace));
    }
    result.estimate = learner.estimate();
    result.final_state = learner.state();
    result.channel_scale = config.normalize
                               ? learner.scaler().stddev()
                               : Eigen::VectorXd::Ones(static_cast<Eigen::Index>(graph.node_count()));
    return result;
}

CouplingSet to_raw_units(const CouplingSet& normalized, const Eigen::VectorXd& scale) {
    if (static_cast<std::size_t>(scale.size()) != normalized.node_count())
        throw ValidationError("scale vector length does not match the coupling set");
    CouplingSet out = normalized;
    for (std::size_t m = 0; m <= out.lag_order(); ++m)
        for (std::size_t e = 0; e < out.node_count(); ++e)
            for (std::size_t c = 0; c < out.node_count(); ++c)
                if (out(m, e, c) != 0.0)
                    out(m, e, c) *= scale(static_cast<Eigen::Index>(e)) /
                                    scale(static_cast<Eigen::Index>(c));
    return out;
}

}  // namespace ctwin
