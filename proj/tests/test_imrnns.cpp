#include <doctest.h>

#include <complex>

#include "support.hpp"

using namespace ctwin;
using namespace testing_support;

namespace {

double logistic(double u) {
    return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}

CausalGraph small_graph() {
    return CausalGraph(default_labels(3), 1, {{1, 0, 0}, {2, 0, 0}, {2, 1, 0}, {0, 2, 1}, {1, 2, 1}});
}

struct Instance {
    NetworkState state;
    Eigen::VectorXd x0, y;
    LagWindow lags;
};

double loss(const NetworkState& s, const Instance& in, const ParamLayout& layout) {
    const auto pass = forward(s, in.x0);
    return (in.y - sim_layer(pass.x2, in.y, in.lags, layout)).squaredNorm();
}

}  // namespace

TEST_CASE("bipolar_sigmoid: zero, odd symmetry, logistic oracle") {
    CHECK(bipolar_sigmoid(0.0) == 0.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-40.0, 40.0);
    for (int i = 0; i < 10000; ++i) {
        const double x = u(rng);
        CHECK(bipolar_sigmoid(-x) == -bipolar_sigmoid(x));
        CHECK(std::abs(bipolar_sigmoid(x) - (2.0 * logistic(x) - 1.0)) <= 1e-15);
        CHECK(std::abs(bipolar_sigmoid(x)) <= 1.0);
    }
    CHECK(bipolar_sigmoid(1e6) == 1.0);
    CHECK(bipolar_sigmoid(-1e6) == -1.0);
}

TEST_CASE("bipolar_sigmoid_slope: exact rule is the derivative") {
    for (double x : {-3.0, -0.5, 0.0, 0.7, 2.5}) {
        Eigen::VectorXd x1(1);
        x1 << bipolar_sigmoid(x);
        const double h = 1e-6;
        const double fd = (bipolar_sigmoid(x + h) - bipolar_sigmoid(x - h)) / (2 * h);
        CHECK(bipolar_sigmoid_slope(x1, SlopeRule::Exact)(0) == doctest::Approx(fd).epsilon(1e-8));
        CHECK(bipolar_sigmoid_slope(x1, SlopeRule::Legacy)(0) ==
              doctest::Approx(2.0 * x1(0) * (1.0 - x1(0))));
    }
}

TEST_CASE("forward: zero weights") {
    NetworkState s;
    s.w1 = Eigen::MatrixXd::Zero(4, 3);
    s.w2 = Eigen::MatrixXd::Zero(2, 4);
    const auto p = forward(s, Eigen::Vector3d(1, 2, 3));
    CHECK(p.x1.isZero(0.0));
    CHECK(p.x2.isZero(0.0));
}

TEST_CASE("forward: scalar chain by hand") {
    NetworkState s;
    s.w1 = Eigen::MatrixXd::Constant(1, 1, 0.5);
    s.w2 = Eigen::MatrixXd::Constant(1, 1, -2.0);
    Eigen::VectorXd x0(1);
    x0 << 2.0;
    const auto p = forward(s, x0);
    const double h = 2.0 / (1.0 + std::exp(-1.0)) - 1.0;
    CHECK(p.x1(0) == doctest::Approx(h).epsilon(1e-15));
    CHECK(p.x2(0) == doctest::Approx(-2.0 * h).epsilon(1e-15));
}

TEST_CASE("forward: dense oracle") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 100; ++i) {
        NetworkState s;
        s.w1 = random_matrix(rng, 7, 9);
        s.w2 = random_matrix(rng, 5, 7);
        const auto x0 = random_vector(rng, 9);
        Eigen::VectorXd x1(7), x2 = Eigen::VectorXd::Zero(5);
        for (int p = 0; p < 7; ++p) {
            double acc = 0.0;
            for (int m = 0; m < 9; ++m) acc += s.w1(p, m) * x0(m);
            x1(p) = 2.0 * logistic(acc) - 1.0;
        }
        for (int q = 0; q < 5; ++q)
            for (int p = 0; p < 7; ++p) x2(q) += s.w2(q, p) * x1(p);
        const auto pass = forward(s, x0);
        CHECK((pass.x1 - x1).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK((pass.x2 - x2).cwiseAbs().maxCoeff() <= 1e-14);
    }
}

TEST_CASE("sim_layer: zero, single edge, equivalence with simulate_step") {
    const CausalGraph single(default_labels(2), 0, {{1, 0, 0}});
    const ParamLayout one(single);
    CHECK(sim_layer(Eigen::VectorXd::Zero(1), Eigen::Vector2d(5, 7), {}, one).isZero(0.0));
    Eigen::VectorXd x2(1);
    x2 << 0.5;
    CHECK(sim_layer(x2, Eigen::Vector2d(9, 2), {}, one)(0) == 1.0);

    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        const auto graph = random_graph(rng, 4, 2);
        const ParamLayout layout(graph);
        const auto x = random_vector(rng, static_cast<Eigen::Index>(layout.size()));
        const auto y = random_vector(rng, 4);
        const auto lags = random_lags(rng, 4, 2);
        CHECK(sim_layer(x, y, lags, layout) == simulate_step(unflatten(x, layout), y, lags));
    }
}

TEST_CASE("sim_jacobian: exact coefficients of the linear map") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 50; ++i) {
        const auto graph = random_graph(rng, 4, 2);
        const ParamLayout layout(graph);
        const auto x = random_vector(rng, static_cast<Eigen::Index>(layout.size()));
        const auto y = random_vector(rng, 4);
        const auto lags = random_lags(rng, 4, 2);
        const auto e = random_vector(rng, 4);
        const auto jac = sim_jacobian(x, y, lags, layout, 1e-20, e);
        for (std::size_t j = 0; j < layout.size(); ++j) {
            const auto& p = layout[j];
            const double coef = p.lag == 0 ? y(static_cast<Eigen::Index>(p.cause))
                                           : lags[p.lag - 1](static_cast<Eigen::Index>(p.cause));
            for (Eigen::Index r = 0; r < 4; ++r) {
                const double expected = r == static_cast<Eigen::Index>(p.effect) ? coef : 0.0;
                CHECK(std::abs(jac.jacobian(r, static_cast<Eigen::Index>(j)) - expected) <=
                      4e-16 * std::abs(coef));
            }
        }
        CHECK((jac.contraction - jac.jacobian.transpose() * e).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("sim_jacobian: central differences agree") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        const auto graph = random_graph(rng, 4, 1);
        const ParamLayout layout(graph);
        const auto x = random_vector(rng, static_cast<Eigen::Index>(layout.size()));
        const auto y = random_vector(rng, 4);
        const auto lags = random_lags(rng, 4, 1);
        const auto jac = sim_jacobian(x, y, lags, layout, 1e-20, Eigen::VectorXd::Zero(4));
        const double h = 1e-6;
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            Eigen::VectorXd xp = x, xm = x;
            xp(j) += h;
            xm(j) -= h;
            const Eigen::VectorXd fd = (sim_layer(xp, y, lags, layout) - sim_layer(xm, y, lags, layout)) / (2 * h);
            const double scale = std::max(jac.jacobian.col(j).cwiseAbs().maxCoeff(), 1e-300);
            CHECK((fd - jac.jacobian.col(j)).cwiseAbs().maxCoeff() / scale <= 1e-8);
        }
    }
}

TEST_CASE("complex step on exp at x = 1 survives a 1e-20 step") {
    const double h = 1e-20;
    const double x = 1.0;
    const double cs = std::exp(std::complex<double>(x, h)).imag() / h;
    CHECK(std::abs(cs - std::exp(1.0)) <= 1e-15 * std::exp(1.0));
    const double central = (std::exp(x + h) - std::exp(x - h)) / (2 * h);
    CHECK(std::abs(central - std::exp(1.0)) > 1.0);
}

TEST_CASE("backprop_update: zero error or zero rate leaves weights unchanged") {
    std::mt19937_64 rng(6);
    const auto graph = small_graph();
    const ParamLayout layout(graph);
    NetworkConfig cfg;
    cfg.hidden_size = cfg.context_size = 5;
    auto s = init_state(cfg, layout);
    const auto x0 = random_vector(rng, static_cast<Eigen::Index>(cfg.input_size(3, 1)));
    const auto pass = forward(s, x0);
    const auto before = s;
    backprop_update(s, x0, pass, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.size())), 0.1,
                    SlopeRule::Exact);
    CHECK(s.w1 == before.w1);
    CHECK(s.w2 == before.w2);
    backprop_update(s, x0, pass, random_vector(rng, static_cast<Eigen::Index>(layout.size())), 0.0,
                    SlopeRule::Exact);
    CHECK(s.w1 == before.w1);
    CHECK(s.w2 == before.w2);
}

TEST_CASE("backprop_update: implied gradient matches finite differences") {
    std::mt19937_64 rng(7);
    const auto graph = small_graph();
    const ParamLayout layout(graph);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        Instance in;
        in.state.w1 = random_matrix(rng, 4, 6);
        in.state.w2 = random_matrix(rng, static_cast<Eigen::Index>(layout.size()), 4);
        in.x0 = random_vector(rng, 6);
        in.y = random_vector(rng, 3);
        in.lags = random_lags(rng, 3, 1);
        const auto pass = forward(in.state, in.x0);
        const Eigen::VectorXd e = in.y - sim_layer(pass.x2, in.y, in.lags, layout);
        const auto jac = sim_jacobian(pass.x2, in.y, in.lags, layout, 1e-20, e);
        auto updated = in.state;
        const double eta = 0.5;
        backprop_update(updated, in.x0, pass, jac.contraction, eta, SlopeRule::Exact);
        // update = -eta/2 * dE/dW
        const Eigen::MatrixXd g1 = -2.0 * (updated.w1 - in.state.w1) / eta;
        const Eigen::MatrixXd g2 = -2.0 * (updated.w2 - in.state.w2) / eta;
        auto check = [&](Eigen::MatrixXd NetworkState::*w, const Eigen::MatrixXd& g) {
            const double h = 1e-6;
            for (Eigen::Index r = 0; r < g.rows(); ++r)
                for (Eigen::Index c = 0; c < g.cols(); ++c) {
                    auto p = in.state, m = in.state;
                    (p.*w)(r, c) += h;
                    (m.*w)(r, c) -= h;
                    const double fd = (loss(p, in, layout) - loss(m, in, layout)) / (2 * h);
                    const double rel = std::abs(fd - g(r, c)) / std::max({std::abs(fd), std::abs(g(r, c)), 1e-6});
                    worst = std::max(worst, rel);
                }
        };
        check(&NetworkState::w1, g1);
        check(&NetworkState::w2, g2);
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("backprop_update: non-finite weights are a divergence") {
    const ParamLayout layout(small_graph());
    NetworkState s;
    s.w1 = Eigen::MatrixXd::Ones(2, 3);
    s.w2 = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(layout.size()), 2);
    s.step = 17;
    const Eigen::Vector3d x0(1, 1, 1);
    const auto pass = forward(s, x0);
    try {
        backprop_update(s, x0, pass, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(layout.size()), 1e308),
                        10.0, SlopeRule::Exact);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.step() == 17);
        CHECK(e.exit_code() == 3);
    }
}

TEST_CASE("build_input: no context, no bias gives y exactly") {
    const ParamLayout layout(small_graph());
    NetworkConfig cfg;
    cfg.context_size = 0;
    cfg.input_bias = false;
    const auto s = init_state(cfg, layout);
    const Eigen::Vector3d y(0.1, -2.0, 3.5);
    CHECK(build_input(s, cfg, y, {Eigen::Vector3d(9, 9, 9)}) == Eigen::VectorXd(y));
    cfg.append_raw_lags = true;
    cfg.input_bias = true;
    const auto with = build_input(init_state(cfg, layout), cfg, y, {Eigen::Vector3d(4, 5, 6)});
    REQUIRE(with.size() == 7);
    CHECK(with.segment(3, 3) == Eigen::Vector3d(4, 5, 6));
    CHECK(with(6) == 1.0);
}

TEST_CASE("update_context: constant stream and delay") {
    const ParamLayout layout(small_graph());
    NetworkConfig cfg;
    cfg.hidden_size = 4;
    cfg.context_size = 3;
    cfg.context_delay = 2;
    auto s = init_state(cfg, layout);
    const Eigen::Vector4d x1(0.25, -0.5, 0.75, 1.0);
    update_context(s, x1, 3);
    CHECK(s.context.front().isZero(0.0));
    update_context(s, x1, 3);
    CHECK(s.context.front() == x1.head(3));
    for (int i = 0; i < 10; ++i) update_context(s, x1, 3);
    CHECK(s.context.front() == x1.head(3));
}

TEST_CASE("learner: context replays hidden outputs after the configured delay") {
    std::mt19937_64 rng(8);
    const auto graph = small_graph();
    for (std::size_t delay : {1u, 3u}) {
        NetworkConfig cfg;
        cfg.hidden_size = 6;
        cfg.context_size = 4;
        cfg.context_delay = delay;
        ImrnnsLearner learner(graph, cfg);
        std::vector<StepTrace> trace;
        for (int n = 0; n < 30; ++n) trace.push_back(learner.step(random_vector(rng, 3), random_lags(rng, 3, 1)));
        for (std::size_t n = 0; n < trace.size(); ++n) {
            const Eigen::VectorXd ctx = trace[n].x0.segment(3, 4);
            if (n < delay) CHECK(ctx.isZero(0.0));
            else CHECK(ctx == trace[n - delay].x1.head(4));
        }
    }
}

TEST_CASE("learner: zero weights see the input as error") {
    const auto graph = small_graph();
    NetworkConfig cfg;
    cfg.weight_init_scale = 0.0;
    cfg.normalize = false;
    ImrnnsLearner learner(graph, cfg);
    const Eigen::Vector3d y(0.3, -1.2, 0.8);
    const auto t = learner.step(y, {Eigen::Vector3d(1, 2, 3)});
    CHECK(t.x3.isZero(0.0));
    CHECK(t.error == Eigen::VectorXd(y));
}

TEST_CASE("learner: no structure to learn keeps estimates near zero") {
    const auto graph = small_graph();
    NoiseSpec n;
    n.kind = NoiseKind::Gaussian;
    n.scale = Eigen::VectorXd::Ones(3);
    n.seed = 4;
    const auto s = generate_series(graph, CouplingSet(3, 1), n, 20000);
    NetworkConfig cfg;
    const auto r = train_online(s, graph, cfg);
    CHECK(r.trajectory.rows() == 19999);
    CHECK(r.final_state.k_smoothed.cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("train_online: deterministic and mask-preserving") {
    const auto graph = small_graph();
    CouplingSet k(3, 1);
    k(0, 0, 1) = 0.5;
    k(0, 0, 2) = -0.3;
    k(0, 1, 2) = 0.4;
    k(1, 2, 0) = 0.3;
    k(1, 2, 1) = -0.2;
    NoiseSpec n;
    n.scale = Eigen::VectorXd::Ones(3);
    n.seed = 2;
    const auto s = generate_series(graph, k, n, 3000);
    NetworkConfig cfg;
    cfg.seed = 11;
    cfg.record_trace = true;
    const auto a = train_online(s, graph, cfg);
    const auto b = train_online(s, graph, cfg);
    CHECK(a.trajectory == b.trajectory);
    CHECK(a.final_state.w1 == b.final_state.w1);
    CHECK(a.trace.size() == 2999);
    for (Eigen::Index r = 0; r < a.trajectory.rows(); ++r) {
        const auto est = unflatten(a.trajectory.row(r).transpose(), a.layout);
        REQUIRE(est.zero_diagonal());
        REQUIRE(est.respects(graph));
    }
    cfg.seed = 12;
    CHECK(train_online(s, graph, cfg).trajectory != a.trajectory);
}

TEST_CASE("train_online: carry-over state continues the step count") {
    const auto graph = small_graph();
    NoiseSpec n;
    n.scale = Eigen::VectorXd::Ones(3);
    const auto s = generate_series(graph, CouplingSet(3, 1), n, 200);
    const auto first = train_online(s, graph, {});
    const auto second = train_online(s, graph, {}, first.final_state);
    CHECK(second.final_state.step == 2 * first.final_state.step);
}

TEST_CASE("train_online: input errors") {
    const auto graph = small_graph();
    CHECK_THROWS_AS(train_online(MultichannelSeries(Eigen::MatrixXd::Zero(2, 3)), graph, {}), DataError);
    CHECK_THROWS_AS(train_online(MultichannelSeries(Eigen::MatrixXd::Zero(10, 2)), graph, {}), DataError);
    NetworkConfig bad;
    bad.context_size = 40;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = {};
    bad.estimate_smoothing = 1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = {};
    bad.learning_rate = -1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("to_raw_units") {
    CouplingSet k(2, 0);
    k(0, 0, 1) = 0.5;
    const auto raw = to_raw_units(k, Eigen::Vector2d(4.0, 2.0));
    CHECK(raw(0, 0, 1) == 1.0);
}

TEST_CASE("RunningScaler: matches two-pass statistics") {
    std::mt19937_64 rng(9);
    const auto data = random_matrix(rng, 500, 3, 5.0);
    RunningScaler sc(3);
    for (Eigen::Index r = 0; r < data.rows(); ++r) sc.observe(data.row(r).transpose());
    for (Eigen::Index c = 0; c < 3; ++c) {
        const double mean = data.col(c).mean();
        const double var = (data.col(c).array() - mean).square().sum() / 499.0;
        CHECK(sc.mean()(c) == doctest::Approx(mean).epsilon(1e-12));
        CHECK(sc.stddev()(c) == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
    }
    RunningScaler flat(1);
    flat.observe(Eigen::VectorXd::Constant(1, 2.0));
    flat.observe(Eigen::VectorXd::Constant(1, 2.0));
    CHECK(flat.stddev()(0) == 1.0);
}
