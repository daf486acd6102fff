#include "ctwin/baselines.hpp"

#include <cmath>
#include <string>

#include "ctwin/errors.hpp"

namespace ctwin {

FitReport ols_svar_fit(const MultichannelSeries& series, const CausalGraph& graph,
                       double rank_tolerance) {
    require_valid(graph);
    const auto g = graph.node_count();
    const auto lag_order = graph.lag_order();
    if (series.channels() != g)
        throw DataError("series has " + std::to_string(series.channels()) +
                        " channels, graph has " + std::to_string(g) + " nodes");
    if (series.samples() <= lag_order)
        throw DataError("series is shorter than the lag order");

    const auto rows = static_cast<Eigen::Index>(series.samples() - lag_order);
    const auto& data = series.data();
    const auto first = static_cast<Eigen::Index>(lag_order);

    FitReport report;
    report.couplings = CouplingSet(g, lag_order);
    report.standard_errors = CouplingSet(g, lag_order);
    report.residual_variance = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g));

    for (std::size_t e = 0; e < g; ++e) {
        std::vector<LaggedEdge> parents;
        for (const auto& edge : graph.edges())
            if (edge.effect == e) parents.push_back(edge);
        const Eigen::VectorXd target = data.col(static_cast<Eigen::Index>(e)).segment(first, rows);
        const auto p = static_cast<Eigen::Index>(parents.size());
        if (p == 0) {
            report.residual_variance(static_cast<Eigen::Index>(e)) =
                target.squaredNorm() / static_cast<double>(rows);
            continue;
        }
        if (rows <= p) throw DataError("too few samples for the regressors of node " +
                                       graph.label(e));

        Eigen::MatrixXd x(rows, p);
        for (Eigen::Index j = 0; j < p; ++j) {
            const auto& edge = parents[static_cast<std::size_t>(j)];
            x.col(j) = data.col(static_cast<Eigen::Index>(edge.cause))
                           .segment(first - static_cast<Eigen::Index>(edge.lag), rows);
        }
        const Eigen::MatrixXd gram = x.transpose() * x;
        const Eigen::VectorXd diag = gram.diagonal();
        if ((diag.array() <= 0.0).any()) {
            report.rank_deficient_nodes.push_back(e);
            continue;
        }
        const Eigen::VectorXd equil = diag.cwiseSqrt().cwiseInverse();
        const Eigen::MatrixXd scaled = equil.asDiagonal() * gram * equil.asDiagonal();
        Eigen::LDLT<Eigen::MatrixXd> ldlt(scaled);
        const Eigen::VectorXd pivots = ldlt.vectorD();
        if (ldlt.info() != Eigen::Success || pivots.minCoeff() <= rank_tolerance * pivots.maxCoeff()) {
            report.rank_deficient_nodes.push_back(e);
            continue;
        }
        const Eigen::VectorXd beta =
            equil.asDiagonal() * ldlt.solve(equil.asDiagonal() * (x.transpose() * target));
        const Eigen::VectorXd residual = target - x * beta;
        const double sigma2 = residual.squaredNorm() / static_cast<double>(rows - p);
        report.residual_variance(static_cast<Eigen::Index>(e)) = sigma2;
        const Eigen::MatrixXd inverse =
            equil.asDiagonal() *
            ldlt.solve(Eigen::MatrixXd::Identity(p, p)) * equil.asDiagonal();
        for (Eigen::Index j = 0; j < p; ++j) {
            const auto& edge = parents[static_cast<std::size_t>(j)];
            report.couplings(edge.lag, edge.effect, edge.cause) = beta(j);
            report.standard_errors(edge.lag, edge.effect, edge.cause) =
                std::sqrt(std::max(0.0, sigma2 * inverse(j, j)));
        }
    }
    return report;
}

const char* to_string(Direction d) {
    switch (d) {
        case Direction::Forward: return "forward";
        case Direction::Reverse: return "reverse";
        case Direction::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

namespace {

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::VectorXd ac = a.array() - a.mean();
    const Eigen::VectorXd bc = b.array() - b.mean();
    const double denom = std::sqrt(ac.squaredNorm() * bc.squaredNorm());
    if (denom == 0.0) return 0.0;
    return ac.dot(bc) / denom;
}

/// |corr(r^2, regressor^2)| for `response` regressed on `regressor` (both centered).
double residual_dependence(const Eigen::VectorXd& regressor, const Eigen::VectorXd& response) {
    const double slope = regressor.dot(response) / regressor.squaredNorm();
    const Eigen::VectorXd residual = response - slope * regressor;
    return std::abs(correlation(residual.array().square().matrix(),
                                regressor.array().square().matrix()));
}

}  // namespace

DirectionVerdict direction_test(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                double threshold) {
    if (x.size() != y.size()) throw DataError("direction test needs equal-length channels");
    if (x.size() < 100) throw DataError("direction test needs at least 100 samples");
    const Eigen::VectorXd xc = x.array() - x.mean();
    const Eigen::VectorXd yc = y.array() - y.mean();
    if (xc.squaredNorm() == 0.0 || yc.squaredNorm() == 0.0)
        throw DataError("direction test is undefined for a constant channel");

    DirectionVerdict v;
    v.threshold = threshold;
    v.statistic_forward = residual_dependence(xc, yc);
    v.statistic_reverse = residual_dependence(yc, xc);
    const double gap = v.statistic_reverse - v.statistic_forward;
    if (gap > threshold) v.verdict = Direction::Forward;
    else if (-gap > threshold) v.verdict = Direction::Reverse;
    return v;
}

Eigen::MatrixXd variance_ratios(const MultichannelSeries& series) {
    const auto g = static_cast<Eigen::Index>(series.channels());
    if (series.samples() < 2) throw DataError("variance needs at least two samples");
    // corrected two-pass: the second sum cancels the rounding left in the mean
    const auto& d = series.data();
    const auto rows = static_cast<double>(d.rows());
    const Eigen::RowVectorXd mean = d.colwise().sum() / rows;
    const Eigen::MatrixXd centred = d.rowwise() - mean;
    const Eigen::RowVectorXd drift = centred.colwise().sum();
    const Eigen::VectorXd var =
        ((centred.colwise().squaredNorm() - drift.cwiseProduct(drift) / rows) / (rows - 1.0))
            .transpose();
    for (Eigen::Index c = 0; c < g; ++c)
        if (!(var(c) > 0.0))
            throw DataError("channel " + series.labels()[static_cast<std::size_t>(c)] +
                            " has zero variance");
    Eigen::MatrixXd out(g, g);
    for (Eigen::Index i = 0; i < g; ++i)
        for (Eigen::Index j = 0; j < g; ++j) out(i, j) = i == j ? 1.0 : var(i) / var(j);
    return out;
}

}  // namespace ctwin
