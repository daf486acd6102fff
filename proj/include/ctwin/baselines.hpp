#pragma once

#include <Eigen/Dense>

#include <vector>

#include "ctwin/graph.hpp"
#include "ctwin/series.hpp"

namespace ctwin {

struct FitReport {
    CouplingSet couplings;
    /// Standard error of every estimated coupling, same layout as `couplings`.
    CouplingSet standard_errors;
    Eigen::VectorXd residual_variance;
    /// Nodes whose regressor matrix failed the rank check; their couplings stay zero.
    std::vector<std::size_t> rank_deficient_nodes;

    bool ok() const { return rank_deficient_nodes.empty(); }
};

/// Per-node least squares of y_e[n] on its masked parents, instantaneous and
/// lagged. No intercept. Solved through equilibrated normal equations with a
/// pivoted LDL^T factorization; a node is rank deficient when the smallest
/// pivot falls below `rank_tolerance` times the largest.
FitReport ols_svar_fit(const MultichannelSeries& series, const CausalGraph& graph,
                       double rank_tolerance = 1e-10);

enum class Direction { Forward, Reverse, Inconclusive };

const char* to_string(Direction d);

struct DirectionVerdict {
    /// |corr(r^2, x^2)| for y regressed on x.
    double statistic_forward = 0.0;
    /// |corr(r^2, y^2)| for x regressed on y.
    double statistic_reverse = 0.0;
    double threshold = 0.0;
    /// Forward means x causes y.
    Direction verdict = Direction::Inconclusive;
};

/// Residual-dependence direction check: the regression in the causal direction
/// leaves residuals independent of the regressor. Dependence is measured by the
/// correlation of squared residuals with the squared regressor.
DirectionVerdict direction_test(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                double threshold = 0.1);

/// Entry (i, j) = var(channel i) / var(channel j).
Eigen::MatrixXd variance_ratios(const MultichannelSeries& series);

}  // namespace ctwin
