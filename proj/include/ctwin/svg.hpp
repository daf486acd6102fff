#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "ctwin/spectral.hpp"

namespace ctwin {

struct Trace {
    std::string name;
    Eigen::VectorXd values;
};

/// Line chart; every trace is a `<polyline class="trace">` carrying a
/// `data-name` attribute and a legend entry.
std::string svg_line_plot(const std::string& title, const Eigen::VectorXd& x,
                          const std::vector<Trace>& traces, const std::string& x_label,
                          const std::string& y_label);

/// Log-power heatmap (time on x, frequency on y) with the collapsed spectrum
/// drawn in a side panel. Axis extents are written as data-* attributes on the
/// root element.
std::string svg_tfd_heatmap(const std::string& title, const TfdMatrix& tfd);

}  // namespace ctwin
