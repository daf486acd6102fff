#include "ctwin/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "ctwin/errors.hpp"
#include "ctwin/text_util.hpp"

namespace ctwin {

namespace {

std::string escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

const std::array<const char*, 10> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                              "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                              "#bcbd22", "#17becf"};

// viridis-like ramp for t in [0, 1]
std::string ramp(double t) {
    static const std::array<std::array<double, 3>, 5> stops = {{{68, 1, 84},
                                                                {59, 82, 139},
                                                                {33, 145, 140},
                                                                {94, 201, 98},
                                                                {253, 231, 37}}};
    t = std::clamp(t, 0.0, 1.0) * (stops.size() - 1);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(t), stops.size() - 2);
    const double f = t - static_cast<double>(i);
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                  static_cast<int>(stops[i][0] + f * (stops[i + 1][0] - stops[i][0])),
                  static_cast<int>(stops[i][1] + f * (stops[i + 1][1] - stops[i][1])),
                  static_cast<int>(stops[i][2] + f * (stops[i + 1][2] - stops[i][2])));
    return buf;
}

}  // namespace

std::string svg_line_plot(const std::string& title, const Eigen::VectorXd& x,
                          const std::vector<Trace>& traces, const std::string& x_label,
                          const std::string& y_label) {
    if (x.size() < 1) throw DataError("line plot needs at least one point");
    for (const auto& t : traces)
        if (t.values.size() != x.size()) throw DataError("trace length differs from x axis");

    const double width = 900, height = 480, left = 70, right = 200, top = 40, bottom = 50;
    const double plot_w = width - left - right, plot_h = height - top - bottom;
    double y_min = 0.0, y_max = 0.0;
    bool first = true;
    for (const auto& t : traces) {
        if (first) {
            y_min = t.values.minCoeff();
            y_max = t.values.maxCoeff();
            first = false;
        } else {
            y_min = std::min(y_min, t.values.minCoeff());
            y_max = std::max(y_max, t.values.maxCoeff());
        }
    }
    if (y_max <= y_min) {
        y_max = y_min + 1.0;
        y_min -= 1.0;
    }
    const double x_min = x(0), x_max = x(x.size() - 1) > x(0) ? x(x.size() - 1) : x(0) + 1.0;
    auto sx = [&](double v) { return left + (v - x_min) / (x_max - x_min) * plot_w; };
    auto sy = [&](double v) { return top + (y_max - v) / (y_max - y_min) * plot_h; };

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) +
                      "\" height=\"" + num(height) + "\" data-traces=\"" +
                      std::to_string(traces.size()) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + px(left) + "\" y=\"24\" font-size=\"16\">" + escape(title) + "</text>\n";
    out += "<rect x=\"" + px(left) + "\" y=\"" + px(top) + "\" width=\"" + px(plot_w) +
           "\" height=\"" + px(plot_h) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = y_min + (y_max - y_min) * i / 4.0;
        const double xv = x_min + (x_max - x_min) * i / 4.0;
        out += "<text class=\"ytick\" x=\"" + px(left - 6) + "\" y=\"" + px(sy(yv) + 4) +
               "\" font-size=\"11\" text-anchor=\"end\">" + num(yv) + "</text>\n";
        out += "<text class=\"xtick\" x=\"" + px(sx(xv)) + "\" y=\"" + px(top + plot_h + 16) +
               "\" font-size=\"11\" text-anchor=\"middle\">" + num(xv) + "</text>\n";
    }
    if (y_min < 0.0 && y_max > 0.0)
        out += "<line x1=\"" + px(left) + "\" x2=\"" + px(left + plot_w) + "\" y1=\"" +
               px(sy(0.0)) + "\" y2=\"" + px(sy(0.0)) + "\" stroke=\"#ccc\"/>\n";
    out += "<text x=\"" + px(left + plot_w / 2) + "\" y=\"" + px(height - 10) +
           "\" font-size=\"12\" text-anchor=\"middle\">" + escape(x_label) + "</text>\n";
    out += "<text x=\"16\" y=\"" + px(top + plot_h / 2) +
           "\" font-size=\"12\" transform=\"rotate(-90 16 " + px(top + plot_h / 2) +
           ")\" text-anchor=\"middle\">" + escape(y_label) + "</text>\n";

    // at most ~2000 vertices per trace
    const Eigen::Index stride = std::max<Eigen::Index>(1, x.size() / 2000);
    for (std::size_t k = 0; k < traces.size(); ++k) {
        const auto* color = kPalette[k % kPalette.size()];
        out += "<polyline class=\"trace\" data-name=\"" + escape(traces[k].name) +
               "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.2\" points=\"";
        for (Eigen::Index i = 0; i < x.size(); i += stride) {
            out += px(sx(x(i))) + "," + px(sy(traces[k].values(i))) + " ";
        }
        const auto last = x.size() - 1;
        out += px(sx(x(last))) + "," + px(sy(traces[k].values(last))) + "\"/>\n";
        const double ly = top + 14.0 * static_cast<double>(k) + 8;
        out += "<line x1=\"" + px(width - right + 12) + "\" x2=\"" + px(width - right + 30) +
               "\" y1=\"" + px(ly) + "\" y2=\"" + px(ly) + "\" stroke=\"" + color +
               "\" stroke-width=\"2\"/>\n";
        out += "<text class=\"legend\" x=\"" + px(width - right + 34) + "\" y=\"" + px(ly + 4) +
               "\" font-size=\"11\">" + escape(traces[k].name) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

std::string svg_tfd_heatmap(const std::string& title, const TfdMatrix& tfd) {
    if (tfd.power.size() == 0) throw DataError("cannot draw an empty time-frequency matrix");
    const auto slices = tfd.power.rows();
    const auto bins = tfd.power.cols();
    const double width = 900, height = 520, left = 70, top = 40, bottom = 50;
    const double panel_w = 160, gap = 20;
    const double plot_w = width - left - panel_w - gap - 20, plot_h = height - top - bottom;

    const Eigen::MatrixXd log_power =
        tfd.power.unaryExpr([](double v) { return std::log10(std::max(v, kLogFloor)); });
    const double lo = log_power.minCoeff();
    const double hi = log_power.maxCoeff() > lo ? log_power.maxCoeff() : lo + 1.0;
    const double t0 = tfd.time_axis(0), t1 = tfd.time_axis(slices - 1);
    const double f0 = tfd.freq_axis(0), f1 = tfd.freq_axis(bins - 1);

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) +
                      "\" height=\"" + num(height) + "\" data-slices=\"" +
                      std::to_string(slices) + "\" data-bins=\"" + std::to_string(bins) +
                      "\" data-time-min=\"" + format_double(t0) + "\" data-time-max=\"" +
                      format_double(t1) + "\" data-freq-min=\"" + format_double(f0) +
                      "\" data-freq-max=\"" + format_double(f1) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + px(left) + "\" y=\"24\" font-size=\"16\">" + escape(title) + "</text>\n";

    const double cw = plot_w / static_cast<double>(slices);
    const double ch = plot_h / static_cast<double>(bins);
    out += "<g class=\"heatmap\">\n";
    for (Eigen::Index t = 0; t < slices; ++t)
        for (Eigen::Index k = 0; k < bins; ++k)
            out += "<rect x=\"" + px(left + cw * static_cast<double>(t)) + "\" y=\"" +
                   px(top + plot_h - ch * static_cast<double>(k + 1)) + "\" width=\"" +
                   px(cw + 0.3) + "\" height=\"" + px(ch + 0.3) + "\" fill=\"" +
                   ramp((log_power(t, k) - lo) / (hi - lo)) + "\"/>\n";
    out += "</g>\n";
    for (int i = 0; i <= 4; ++i) {
        const double tv = t0 + (t1 - t0) * i / 4.0;
        const double fv = f0 + (f1 - f0) * i / 4.0;
        out += "<text class=\"xtick\" x=\"" + px(left + plot_w * i / 4.0) + "\" y=\"" +
               px(top + plot_h + 16) + "\" font-size=\"11\" text-anchor=\"middle\">" + num(tv) +
               "</text>\n";
        out += "<text class=\"ytick\" x=\"" + px(left - 6) + "\" y=\"" +
               px(top + plot_h - plot_h * i / 4.0 + 4) +
               "\" font-size=\"11\" text-anchor=\"end\">" + num(fv) + "</text>\n";
    }
    out += "<text x=\"" + px(left + plot_w / 2) + "\" y=\"" + px(height - 10) +
           "\" font-size=\"12\" text-anchor=\"middle\">time (s)</text>\n";
    out += "<text x=\"16\" y=\"" + px(top + plot_h / 2) +
           "\" font-size=\"12\" transform=\"rotate(-90 16 " + px(top + plot_h / 2) +
           ")\" text-anchor=\"middle\">frequency (Hz)</text>\n";

    // collapsed spectrum panel, frequency shares the heatmap's vertical axis
    const Spectrum spectrum = collapse_spectrum(tfd);
    const Eigen::VectorXd log_spec = spectrum.power.unaryExpr(
        [](double v) { return std::log10(std::max(v, kLogFloor)); });
    const double s_lo = log_spec.minCoeff();
    const double s_hi = log_spec.maxCoeff() > s_lo ? log_spec.maxCoeff() : s_lo + 1.0;
    const double px0 = left + plot_w + gap;
    out += "<rect x=\"" + px(px0) + "\" y=\"" + px(top) + "\" width=\"" + px(panel_w) +
           "\" height=\"" + px(plot_h) + "\" fill=\"none\" stroke=\"black\"/>\n";
    out += "<polyline class=\"spectrum\" fill=\"none\" stroke=\"#d62728\" points=\"";
    for (Eigen::Index k = 0; k < bins; ++k) {
        const double xv = px0 + (log_spec(k) - s_lo) / (s_hi - s_lo) * panel_w;
        const double yv = top + plot_h - ch * (static_cast<double>(k) + 0.5);
        out += px(xv) + "," + px(yv) + " ";
    }
    out += "\"/>\n";
    out += "<text x=\"" + px(px0 + panel_w / 2) + "\" y=\"" + px(top + plot_h + 16) +
           "\" font-size=\"11\" text-anchor=\"middle\">log10 mean power</text>\n";
    out += "</svg>\n";
    return out;
}

}  // namespace ctwin
