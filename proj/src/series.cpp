#include "ctwin/series.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ctwin/errors.hpp"
#include "ctwin/text_util.hpp"

namespace ctwin {

std::vector<std::string> default_labels(std::size_t count) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back("B" + std::to_string(i + 1));
    return out;
}

MultichannelSeries::MultichannelSeries(Eigen::MatrixXd data, double sample_rate,
                                       std::vector<std::string> labels)
    : data_(std::move(data)), sample_rate_(sample_rate), labels_(std::move(labels)) {
    if (data_.rows() < 1 || data_.cols() < 1)
        throw DataError("series needs at least one sample and one channel");
    if (!data_.allFinite()) throw DataError("series contains non-finite values");
    if (!(sample_rate_ >= 0.0) || !std::isfinite(sample_rate_))
        throw DataError("sample rate must be a finite non-negative number");
    if (labels_.empty()) labels_ = default_labels(channels());
    if (labels_.size() != channels())
        throw DataError("series has " + std::to_string(channels()) + " channels but " +
                        std::to_string(labels_.size()) + " labels");
}

std::size_t MultichannelSeries::channel_index(std::string_view ref) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
        if (labels_[i] == ref) return i;
    std::size_t one_based = 0;
    const auto* end = ref.data() + ref.size();
    auto [ptr, ec] = std::from_chars(ref.data(), end, one_based);
    if (ec == std::errc{} && ptr == end && one_based >= 1 && one_based <= channels())
        return one_based - 1;
    throw DataError("unknown channel '" + std::string(ref) + "'");
}

namespace {

void parse_header(std::string_view line, double& sample_rate, std::vector<std::string>& labels) {
    for (const auto& token : split_whitespace(line.substr(1))) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        const auto key = token.substr(0, eq);
        const auto value = token.substr(eq + 1);
        if (key == "sample_rate") {
            sample_rate = parse_double(value, "sample_rate in series header");
        } else if (key == "labels") {
            labels = split(value, ',');
        }
    }
}

}  // namespace

MultichannelSeries parse_series(std::string_view text,
                                std::optional<std::size_t> expected_channels) {
    double sample_rate = 0.0;
    std::vector<std::string> labels;
    std::vector<double> values;
    std::size_t columns = 0;
    std::size_t rows = 0;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        auto line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string_view::npos) continue;
        if (line[first] == '#') {
            if (rows == 0) parse_header(line.substr(first), sample_rate, labels);
            continue;
        }
        const auto cells = split_whitespace(line);
        if (columns == 0) columns = cells.size();
        if (cells.size() != columns)
            throw DataError("row " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " columns, expected " +
                            std::to_string(columns));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v = 0.0;
            if (!try_parse_double(cells[c], v) || !std::isfinite(v))
                throw DataError("non-numeric cell '" + cells[c] + "' at row " +
                                std::to_string(line_no) + ", column " + std::to_string(c + 1));
            values.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) throw DataError("series file contains no samples");
    if (expected_channels && *expected_channels != columns)
        throw DataError("expected " + std::to_string(*expected_channels) + " channels, found " +
                        std::to_string(columns));
    Eigen::MatrixXd data(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(columns));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < columns; ++c)
            data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                values[r * columns + c];
    if (!labels.empty() && labels.size() != columns)
        throw DataError("header lists " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(columns) + " columns");
    return MultichannelSeries(std::move(data), sample_rate, std::move(labels));
}

std::string format_series(const MultichannelSeries& series) {
    std::string out = "# sample_rate=" + format_double(series.sample_rate()) + " labels=";
    for (std::size_t c = 0; c < series.channels(); ++c) {
        if (c) out += ',';
        out += series.labels()[c];
    }
    out += '\n';
    const auto& d = series.data();
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
        for (Eigen::Index c = 0; c < d.cols(); ++c) {
            if (c) out += ' ';
            out += format_double(d(r, c));
        }
        out += '\n';
    }
    return out;
}

MultichannelSeries load_block(const std::filesystem::path& path,
                              std::optional<std::size_t> expected_channels) {
    try {
        return parse_series(read_text_file(path), expected_channels);
    } catch (const DataError& ex) {
        throw DataError(path.string() + ": " + ex.what());
    }
}

void save_series(const std::filesystem::path& path, const MultichannelSeries& series) {
    write_text_file(path, format_series(series));
}

}  // namespace ctwin
