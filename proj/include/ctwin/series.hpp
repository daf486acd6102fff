#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctwin {

/// Uniformly sampled G-channel series; row n of `data()` is the sample vector y[n].
class MultichannelSeries {
public:
    MultichannelSeries() = default;
    /// Labels default to B1..BG. A sample rate of 0 means "unknown".
    explicit MultichannelSeries(Eigen::MatrixXd data, double sample_rate = 0.0,
                                std::vector<std::string> labels = {});

    std::size_t samples() const { return static_cast<std::size_t>(data_.rows()); }
    std::size_t channels() const { return static_cast<std::size_t>(data_.cols()); }
    const Eigen::MatrixXd& data() const { return data_; }
    double sample_rate() const { return sample_rate_; }
    const std::vector<std::string>& labels() const { return labels_; }

    Eigen::VectorXd row(std::size_t n) const {
        return data_.row(static_cast<Eigen::Index>(n)).transpose();
    }
    Eigen::VectorXd channel(std::size_t c) const {
        return data_.col(static_cast<Eigen::Index>(c));
    }
    std::size_t channel_index(std::string_view ref) const;

private:
    Eigen::MatrixXd data_;
    double sample_rate_ = 0.0;
    std::vector<std::string> labels_;
};

std::vector<std::string> default_labels(std::size_t count);

/// Text layout: an optional header line
///   # sample_rate=<hz> labels=<l1>,<l2>,...
/// followed by one whitespace-separated row per sample. Without the header the
/// channel count comes from the first row.
MultichannelSeries parse_series(std::string_view text,
                                std::optional<std::size_t> expected_channels = std::nullopt);
std::string format_series(const MultichannelSeries& series);

MultichannelSeries load_block(const std::filesystem::path& path,
                              std::optional<std::size_t> expected_channels = std::nullopt);
void save_series(const std::filesystem::path& path, const MultichannelSeries& series);

}  // namespace ctwin
