#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>

namespace ctwin {

enum class WindowType { Rectangular, Hann, Hamming };

const char* to_string(WindowType w);
WindowType parse_window_type(std::string_view name);

struct SpectrogramParams {
    std::size_t window_len = 256;
    std::size_t hop = 128;
    std::size_t nfft = 256;
    WindowType window = WindowType::Hann;
};

/// Time-frequency power distribution; rows are time slices, columns frequency bins.
struct TfdMatrix {
    Eigen::MatrixXd power;
    Eigen::VectorXd time_axis;  ///< seconds at each slice centre
    Eigen::VectorXd freq_axis;  ///< hertz per bin, nfft/2 + 1 bins
    SpectrogramParams params;
    double sample_rate = 1.0;

    std::size_t slices() const { return static_cast<std::size_t>(power.rows()); }
    std::size_t bins() const { return static_cast<std::size_t>(power.cols()); }
};

struct Spectrum {
    Eigen::VectorXd power;
    Eigen::VectorXd freq_axis;
};

Eigen::VectorXd make_window(WindowType type, std::size_t length);

/// One-sided short-time periodogram. Each slice holds
///   c_k |X_k|^2 / (nfft * sum(w^2))
/// with c_k = 2 except at DC and Nyquist, so a slice sums to the mean-square
/// of the windowed frame. A sample rate of 0 is treated as 1 (cycles/sample).
TfdMatrix spectrogram(const Eigen::VectorXd& signal, const SpectrogramParams& params = {},
                      double sample_rate = 0.0);

/// Mean over time slices.
Spectrum collapse_spectrum(const TfdMatrix& tfd);

/// Power in bins strictly above `split_freq` over total power.
double band_power_ratio(const Spectrum& spectrum, double split_freq);

/// Pearson correlation of the log10 power spectra (floored at kLogFloor).
double spectral_similarity(const Spectrum& a, const Spectrum& b);

inline constexpr double kLogFloor = 1e-12;

/// CSV with a metadata comment line, a frequency header row and one row per slice.
std::string format_tfd(const TfdMatrix& tfd);
std::string format_spectrum(const Spectrum& spectrum);

}  // namespace ctwin
