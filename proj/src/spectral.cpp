#include "ctwin/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "ctwin/errors.hpp"
#include "ctwin/text_util.hpp"

namespace ctwin {

const char* to_string(WindowType w) {
    switch (w) {
        case WindowType::Rectangular: return "rectangular";
        case WindowType::Hann: return "hann";
        case WindowType::Hamming: return "hamming";
    }
    return "unknown";
}

WindowType parse_window_type(std::string_view name) {
    if (name == "rectangular" || name == "rect" || name == "boxcar") return WindowType::Rectangular;
    if (name == "hann" || name == "hanning") return WindowType::Hann;
    if (name == "hamming") return WindowType::Hamming;
    throw ValidationError("unknown window type '" + std::string(name) + "'");
}

Eigen::VectorXd make_window(WindowType type, std::size_t length) {
    Eigen::VectorXd w(static_cast<Eigen::Index>(length));
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t n = 0; n < length; ++n) {
        const double phase = two_pi * static_cast<double>(n) / static_cast<double>(length);
        double v = 1.0;
        if (type == WindowType::Hann) v = 0.5 - 0.5 * std::cos(phase);
        else if (type == WindowType::Hamming) v = 0.54 - 0.46 * std::cos(phase);
        w(static_cast<Eigen::Index>(n)) = v;
    }
    return w;
}

namespace {

// FFTW planning is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class RealFft {
public:
    explicit RealFft(std::size_t n)
        : n_(n),
          in_(fftw_alloc_real(n), fftw_free),
          out_(fftw_alloc_complex(n / 2 + 1), fftw_free) {
        if (!in_ || !out_) throw Error("FFT buffer allocation failed");
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_.get(), out_.get(), FFTW_ESTIMATE);
        if (!plan_) throw Error("FFT planning failed");
    }
    ~RealFft() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    double* input() { return in_.get(); }
    void execute() { fftw_execute(plan_); }
    double magnitude_squared(std::size_t k) const {
        const auto& c = out_.get()[k];
        return c[0] * c[0] + c[1] * c[1];
    }

private:
    std::size_t n_;
    std::unique_ptr<double, decltype(&fftw_free)> in_;
    std::unique_ptr<fftw_complex, decltype(&fftw_free)> out_;
    fftw_plan plan_ = nullptr;
};

}  // namespace

TfdMatrix spectrogram(const Eigen::VectorXd& signal, const SpectrogramParams& params,
                      double sample_rate) {
    const auto len = params.window_len;
    const auto nfft = params.nfft;
    if (len == 0 || params.hop == 0) throw ValidationError("window length and hop must be positive");
    if (len > nfft) throw ValidationError("window length exceeds nfft");
    if (static_cast<std::size_t>(signal.size()) < len)
        throw DataError("series is shorter than one window");
    if (!(sample_rate >= 0.0)) throw ValidationError("sample rate must be non-negative");
    const double fs = sample_rate > 0.0 ? sample_rate : 1.0;

    const auto slices = (static_cast<std::size_t>(signal.size()) - len) / params.hop + 1;
    const auto bins = nfft / 2 + 1;
    const Eigen::VectorXd window = make_window(params.window, len);
    const double norm = static_cast<double>(nfft) * window.squaredNorm();

    TfdMatrix tfd;
    tfd.params = params;
    tfd.sample_rate = fs;
    tfd.power.resize(static_cast<Eigen::Index>(slices), static_cast<Eigen::Index>(bins));
    tfd.time_axis.resize(static_cast<Eigen::Index>(slices));
    tfd.freq_axis.resize(static_cast<Eigen::Index>(bins));
    for (std::size_t k = 0; k < bins; ++k)
        tfd.freq_axis(static_cast<Eigen::Index>(k)) =
            static_cast<double>(k) * fs / static_cast<double>(nfft);

    RealFft fft(nfft);
    for (std::size_t t = 0; t < slices; ++t) {
        const auto start = t * params.hop;
        double* in = fft.input();
        for (std::size_t i = 0; i < nfft; ++i)
            in[i] = i < len ? signal(static_cast<Eigen::Index>(start + i)) *
                                  window(static_cast<Eigen::Index>(i))
                            : 0.0;
        fft.execute();
        for (std::size_t k = 0; k < bins; ++k) {
            const bool edge = k == 0 || (nfft % 2 == 0 && k == nfft / 2);
            tfd.power(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) =
                (edge ? 1.0 : 2.0) * fft.magnitude_squared(k) / norm;
        }
        tfd.time_axis(static_cast<Eigen::Index>(t)) =
            (static_cast<double>(start) + 0.5 * static_cast<double>(len)) / fs;
    }
    return tfd;
}

Spectrum collapse_spectrum(const TfdMatrix& tfd) {
    if (tfd.power.rows() == 0) throw DataError("empty time-frequency matrix");
    return {tfd.power.colwise().mean().transpose(), tfd.freq_axis};
}

double band_power_ratio(const Spectrum& spectrum, double split_freq) {
    const auto& f = spectrum.freq_axis;
    if (f.size() == 0 || f.size() != spectrum.power.size())
        throw ValidationError("spectrum power and frequency axis differ in length");
    if (!(split_freq >= f(0) && split_freq < f(f.size() - 1)))
        throw ValidationError("split frequency lies outside the frequency axis");
    double high = 0.0;
    double total = 0.0;
    for (Eigen::Index k = 0; k < f.size(); ++k) {
        total += spectrum.power(k);
        if (f(k) > split_freq) high += spectrum.power(k);
    }
    if (!(total > 0.0)) throw DataError("band power ratio of an empty spectrum");
    return high / total;
}

double spectral_similarity(const Spectrum& a, const Spectrum& b) {
    if (a.power.size() != b.power.size() || a.power.size() < 2)
        throw ValidationError("spectral similarity needs equal-length spectra");
    auto log_power = [](const Eigen::VectorXd& p) {
        return p.unaryExpr([](double v) { return std::log10(std::max(v, kLogFloor)); }).eval();
    };
    const Eigen::VectorXd la = log_power(a.power);
    const Eigen::VectorXd lb = log_power(b.power);
    const Eigen::VectorXd ca = la.array() - la.mean();
    const Eigen::VectorXd cb = lb.array() - lb.mean();
    const double denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
    if (denom == 0.0) throw DataError("spectral similarity of a constant spectrum");
    return ca.dot(cb) / denom;
}

std::string format_tfd(const TfdMatrix& tfd) {
    std::string out = "# window=" + std::string(to_string(tfd.params.window)) +
                      " window_len=" + std::to_string(tfd.params.window_len) +
                      " hop=" + std::to_string(tfd.params.hop) +
                      " nfft=" + std::to_string(tfd.params.nfft) +
                      " sample_rate=" + format_double(tfd.sample_rate) + "\n";
    out += "time_s";
    for (Eigen::Index k = 0; k < tfd.freq_axis.size(); ++k)
        out += "," + format_double(tfd.freq_axis(k));
    out += '\n';
    for (Eigen::Index t = 0; t < tfd.power.rows(); ++t) {
        out += format_double(tfd.time_axis(t));
        for (Eigen::Index k = 0; k < tfd.power.cols(); ++k) out += "," + format_double(tfd.power(t, k));
        out += '\n';
    }
    return out;
}

std::string format_spectrum(const Spectrum& spectrum) {
    std::string out = "freq_hz,power\n";
    for (Eigen::Index k = 0; k < spectrum.power.size(); ++k)
        out += format_double(spectrum.freq_axis(k)) + "," + format_double(spectrum.power(k)) + "\n";
    return out;
}

}  // namespace ctwin
