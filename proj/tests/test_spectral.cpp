#include <doctest.h>

#include <numbers>

#include "support.hpp"

using namespace ctwin;
using namespace testing_support;

namespace {

Eigen::VectorXd tone(std::size_t n, double freq, double fs, double amp = 1.0, double phase = 0.0) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        x(static_cast<Eigen::Index>(i)) = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / fs + phase);
    return x;
}

Eigen::VectorXd white(std::size_t n, std::uint64_t seed) {
    NoiseSpec ns;
    ns.kind = NoiseKind::Gaussian;
    ns.scale = Eigen::VectorXd::Ones(1);
    ns.seed = seed;
    return noise_realization(ns, n, 1).col(0);
}

}  // namespace

TEST_CASE("spectrogram: zero signal") {
    const auto tfd = spectrogram(Eigen::VectorXd::Zero(1024));
    CHECK(tfd.slices() == 7);
    CHECK(tfd.bins() == 129);
    CHECK(tfd.power.isZero(0.0));
}

TEST_CASE("spectrogram: axes") {
    SpectrogramParams p{128, 64, 256, WindowType::Hann};
    const auto tfd = spectrogram(Eigen::VectorXd::Ones(1000), p, 20000.0);
    CHECK(tfd.slices() == 14);
    CHECK(tfd.bins() == 129);
    CHECK(tfd.freq_axis(1) == doctest::Approx(20000.0 / 256));
    CHECK(tfd.freq_axis(128) == doctest::Approx(10000.0));
    CHECK(tfd.time_axis(0) == doctest::Approx(64.0 / 20000));
    CHECK(tfd.time_axis(1) - tfd.time_axis(0) == doctest::Approx(64.0 / 20000));
}

TEST_CASE("spectrogram: bin-centred sinusoid peaks at its bin") {
    const double fs = 1000.0;
    SpectrogramParams p{256, 128, 256, WindowType::Rectangular};
    for (int bin : {1, 17, 64, 127}) {
        const double f0 = bin * fs / 256;
        const auto tfd = spectrogram(tone(4096, f0, fs, 1.0, 0.3), p, fs);
        for (std::size_t t = 0; t < tfd.slices(); ++t) {
            Eigen::Index peak = 0;
            tfd.power.row(static_cast<Eigen::Index>(t)).maxCoeff(&peak);
            CHECK(peak == bin);
        }
        // unit-amplitude sine carries mean-square 1/2, all of it in one bin
        CHECK(tfd.power(0, bin) == doctest::Approx(0.5).epsilon(1e-9));
    }
}

TEST_CASE("spectrogram: off-bin sinusoid peaks within one bin under every window") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(2.0, 120.0);
    for (auto w : {WindowType::Rectangular, WindowType::Hann, WindowType::Hamming}) {
        for (int i = 0; i < 20; ++i) {
            const double bin = u(rng);
            const auto tfd = spectrogram(tone(2048, bin / 256.0, 1.0), {256, 128, 256, w});
            const auto spec = collapse_spectrum(tfd);
            Eigen::Index peak = 0;
            spec.power.maxCoeff(&peak);
            CHECK(std::abs(static_cast<double>(peak) - bin) <= 1.0);
        }
    }
}

TEST_CASE("spectrogram: each slice carries the windowed frame energy") {
    const auto x = white(5000, 3);
    for (auto w : {WindowType::Rectangular, WindowType::Hann, WindowType::Hamming}) {
        for (std::size_t nfft : {256u, 300u, 511u}) {
            SpectrogramParams p{200, 90, nfft, w};
            const auto tfd = spectrogram(x, p);
            const auto win = make_window(w, 200);
            for (std::size_t t = 0; t < tfd.slices(); ++t) {
                const Eigen::VectorXd frame = x.segment(static_cast<Eigen::Index>(t * 90), 200).cwiseProduct(win);
                const double expected = frame.squaredNorm() / win.squaredNorm();
                CHECK(tfd.power.row(static_cast<Eigen::Index>(t)).sum() == doctest::Approx(expected).epsilon(1e-10));
            }
        }
    }
    // rectangular frames tiling the signal recover its mean square
    SpectrogramParams tiles{250, 250, 256, WindowType::Rectangular};
    const auto tfd = spectrogram(x, tiles);
    CHECK(tfd.power.sum() / static_cast<double>(tfd.slices()) == doctest::Approx(x.squaredNorm() / 5000.0).epsilon(1e-10));
}

TEST_CASE("spectrogram: quadratic in amplitude, invariant to time reversal of a stationary tone") {
    const auto x = white(3000, 4);
    const auto a = spectrogram(x);
    const auto b = spectrogram(3.0 * x);
    CHECK((b.power - 9.0 * a.power).cwiseAbs().maxCoeff() <= 1e-12 * b.power.maxCoeff());
    // reversing a frame conjugates its DFT up to a phase, leaving |X|^2 intact
    SpectrogramParams p{256, 256, 256, WindowType::Rectangular};
    const Eigen::VectorXd frame = x.head(256);
    const Eigen::VectorXd rev = frame.reverse();
    const auto fa = spectrogram(frame, p);
    const auto fb = spectrogram(rev, p);
    CHECK((fa.power - fb.power).cwiseAbs().maxCoeff() <= 1e-12 * fa.power.maxCoeff());
}

TEST_CASE("spectrogram: parameter errors") {
    CHECK_THROWS_AS(spectrogram(Eigen::VectorXd::Zero(100)), DataError);
    CHECK_THROWS_AS(spectrogram(Eigen::VectorXd::Zero(1000), {256, 0, 256, WindowType::Hann}), ValidationError);
    CHECK_THROWS_AS(spectrogram(Eigen::VectorXd::Zero(1000), {300, 100, 256, WindowType::Hann}), ValidationError);
    CHECK_THROWS_AS(parse_window_type("kaiser"), ValidationError);
    CHECK(parse_window_type("hamming") == WindowType::Hamming);
}

TEST_CASE("make_window: periodic Hann and Hamming") {
    const auto h = make_window(WindowType::Hann, 8);
    CHECK(h(0) == 0.0);
    CHECK(h(4) == doctest::Approx(1.0));
    CHECK(h(2) == doctest::Approx(0.5));
    const auto m = make_window(WindowType::Hamming, 8);
    CHECK(m(0) == doctest::Approx(0.08));
    CHECK(make_window(WindowType::Rectangular, 5) == Eigen::VectorXd::Ones(5));
}

TEST_CASE("collapse_spectrum: white noise is flat, single slice is itself") {
    const auto tfd = spectrogram(white(200000, 5), {256, 128, 256, WindowType::Hann});
    const auto spec = collapse_spectrum(tfd);
    const Eigen::VectorXd inner = spec.power.segment(1, 127);
    CHECK(inner.maxCoeff() / inner.minCoeff() < 1.5);
    const auto one = spectrogram(white(256, 6));
    REQUIRE(one.slices() == 1);
    CHECK(collapse_spectrum(one).power == one.power.row(0).transpose());
}

TEST_CASE("band_power_ratio: extremes and a two-tone mix") {
    const double fs = 1000.0;
    SpectrogramParams p{256, 128, 256, WindowType::Hann};
    const auto low = collapse_spectrum(spectrogram(tone(8192, 50.0, fs), p, fs));
    const auto high = collapse_spectrum(spectrogram(tone(8192, 400.0, fs), p, fs));
    Spectrum below{Eigen::VectorXd::Zero(5), Eigen::VectorXd::LinSpaced(5, 0.0, 4.0)};
    below.power(1) = 2.0;
    CHECK(band_power_ratio(below, 2.0) == 0.0);
    Spectrum above = below;
    above.power.setZero();
    above.power(3) = 1.0;
    CHECK(band_power_ratio(above, 2.0) == 1.0);
    CHECK(band_power_ratio(low, 250.0) < 1e-6);
    CHECK(band_power_ratio(high, 250.0) > 1.0 - 1e-6);
    const auto mix = collapse_spectrum(spectrogram(tone(8192, 50.0, fs) + tone(8192, 400.0, fs), p, fs));
    CHECK(std::abs(band_power_ratio(mix, 250.0) - 0.5) <= 0.02);
    CHECK_THROWS_AS(band_power_ratio(mix, 600.0), ValidationError);
    Spectrum empty{Eigen::VectorXd::Zero(5), Eigen::VectorXd::LinSpaced(5, 0.0, 4.0)};
    CHECK_THROWS_AS(band_power_ratio(empty, 1.0), DataError);
}

TEST_CASE("spectral_similarity: identity, mirror and paired processes") {
    const auto a = collapse_spectrum(spectrogram(white(20000, 7) + tone(20000, 0.1, 1.0, 3.0)));
    CHECK(spectral_similarity(a, a) == doctest::Approx(1.0));
    Spectrum mirror = a;
    mirror.power = a.power.reverse();
    CHECK(spectral_similarity(a, mirror) < 1.0);

    const CausalGraph graph(default_labels(2), 2, {{1, 0, 1}, {0, 1, 1}, {1, 0, 2}});
    CouplingSet slow(2, 2), fast(2, 2);
    slow(1, 0, 1) = 0.7;
    slow(1, 1, 0) = 0.7;
    fast(1, 0, 1) = 0.7;
    fast(1, 1, 0) = -0.7;
    auto spectrum_of = [&](const CouplingSet& k, std::uint64_t seed) {
        NoiseSpec n;
        n.scale = Eigen::VectorXd::Ones(2);
        n.seed = seed;
        return collapse_spectrum(spectrogram(generate_series(graph, k, n, 20000).channel(0)));
    };
    const auto s1 = spectrum_of(slow, 1), s2 = spectrum_of(slow, 2), f1 = spectrum_of(fast, 3);
    CHECK(spectral_similarity(s1, s2) > spectral_similarity(s1, f1));
    Spectrum flat{Eigen::VectorXd::Ones(4), Eigen::VectorXd::LinSpaced(4, 0, 3)};
    CHECK_THROWS_AS(spectral_similarity(flat, flat), DataError);
}

TEST_CASE("format_tfd/parse_tfd round trip") {
    const auto tfd = spectrogram(white(1000, 8), {128, 64, 128, WindowType::Hamming}, 500.0);
    const auto back = parse_tfd(format_tfd(tfd));
    CHECK(back.power == tfd.power);
    CHECK(back.time_axis == tfd.time_axis);
    CHECK(back.freq_axis == tfd.freq_axis);
    CHECK(back.params.window == WindowType::Hamming);
    CHECK(back.params.window_len == 128);
}
