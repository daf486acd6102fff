#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ctwin/pipeline.hpp"

namespace py = pybind11;
using namespace ctwin;

namespace {

using Matrices = std::vector<Eigen::MatrixXd>;

CouplingSet to_couplings(const Matrices& m) { return CouplingSet(m); }

MultichannelSeries to_series(const Eigen::MatrixXd& data, double sample_rate) {
    return MultichannelSeries(data, sample_rate);
}

py::dict fit_dict(const FitReport& r) {
    py::dict d;
    d["couplings"] = r.couplings.matrices();
    d["standard_errors"] = r.standard_errors.matrices();
    d["residual_variance"] = r.residual_variance;
    d["rank_deficient_nodes"] = r.rank_deficient_nodes;
    return d;
}

// same keys as the "learner" block of a config file
NetworkConfig config_from(const py::dict& options) {
    const auto text = py::cast<std::string>(py::module_::import("json").attr("dumps")(options));
    auto cfg = parse_network_config(text);
    cfg.validate();
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_ctwin, m) {
    m.doc() = "Causal digital twin core: SVAR simulation, coupling learners, spectra";
    m.attr("__version__") = kToolVersion;

    static py::exception<Error> base_error(m, "CtwinError", PyExc_RuntimeError);
    static py::exception<ValidationError> validation_error(m, "ValidationError", base_error.ptr());
    static py::exception<DataError> data_error(m, "DataError", base_error.ptr());
    static py::exception<DivergenceError> divergence_error(m, "DivergenceError", base_error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ValidationError& e) {
            py::set_error(validation_error, e.what());
        } catch (const DataError& e) {
            py::set_error(data_error, e.what());
        } catch (const DivergenceError& e) {
            py::set_error(divergence_error, e.what());
        } catch (const Error& e) {
            py::set_error(base_error, e.what());
        }
    });

    py::class_<CausalGraph>(m, "CausalGraph")
        .def(py::init([](std::vector<std::string> labels, std::size_t lag_order,
                         const std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>& edges) {
                 std::vector<LaggedEdge> e;
                 for (auto [c, f, l] : edges) e.push_back({c, f, l});
                 return CausalGraph(std::move(labels), lag_order, std::move(e));
             }),
             py::arg("labels"), py::arg("lag_order"), py::arg("edges"),
             "Edges are (cause, effect, lag) with 0-based node indices.")
        .def_property_readonly("labels", &CausalGraph::labels)
        .def_property_readonly("lag_order", &CausalGraph::lag_order)
        .def_property_readonly("node_count", &CausalGraph::node_count)
        .def_property_readonly("edges",
                               [](const CausalGraph& g) {
                                   std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> out;
                                   for (const auto& e : g.edges()) out.emplace_back(e.cause, e.effect, e.lag);
                                   return out;
                               })
        .def("to_json", &dump_graph)
        .def("__repr__", [](const CausalGraph& g) {
            return "<CausalGraph nodes=" + std::to_string(g.node_count()) +
                   " edges=" + std::to_string(g.edges().size()) + " lag_order=" + std::to_string(g.lag_order()) + ">";
        });

    m.def("load_graph", [](const std::filesystem::path& p) { return load_graph(p); });
    m.def("parse_graph", [](const std::string& text) { return parse_graph(text); });
    m.def("validate_graph", [](const CausalGraph& g) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& v : validate_graph(g).violations) out.emplace_back(to_string(v.kind), v.message);
        return out;
    }, "List of (kind, message) violations; empty when the graph is valid.");

    m.def("flatten", [](const Matrices& k, const CausalGraph& g) { return flatten(to_couplings(k), ParamLayout(g)); });
    m.def("unflatten", [](const Eigen::VectorXd& v, const CausalGraph& g) {
        return unflatten(v, ParamLayout(g)).matrices();
    });
    m.def("layout_names", [](const CausalGraph& g) {
        const ParamLayout layout(g);
        std::vector<std::string> out;
        for (const auto& e : layout.entries()) out.push_back(coupling_name(g, e));
        return out;
    });

    m.def("simulate_step", [](const Matrices& k, const Eigen::VectorXd& y_now, const LagWindow& lags) {
        return simulate_step(to_couplings(k), y_now, lags);
    }, py::arg("couplings"), py::arg("y_now"), py::arg("lags"));

    m.def("companion_spectral_radius", [](const Matrices& k) { return companion_spectral_radius(to_couplings(k)); });

    m.def("generate_series",
          [](const CausalGraph& g, const Matrices& k, const Eigen::VectorXd& noise_scale, std::size_t n_samples,
             std::uint64_t seed, const std::string& noise_kind, std::optional<std::size_t> burn_in) {
              NoiseSpec n;
              n.kind = parse_noise_kind(noise_kind);
              n.scale = noise_scale;
              n.seed = seed;
              GenerateOptions opt;
              opt.burn_in = burn_in;
              return generate_series(g, to_couplings(k), n, n_samples, opt).data();
          },
          py::arg("graph"), py::arg("couplings"), py::arg("noise_scale"), py::arg("n_samples"),
          py::arg("seed") = 0, py::arg("noise_kind") = "laplace", py::arg("burn_in") = py::none());

    m.def("whatif_run",
          [](const Matrices& k, const Eigen::MatrixXd& driver, const std::vector<std::size_t>& targets,
             bool closed_loop) {
              WhatIfOptions opt;
              opt.closed_loop = closed_loop;
              return whatif_run(to_couplings(k), to_series(driver, 0.0), targets, opt).data();
          },
          py::arg("couplings"), py::arg("driver"), py::arg("targets"), py::arg("closed_loop") = false);

    m.def("counterfactual_remove",
          [](const Matrices& k, const CausalGraph& g,
             const std::vector<std::tuple<std::size_t, std::optional<std::size_t>, std::optional<std::size_t>>>& removals) {
              std::vector<Removal> r;
              for (auto [cause, effect, lag] : removals) r.push_back({cause, effect, lag});
              return counterfactual_remove(to_couplings(k), g, r).matrices();
          },
          py::arg("couplings"), py::arg("graph"), py::arg("removals"),
          "Removals are (cause, effect or None, lag or None).");

    m.def("ols_svar_fit", [](const Eigen::MatrixXd& data, const CausalGraph& g, double tol) {
        return fit_dict(ols_svar_fit(to_series(data, 0.0), g, tol));
    }, py::arg("data"), py::arg("graph"), py::arg("rank_tolerance") = 1e-10);

    m.def("train_online",
          [](const Eigen::MatrixXd& data, const CausalGraph& g, const py::dict& options) {
              const auto cfg = config_from(options);
              TrainResult r;
              {
                  py::gil_scoped_release release;
                  r = train_online(to_series(data, 0.0), g, cfg);
              }
              py::dict d;
              d["estimate"] = r.estimate.matrices();
              d["estimate_raw"] = to_raw_units(r.estimate, r.channel_scale).matrices();
              d["trajectory"] = r.trajectory;
              d["error_norm"] = r.error_norm;
              d["channel_scale"] = r.channel_scale;
              d["first_sample"] = r.first_sample;
              return d;
          },
          py::arg("data"), py::arg("graph"), py::arg("options") = py::dict());

    m.def("direction_test", [](const Eigen::VectorXd& x, const Eigen::VectorXd& y, double threshold) {
        const auto v = direction_test(x, y, threshold);
        py::dict d;
        d["statistic_forward"] = v.statistic_forward;
        d["statistic_reverse"] = v.statistic_reverse;
        d["threshold"] = v.threshold;
        d["verdict"] = to_string(v.verdict);
        return d;
    }, py::arg("x"), py::arg("y"), py::arg("threshold") = 0.1);

    m.def("variance_ratios", [](const Eigen::MatrixXd& data) { return variance_ratios(to_series(data, 0.0)); });

    m.def("spectrogram",
          [](const Eigen::VectorXd& signal, std::size_t window_len, std::size_t hop, std::optional<std::size_t> nfft,
             const std::string& window, double sample_rate) {
              const SpectrogramParams p{window_len, hop, nfft.value_or(window_len), parse_window_type(window)};
              const auto t = spectrogram(signal, p, sample_rate);
              py::dict d;
              d["power"] = t.power;
              d["time_axis"] = t.time_axis;
              d["freq_axis"] = t.freq_axis;
              return d;
          },
          py::arg("signal"), py::arg("window_len") = 256, py::arg("hop") = 128, py::arg("nfft") = py::none(),
          py::arg("window") = "hann", py::arg("sample_rate") = 0.0);

    m.def("band_power_ratio", [](const Eigen::VectorXd& power, const Eigen::VectorXd& freq, double split) {
        return band_power_ratio(Spectrum{power, freq}, split);
    }, py::arg("power"), py::arg("freq_axis"), py::arg("split_freq"));

    m.def("spectral_similarity", [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return spectral_similarity(Spectrum{a, Eigen::VectorXd::Zero(a.size())}, Spectrum{b, Eigen::VectorXd::Zero(b.size())});
    });

    m.def("run_config",
          [](const std::filesystem::path& config, std::optional<std::filesystem::path> output_dir) {
              auto cfg = load_config(config);
              if (output_dir) cfg.output_dir = *output_dir;
              py::gil_scoped_release release;
              run(cfg);
              return cfg.output_dir;
          },
          py::arg("config"), py::arg("output_dir") = py::none(),
          "Runs the full pipeline and returns the output directory.");
}
