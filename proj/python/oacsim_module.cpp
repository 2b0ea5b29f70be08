#include "oac/analysis.hpp"
#include "oac/errors.hpp"
#include "oac/harness.hpp"
#include "oac/io.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

namespace py = pybind11;

namespace {

oac::Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size();
    oac::Matrix m(n, n == 0 ? 0 : rows.front().size());
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != m.cols()) throw oac::ConfigError("ragged matrix");
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
    }
    return m;
}

std::string run_json(const std::string& scenario_json) {
    const auto s = oac::scenario_from_json(oac::json::parse(scenario_json));
    const auto out = oac::run(s, {.keep_trials = false, .write_traces = false,
                                  .write_report = false});
    return oac::aggregate_to_json(out.aggregate, s).dump();
}

std::string validate_json(const std::string& scenario_json) {
    const auto s = oac::scenario_from_json(oac::json::parse(scenario_json));
    return oac::validation_to_json(oac::validate(s)).dump();
}

std::string compare_json(const std::string& a_json, const std::string& b_json,
                         const std::string& sweep_field) {
    const auto a = oac::scenario_from_json(oac::json::parse(a_json));
    const auto b = oac::scenario_from_json(oac::json::parse(b_json));
    return oac::compare_to_json(oac::compare(a, b, sweep_field)).dump();
}

std::string moments_json(const std::string& channel_json, const std::string& topology_json,
                         const std::vector<double>& x, long draws, std::uint64_t seed) {
    const auto topo = oac::topology_from_json(oac::json::parse(topology_json));
    const auto model =
        oac::channel_from_json(oac::json::parse(channel_json), topo.n_agents());
    oac::Stream rng(seed);
    return oac::moment_report_to_json(
               oac::estimate_conditional_moments(model, topo, x, draws, rng))
        .dump();
}

std::vector<std::vector<double>> expected_laplacian_py(const std::string& channel_json,
                                                       const std::string& topology_json) {
    const auto topo = oac::topology_from_json(oac::json::parse(topology_json));
    const auto model =
        oac::channel_from_json(oac::json::parse(channel_json), topo.n_agents());
    const auto lap = oac::expected_laplacian(model, topo);
    std::vector<std::vector<double>> out(topo.n_agents(),
                                         std::vector<double>(topo.n_agents()));
    for (int i = 0; i < topo.n_agents(); ++i)
        for (int j = 0; j < topo.n_agents(); ++j) out[i][j] = lap.l_bar(i, j);
    return out;
}

} // namespace

PYBIND11_MODULE(_oacsim, m) {
    m.doc() = "Average consensus over noisy non-coherent over-the-air aggregation: "
              "simulator core";

    m.def("fiedler",
          [](const std::vector<std::vector<double>>& l) { return oac::fiedler(to_matrix(l)); },
          py::arg("laplacian"),
          "Second-smallest eigenvalue of a symmetric matrix.");
    m.def("lyapunov",
          [](const std::vector<double>& x) { return oac::lyapunov(x); }, py::arg("x"),
          "Squared distance of the state vector from consensus.");
    m.def("run_json", &run_json, py::arg("scenario_json"),
          "Run a scenario (JSON string) and return the aggregate report as JSON.");
    m.def("validate_json", &validate_json, py::arg("scenario_json"),
          "Admissibility and connectivity verdicts for a scenario, as JSON.");
    m.def("compare_json", &compare_json, py::arg("scenario_a_json"),
          py::arg("scenario_b_json"), py::arg("sweep_field"),
          "Paired run of two scenarios differing in one field, as JSON.");
    m.def("moments_json", &moments_json, py::arg("channel_json"), py::arg("topology_json"),
          py::arg("x"), py::arg("draws") = 1000000, py::arg("seed") = 1234,
          "Monte Carlo moment report for a frozen state, as JSON.");
    m.def("expected_laplacian", &expected_laplacian_py, py::arg("channel_json"),
          py::arg("topology_json"),
          "Expected Laplacian of the aggregation dynamics as a nested list.");
}
