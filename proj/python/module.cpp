#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <optional>
#include <sstream>

#include "experiment.hpp"
#include "loopsoup/graph_io.hpp"
#include "loopsoup/green.hpp"
#include "loopsoup/loops.hpp"
#include "loopsoup/soup.hpp"

namespace py = pybind11;
using namespace loopsoup;

namespace {

Orientation orientation_of(const std::string& name) {
  if (name == "oriented") return Orientation::Oriented;
  if (name == "unoriented") return Orientation::Unoriented;
  throw py::value_error("orientation must be 'oriented' or 'unoriented', got '" + name + "'");
}

std::vector<EdgeIndex> indices_of(const OrientedMultigraph& g, const std::vector<int>& ids) {
  std::vector<EdgeIndex> out;
  for (int id : ids) out.push_back(g.index_of_id(id));
  return out;
}

Domain builtin_domain(const std::string& spec, int g, int killing, std::optional<std::vector<VertexId>> vertices,
                      const std::vector<int>& removed) {
  auto b = make_builtin(spec, g, killing);
  return Domain(b.graph, vertices.value_or(b.core), indices_of(*b.graph, removed));
}

py::object fraction(const Rational& q) {
  static py::object Fraction = py::module_::import("fractions").attr("Fraction");
  return Fraction(to_string(q));
}

py::list enumerate(const Domain& d, int L_max, const std::string& orientation) {
  const auto catalog = enumerate_loops(d, L_max, orientation_of(orientation));
  py::list out;
  for (const auto& c : catalog.classes) {
    py::dict entry;
    entry["edges"] = edge_ids(d.graph(), c.canonical);
    entry["length"] = c.n();
    entry["multiplicity"] = c.multiplicity;
    entry["mass"] = fraction(c.mass);
    out.append(entry);
  }
  return out;
}

std::vector<std::vector<int>> sample(const Domain& d, const std::string& orientation, double intensity,
                                     std::uint64_t seed) {
  ExactSoupSampler sampler(d, orientation_of(orientation), intensity);
  Rng rng(seed, "python");
  std::vector<std::vector<int>> out;
  for (const auto& loop : sampler.sample(rng).loops) out.push_back(edge_ids(d.graph(), loop));
  return out;
}

py::tuple run_config(const std::string& text, const std::string& out, bool parallel) {
  std::istringstream in(text);
  cli::RunResult result;
  {
    auto config = cli::Config::parse(in, "<python>");
    py::gil_scoped_release release;
    result = cli::run(config, {std::filesystem::path(out), parallel, true});
  }
  return py::make_tuple(py::module_::import("json").attr("loads")(result.report.dump()), result.failed);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  py::register_exception<cli::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<GraphError>(m, "GraphError", PyExc_ValueError);
  py::register_exception<BudgetExceeded>(m, "BudgetExceeded", PyExc_RuntimeError);

  py::class_<Domain>(m, "Domain")
      .def_static("builtin", &builtin_domain, py::arg("spec"), py::arg("g") = 3, py::arg("killing") = 1,
                  py::arg("vertices") = std::nullopt, py::arg("removed") = std::vector<int>{},
                  "Domain on a named graph shape; defaults to its core vertices.")
      .def_property_readonly("vertices", &Domain::vertices)
      .def_property_readonly("g", &Domain::g)
      .def("__len__", &Domain::size)
      .def("edge", [](const Domain& d, int id) {
        const auto e = d.graph().index_of_id(id);
        return py::make_tuple(d.graph().tail(e), d.graph().head(e));
      }, "(tail, head) of the edge with this id.");

  m.def("enumerate_loops", &enumerate, py::arg("domain"), py::arg("L_max"), py::arg("orientation") = "oriented",
        "Loop classes of length <= L_max with exact masses.");
  m.def("green_function", [](const Domain& d) { return green_function(d).matrix(); }, py::arg("domain"));
  m.def("sample_soup", &sample, py::arg("domain"), py::arg("orientation") = "oriented", py::arg("intensity") = 1.0,
        py::arg("seed") = 1, "One exact soup sample; each loop is a list of edge ids.");
  m.def("run_config", &run_config, py::arg("text"), py::arg("out"), py::arg("parallel") = false,
        "Runs a config as the CLI does. Returns (report, failed).");
}
