#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <vector>

#include "w2fair/audit.hpp"
#include "w2fair/cli.hpp"
#include "w2fair/distribution.hpp"
#include "w2fair/regularizer.hpp"
#include "w2fair/version.hpp"

namespace py = pybind11;

using namespace w2fair;

PYBIND11_MODULE(_w2fair, m) {
  m.doc() = "group-conditional Wasserstein-2 training and audit toolkit";
  m.attr("__version__") = kVersion;

  py::class_<OutputGrid>(m, "OutputGrid")
      .def_readonly("lo", &OutputGrid::lo)
      .def_readonly("delta", &OutputGrid::delta)
      .def_readonly("steps", &OutputGrid::steps)
      .def("point", &OutputGrid::point, py::arg("j"))
      .def("hi", &OutputGrid::hi)
      .def("cell", &OutputGrid::cell, py::arg("x"));

  py::class_<DiscreteCdf>(m, "DiscreteCdf")
      .def_readonly("grid", &DiscreteCdf::grid)
      .def_readonly("values", &DiscreteCdf::values)
      .def_readonly("count", &DiscreteCdf::count);

  m.def(
      "build_grid",
      [](const std::vector<double>& samples, int steps) {
        return build_grid(samples, steps);
      },
      py::arg("samples"), py::arg("steps"));
  m.def(
      "empirical_cdf",
      [](const std::vector<double>& samples, const OutputGrid& grid) {
        return empirical_cdf(samples, grid);
      },
      py::arg("samples"), py::arg("grid"));
  m.def("cdf_value_at", &cdf_value_at, py::arg("cdf"), py::arg("x"));
  m.def("inverse_cdf", &inverse_cdf, py::arg("cdf"), py::arg("p"));
  m.def("correction", &correction, py::arg("target"), py::arg("source"),
        py::arg("x"));
  m.def(
      "w2_distance",
      [](const std::vector<double>& samples0, const std::vector<double>& samples1,
         int steps) { return w2_distance(samples0, samples1, steps); },
      py::arg("samples0"), py::arg("samples1"), py::arg("steps"));

  py::class_<GroupCdfPair>(m, "GroupCdfPair")
      .def_readonly("cdf0", &GroupCdfPair::cdf0)
      .def_readonly("cdf1", &GroupCdfPair::cdf1)
      .def_readonly("n0", &GroupCdfPair::n0)
      .def_readonly("n1", &GroupCdfPair::n1);

  // Group-conditional CDFs on one shared grid; n0/n1 default to the sample
  // counts when not given.
  m.def(
      "group_cdfs",
      [](const std::vector<double>& samples0, const std::vector<double>& samples1,
         int steps, long n0, long n1) {
        std::vector<double> all(samples0);
        all.insert(all.end(), samples1.begin(), samples1.end());
        const OutputGrid grid = build_grid(all, steps);
        GroupCdfPair pair;
        pair.cdf0 = empirical_cdf(samples0, grid);
        pair.cdf1 = empirical_cdf(samples1, grid);
        pair.n0 = n0 > 0 ? n0 : static_cast<long>(samples0.size());
        pair.n1 = n1 > 0 ? n1 : static_cast<long>(samples1.size());
        return pair;
      },
      py::arg("samples0"), py::arg("samples1"), py::arg("steps"),
      py::arg("n0") = 0, py::arg("n1") = 0);
  m.def(
      "pseudo_grad",
      [](double output, int group, const GroupCdfPair& cdfs, double tau_step) {
        return pseudo_grad(output, group, cdfs, tau_step).value;
      },
      py::arg("output"), py::arg("group"), py::arg("cdfs"), py::arg("tau_step"));

  m.def(
      "audit_json",
      [](const std::vector<int>& preds, const std::vector<int>& labels,
         const std::vector<int>& groups, int num_classes) {
        return audit_report_to_json(
            build_audit_report(preds, labels, groups, num_classes));
      },
      py::arg("preds"), py::arg("labels"), py::arg("groups"),
      py::arg("num_classes"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"),
      "run one w2fair invocation in-process; returns (code, stdout, stderr)");
}
