#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "occ/cli.hpp"
#include "occ/cpath.hpp"
#include "occ/errors.hpp"
#include "occ/io.hpp"
#include "occ/models.hpp"
#include "occ/periodic.hpp"
#include "occ/steady.hpp"
#include "occ/value.hpp"

namespace py = pybind11;
using namespace occ;

namespace {

std::map<std::string, double> params_dict(const ModelParams& p) {
  std::map<std::string, double> d;
  for (std::size_t i = 0; i < p.names.size(); ++i) d[p.names[i]] = p.values[i];
  return d;
}

CanonicalSystem with_dict(const CanonicalSystem& sys, const std::map<std::string, double>& kv) {
  ModelParams p = sys.params();
  for (const auto& [k, v] : kv) p.set(k, v);
  return sys.with_params(p);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Canonical systems, steady and periodic states, canonical paths and Skiba points";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<NoConvergence>(m, "NoConvergence", base.ptr());
  py::register_exception<SppViolation>(m, "SppViolation", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<NoSkiba>(m, "NoSkiba", base.ptr());
  py::register_exception<DegenerateOrbit>(m, "DegenerateOrbit", base.ptr());

  py::class_<CanonicalSystem>(m, "System")
      .def_property_readonly("model", [](const CanonicalSystem& s) { return s.model().name(); })
      .def_property_readonly("params", [](const CanonicalSystem& s) { return params_dict(s.params()); })
      .def_property_readonly("nodes", &CanonicalSystem::nodes)
      .def_property_readonly("states", &CanonicalSystem::states)
      .def_property_readonly("n_u", &CanonicalSystem::n_u)
      .def_property_readonly("x", [](const CanonicalSystem& s) { return s.fem().nodes; })
      .def("with_params", &with_dict, py::arg("params"))
      .def("residual", &CanonicalSystem::residual)
      .def("jacobian", &CanonicalSystem::jacobian_dense)
      .def("current_value", &CanonicalSystem::current_value)
      .def("__repr__", [](const CanonicalSystem& s) {
        std::ostringstream os;
        os << "<System " << s.model().name() << " nodes=" << s.nodes() << '>';
        return os.str();
      });

  m.def("model_names", &model_names);
  m.def(
      "make_system",
      [](const std::string& name, double lx, int nx, const std::map<std::string, double>& params) {
        return with_dict(make_system(name, lx, nx), params);
      },
      py::arg("model"), py::arg("lx") = 0.0, py::arg("nx") = 0, py::arg("params") = std::map<std::string, double>{});
  m.def("pollution_flat_css", &pollution_flat_css);
  m.def(
      "sloc_flat_seed",
      [](const CanonicalSystem& s, const std::string& which) {
        if (which != "clean" && which != "muddy") throw InvalidArgument("which must be 'clean' or 'muddy'");
        return sloc_flat_seed(s, which == "clean" ? FlatBranch::clean : FlatBranch::muddy);
      },
      py::arg("sys"), py::arg("which") = "clean");
  m.def("newton_css", [](const CanonicalSystem& s, const VectorXd& g) { return newton_css(s, g); });
  m.def("css_value", &css_value);

  py::class_<BranchPoint>(m, "BranchPoint")
      .def_readonly("u", &BranchPoint::u)
      .def_property_readonly("params", [](const BranchPoint& p) { return params_dict(p.params); })
      .def_readonly("j_ca", &BranchPoint::j_ca)
      .def_readonly("n_neg", &BranchPoint::n_neg)
      .def_readonly("stability", &BranchPoint::stability_tag);
  py::class_<Branch>(m, "Branch")
      .def_readonly("param_name", &Branch::param_name)
      .def_readonly("points", &Branch::points)
      .def_readonly("folds", &Branch::folds)
      .def_readonly("failed", &Branch::failed)
      .def_readonly("message", &Branch::message)
      .def("param_values", [](const Branch& b) {
        std::vector<double> v;
        for (const auto& p : b.points) v.push_back(p.param(b.param_name));
        return v;
      });
  m.def(
      "continue_css",
      [](const CanonicalSystem& s, const VectorXd& u, const std::string& param, double ds, int steps, double ds_max,
         double p_min, double p_max) {
        CssContinuation o;
        o.ds = ds;
        o.n_steps = steps;
        o.ds_max = ds_max;
        o.p_min = p_min;
        o.p_max = p_max;
        return continue_css(s, make_branch_point(s, u), param, o);
      },
      py::arg("sys"), py::arg("u"), py::arg("param"), py::arg("ds") = 0.01, py::arg("steps") = 20,
      py::arg("ds_max") = 0.05, py::arg("p_min") = -1e300, py::arg("p_max") = 1e300);

  py::class_<BifurcationEvent>(m, "BifurcationEvent")
      .def_readonly("param", &BifurcationEvent::param)
      .def_property_readonly("kind",
                             [](const BifurcationEvent& e) { return e.kind == BifurcationKind::hopf ? "hopf" : "steady"; })
      .def_readonly("mode", &BifurcationEvent::spatial_mode)
      .def_readonly("mu", &BifurcationEvent::mu)
      .def_readonly("u", &BifurcationEvent::u);
  m.def("detect_bifurcations", &detect_bifurcations, py::arg("sys"), py::arg("branch"), py::arg("ptol") = 1e-3);
  m.def(
      "defect",
      [](const CanonicalSystem& s, const VectorXd& u) { return css_target(s, u, false).defect; },
      "Saddle-point defect of a CSS (0 means the saddle-point property holds).");

  py::class_<CpsOrbit>(m, "Orbit")
      .def_readonly("t", &CpsOrbit::t)
      .def_readonly("u", &CpsOrbit::u)
      .def_readonly("T", &CpsOrbit::T)
      .def("amplitude", &CpsOrbit::amplitude);
  m.def("toy_orbit", &toy_orbit, py::arg("sys"), py::arg("m"));
  m.def(
      "cps_newton", [](const CanonicalSystem& s, const CpsOrbit& o) { return cps_newton(s, o); }, py::arg("sys"),
      py::arg("guess"));
  m.def("cps_value", &cps_value, py::arg("sys"), py::arg("orbit"), py::arg("phase") = 0.0);
  m.def(
      "floquet_multipliers",
      [](const CanonicalSystem& s, const CpsOrbit& o, const std::string& scheme) {
        if (scheme != "trapezoid" && scheme != "gauss4") throw InvalidArgument("scheme must be trapezoid or gauss4");
        return floquet(s, o, scheme == "gauss4" ? FloquetScheme::gauss4 : FloquetScheme::trapezoid).multipliers;
      },
      py::arg("sys"), py::arg("orbit"), py::arg("scheme") = "trapezoid");

  py::class_<CpTarget>(m, "Target")
      .def_readonly("u_hat", &CpTarget::u_hat)
      .def_readonly("defect", &CpTarget::defect)
      .def_property_readonly("kind", [](const CpTarget& t) { return t.kind == TargetKind::css ? "css" : "cps"; });
  m.def("css_target", [](const CanonicalSystem& s, const VectorXd& u) { return CpTarget::from(css_target(s, u)); });
  m.def(
      "cps_target",
      [](const CanonicalSystem& s, const CpsOrbit& o, int anchor) { return CpTarget::from(cps_target(s, o, anchor)); },
      py::arg("sys"), py::arg("orbit"), py::arg("anchor") = 0);

  py::class_<CanonicalPath>(m, "Path")
      .def_readonly("t", &CanonicalPath::t)
      .def_readonly("u", &CanonicalPath::u)
      .def_readonly("T", &CanonicalPath::T)
      .def_readonly("alpha", &CanonicalPath::alpha);
  py::class_<IscResult>(m, "IscResult")
      .def_readonly("path", &IscResult::path)
      .def_readonly("reached", &IscResult::reached)
      .def_readonly("message", &IscResult::message);
  m.def(
      "isc",
      [](const CanonicalSystem& s, const CpTarget& t, const VectorXd& v0, const std::vector<double>& alvin, int n_arc,
         int nti, double T, double eps_inf) {
        CpSettings cs;
        cs.nti = nti;
        cs.T = T;
        cs.eps_inf = eps_inf;
        CpHistory h;
        return isc(s, t, v0, alvin, n_arc, cs, h);
      },
      py::arg("sys"), py::arg("target"), py::arg("v0"), py::arg("alvin"), py::arg("n_arc") = 0, py::arg("nti") = 50,
      py::arg("T") = 0.0, py::arg("eps_inf") = std::numeric_limits<double>::infinity());
  m.def("path_value", &path_value);

  m.def("save_path", &save_path);
  m.def("load_path", [](const std::string& f) {
    PathFile p = load_path(f);
    return py::make_tuple(p.system.build(), p.path);
  });
  m.def("save_point", &save_point);
  m.def("load_point", [](const std::string& f) {
    PointFile p = load_point(f);
    return py::make_tuple(p.system.build(), p.u);
  });

  m.def(
      "run_stage",
      [](const std::string& stage, const std::map<std::string, std::string>& config) {
        std::ostringstream out, err;
        int code;
        try {
          code = run(RunConfig::from_map(stage, config), out, err);
        } catch (const InvalidArgument& e) {
          err << e.what() << '\n';
          code = kExitConfig;
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("stage"), py::arg("config"), "Run one CLI stage; returns (exit_code, stdout, stderr).");
}
