#include <filesystem>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lagvort/config.hpp"
#include "lagvort/errors.hpp"
#include "lagvort/flow.hpp"
#include "lagvort/harness.hpp"
#include "lagvort/kernel.hpp"
#include "lagvort/metrics.hpp"
#include "lagvort/parallel.hpp"
#include "lagvort/summation.hpp"
#include "lagvort/vorticity.hpp"

namespace py = pybind11;
using namespace lagvort;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Vec2> to_points(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw py::value_error("expected an (n, 2) array of points");
  std::vector<Vec2> out(static_cast<std::size_t>(a.shape(0)));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[i] = {r(i, 0), r(i, 1)};
  return out;
}

Array from_points(std::span<const Vec2> pts) {
  Array out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{2}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    w(i, 0) = pts[i].x;
    w(i, 1) = pts[i].y;
  }
  return out;
}

Array from_values(const std::vector<double>& v) {
  Array out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  auto w = out.mutable_unchecked<1>();
  for (std::size_t i = 0; i < v.size(); ++i) w(i) = v[i];
  return out;
}

VorticitySpec spec_from(const py::object& o) {
  if (py::isinstance<py::str>(o)) return VorticitySpec::from_json(nlohmann::json::parse(o.cast<std::string>()));
  const std::string text = py::module_::import("json").attr("dumps")(o).cast<std::string>();
  return VorticitySpec::from_json(nlohmann::json::parse(text));
}

Domain domain_from(const std::string& kind, double radius) {
  if (kind == "disk") return Domain::disk(radius);
  if (kind == "plane") return Domain::plane();
  throw ConfigError("domain kind must be 'disk' or 'plane', got '" + kind + "'");
}

SummationStrategy strategy_from(const std::string& kind, double theta, int order) {
  if (kind == "direct") return SummationStrategy::direct();
  if (kind == "treecode") return SummationStrategy::treecode(theta, order);
  throw ConfigError("strategy must be 'direct' or 'treecode', got '" + kind + "'");
}

// A history that keeps its initial data for solution queries.
struct PyHistory {
  FlowHistory history;
  VorticitySpec spec;
};

py::object json_to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Vortex-blob flows of 2D Euler on the disk and the plane";

  py::register_exception<Error>(m, "Error");
  py::register_exception<SingularInputError>(m, "SingularInputError", m.attr("Error"));
  py::register_exception<DomainError>(m, "DomainError", m.attr("Error"));
  py::register_exception<BlowUpError>(m, "BlowUpError", m.attr("Error"));
  py::register_exception<QuadratureError>(m, "QuadratureError", m.attr("Error"));
  py::register_exception<ResolutionError>(m, "ResolutionError", m.attr("Error"));
  py::register_exception<HistoryError>(m, "HistoryError", m.attr("Error"));
  py::register_exception<ConfigError>(m, "ConfigError", m.attr("Error"));

  m.def("set_thread_count", &set_thread_count, py::arg("n"));
  m.def("thread_count", &thread_count);

  m.def("plane_kernel", [](double x, double y) {
    const Vec2 k = plane_kernel({x, y});
    return std::pair{k.x, k.y};
  });
  m.def(
      "disk_kernel",
      [](std::pair<double, double> x, std::pair<double, double> y, double radius) {
        const Vec2 k = disk_kernel({x.first, x.second}, {y.first, y.second}, radius);
        return std::pair{k.x, k.y};
      },
      py::arg("x"), py::arg("y"), py::arg("radius") = 1.0);
  m.def(
      "regularized_kernel",
      [](std::pair<double, double> x, std::pair<double, double> y, double delta, const std::string& domain,
         double radius) {
        const Vec2 k = regularized_kernel(KernelSpec(domain_from(domain, radius), delta), {x.first, x.second},
                                          {y.first, y.second});
        return std::pair{k.x, k.y};
      },
      py::arg("x"), py::arg("y"), py::arg("delta"), py::arg("domain") = "disk", py::arg("radius") = 1.0);
  m.def("modulus_phi", py::vectorize(&modulus_phi));

  m.def(
      "calibrate_kernel",
      [](double radius, int samples, int resolution, double min_separation, std::uint64_t seed) {
        KernelCalibration c;
        {
          py::gil_scoped_release release;
          c = verify_kernel_estimates(KernelSpec(Domain::disk(radius), 0.0), static_cast<std::size_t>(samples),
                                      resolution, min_separation, seed);
        }
        py::dict d;
        d["C1"] = c.c1;
        d["C1_half_samples"] = c.c1_half;
        d["C2"] = c.c2;
        d["C2_coarse"] = c.c2_coarse;
        d["C"] = c.constant();
        return d;
      },
      py::arg("radius") = 1.0, py::arg("samples") = 16, py::arg("resolution") = 32, py::arg("min_separation") = 1e-3,
      py::arg("seed") = 20240611);

  m.def(
      "velocity",
      [](const Array& positions, const Array& circulation, const Array& targets, double delta, const std::string& domain,
         double radius, const std::string& strategy, double theta, int order) {
        const auto pos = to_points(positions);
        const auto tgt = to_points(targets);
        if (circulation.ndim() != 1 || static_cast<std::size_t>(circulation.shape(0)) != pos.size()) {
          throw py::value_error("circulation must have one entry per position");
        }
        const std::vector<double> g(circulation.data(), circulation.data() + circulation.shape(0));
        std::vector<Vec2> u;
        {
          py::gil_scoped_release release;
          const VelocityField field(domain_from(domain, radius), delta, pos, g, strategy_from(strategy, theta, order));
          u = field.evaluate(tgt);
        }
        return from_points(u);
      },
      py::arg("positions"), py::arg("circulation"), py::arg("targets"), py::arg("delta"), py::arg("domain") = "disk",
      py::arg("radius") = 1.0, py::arg("strategy") = "direct", py::arg("theta") = 0.5, py::arg("order") = 8);

  m.def(
      "eval_vorticity",
      [](const py::object& spec, const Array& points) {
        const VorticitySpec s = spec_from(spec);
        const auto pts = to_points(points);
        std::vector<double> v(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) v[i] = s(pts[i]);
        return from_values(v);
      },
      py::arg("spec"), py::arg("points"));

  py::class_<PyHistory>(m, "FlowHistory")
      .def_property_readonly("dt", [](const PyHistory& h) { return h.history.dt(); })
      .def_property_readonly("h", [](const PyHistory& h) { return h.history.h(); })
      .def_property_readonly("delta", [](const PyHistory& h) { return h.history.delta(); })
      .def_property_readonly("particle_count", [](const PyHistory& h) { return h.history.particle_count(); })
      .def_property_readonly("valid", [](const PyHistory& h) { return h.history.valid(); })
      .def_property_readonly("projections", [](const PyHistory& h) { return h.history.projections(); })
      .def_property_readonly("times",
                             [](const PyHistory& h) {
                               std::vector<double> t;
                               for (int k = h.history.first_index(); k <= h.history.last_index(); ++k) {
                                 t.push_back(h.history.time(k));
                               }
                               return from_values(t);
                             })
      .def("labels",
           [](const PyHistory& h) {
             std::vector<Vec2> l;
             for (const auto& p : h.history.initial().particles) l.push_back(p.label);
             return from_points(l);
           })
      .def("vorticity",
           [](const PyHistory& h) {
             std::vector<double> w;
             for (const auto& p : h.history.initial().particles) w.push_back(p.vorticity);
             return from_values(w);
           })
      .def(
          "positions", [](const PyHistory& h, double t) { return from_points(h.history.positions(h.history.index_of(t))); },
          py::arg("t"))
      .def(
          "total_circulation",
          [](const PyHistory& h, double t) { return h.history.snapshot(h.history.index_of(t)).total_circulation(); },
          py::arg("t"))
      .def(
          "backward_flow",
          [](const PyHistory& h, const Array& points, double t) {
            const auto pts = to_points(points);
            std::vector<Vec2> out;
            {
              py::gil_scoped_release release;
              out = backward_flow(h.history, pts, t);
            }
            return from_points(out);
          },
          py::arg("points"), py::arg("t"))
      .def(
          "solution",
          [](const PyHistory& h, const Array& points, double t) {
            const auto pts = to_points(points);
            std::vector<double> out;
            {
              py::gil_scoped_release release;
              out = eval_solution(h.history, h.spec, pts, t);
            }
            return from_values(out);
          },
          py::arg("points"), py::arg("t"))
      .def(
          "composition_defect", [](const PyHistory& h, double t) { return composition_defect(h.history, t); },
          py::arg("t"))
      .def(
          "lp_norm", [](const PyHistory& h, double p, double t, double spacing) {
            return lp_norm({&h.history, h.spec}, p, t, spacing);
          },
          py::arg("p"), py::arg("t"), py::arg("spacing"));

  m.def(
      "forward_flow",
      [](const py::object& spec, double T, double dt, double h, double delta, const std::string& domain, double radius,
         const std::string& strategy, double theta, int order, bool bidirectional) {
        FlowOptions o;
        o.domain = domain_from(domain, radius);
        o.T = T;
        o.dt = dt;
        o.h = h;
        o.delta = delta;
        o.strategy = strategy_from(strategy, theta, order);
        o.bidirectional = bidirectional;
        const VorticitySpec s = spec_from(spec);
        py::gil_scoped_release release;
        return std::make_unique<PyHistory>(PyHistory{forward_flow(s, o), s});
      },
      py::arg("spec"), py::arg("T"), py::arg("dt"), py::arg("h"), py::arg("delta") = -1.0, py::arg("domain") = "disk",
      py::arg("radius") = 1.0, py::arg("strategy") = "direct", py::arg("theta") = 0.5, py::arg("order") = 8,
      py::arg("bidirectional") = false);

  m.def(
      "lp_distance",
      [](const PyHistory& a, const PyHistory& b, double p, double t, double spacing) {
        py::gil_scoped_release release;
        return lp_distance({&a.history, a.spec}, {&b.history, b.spec}, p, t, spacing);
      },
      py::arg("a"), py::arg("b"), py::arg("p"), py::arg("t"), py::arg("spacing"));

  m.def(
      "run_experiment",
      [](const std::string& experiment, const std::vector<std::string>& overrides, const std::string& config,
         const std::string& out) {
        Config cfg = config.empty() ? Config() : Config::load(config);
        for (const auto& o : overrides) cfg.apply_override(o);
        cfg.set("experiment", experiment);
        const ExperimentConfig ec(cfg);
        Report rep;
        {
          py::gil_scoped_release release;
          rep = run_experiment(ec, out);
          if (!out.empty()) write_report(rep, out);
        }
        return json_to_py(rep.summary());
      },
      py::arg("experiment"), py::arg("overrides") = std::vector<std::string>{}, py::arg("config") = "",
      py::arg("out") = "");
}
