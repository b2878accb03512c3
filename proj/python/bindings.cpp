#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>

#include "sublab/config.hpp"
#include "sublab/errors.hpp"
#include "sublab/frame_io.hpp"
#include "sublab/frames.hpp"
#include "sublab/functional.hpp"
#include "sublab/harnack.hpp"
#include "sublab/metric.hpp"
#include "sublab/pde.hpp"

namespace py = pybind11;
using namespace sublab;

namespace {

py::array_t<double> to_array(const std::vector<double>& v, std::vector<std::size_t> shape) {
  py::array_t<double> out(shape);
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::array_t<double> grid_array(const GridFunction& g) { return to_array(g.values(), g.lattice().dims()); }

py::dict volume_dict(const VolumeEstimate& v) {
  py::dict d;
  d["mean"] = v.mean;
  d["half_width"] = v.half_width;
  d["samples"] = v.samples;
  return d;
}

nlohmann::json json_of(const py::object& obj) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

WindowOptions window_of(const py::object& obj) { return obj.is_none() ? WindowOptions{} : window_from_json(json_of(obj)); }

py::dict row_dict(const SweepRow& r) {
  py::dict d;
  d["epsilon"] = r.epsilon;
  d["rho"] = r.rho;
  d["harnack_quotient"] = r.harnack_quotient;
  d["doubling_ratio"] = r.doubling_ratio;
  d["poincare_estimate"] = r.poincare_estimate;
  d["max_principle_margin"] = r.max_principle_margin;
  d["log_oscillation"] = r.log_oscillation;
  d["error"] = r.error;
  return d;
}

}  // namespace

PYBIND11_MODULE(_sublab, m) {
  m.doc() = "Sub-Riemannian geometry and degenerate parabolic experiments";

  auto base = py::register_exception<Error>(m, "SublabError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", base);
  py::register_exception<HormanderFailure>(m, "HormanderFailure", base);
  py::register_exception<DomainError>(m, "DomainError", base);
  py::register_exception<BallEscapesBox>(m, "BallEscapesBox", base);
  py::register_exception<DisconnectedField>(m, "DisconnectedField", base);
  py::register_exception<NonFiniteState>(m, "NonFiniteState", base);
  py::register_exception<CflViolation>(m, "CflViolation", base);
  py::register_exception<ConvergenceFailure>(m, "ConvergenceFailure", base);
  py::register_exception<DegenerateRatio>(m, "DegenerateRatio", base);

  py::class_<FrameSpec>(m, "Frame")
      .def_readonly("name", &FrameSpec::name)
      .def_readonly("dim", &FrameSpec::dim)
      .def_readonly("step", &FrameSpec::step)
      .def_readonly("variables", &FrameSpec::variables)
      .def("to_json", &frame_to_json)
      .def("commutators",
           [](const FrameSpec& f) {
             py::list out;
             const CommutatorTable t = f.table();
             for (const auto& e : t.entries()) {
               py::dict d;
               d["degree"] = e.degree;
               d["word"] = e.word;
               std::vector<std::string> comps;
               for (const auto& p : e.field.components()) comps.push_back(p.to_string(f.variables));
               d["components"] = comps;
               out.append(d);
             }
             return out;
           },
           "Generators and their nonvanishing brackets, in enumeration order.")
      .def("hormander_rank", [](const FrameSpec& f, std::vector<double> x) { return hormander_rank(f.table(), x); })
      .def("family", [](const FrameSpec& f, double eps) { return rescale(f.table(), eps); }, py::arg("epsilon"))
      .def("__repr__", [](const FrameSpec& f) { return "<Frame " + f.name + " dim=" + std::to_string(f.dim) + ">"; });

  m.def("load_frame", &resolve_frame, py::arg("ref"), "Built-in frame name or path to a frame JSON file.");
  m.def("parse_frame", &parse_frame_json, py::arg("text"));

  py::class_<EpsilonFamily>(m, "Family")
      .def_property_readonly("epsilon", &EpsilonFamily::epsilon)
      .def_property_readonly("dim", &EpsilonFamily::dim)
      .def_property_readonly("size", &EpsilonFamily::size)
      .def_property_readonly("extended_size", &EpsilonFamily::extended_size)
      .def_property_readonly("degrees", &EpsilonFamily::degrees_eps)
      .def("rescaled_frame", [](const EpsilonFamily& f, std::vector<double> x) { return f.rescaled_frame(x); })
      .def("extended_frame", [](const EpsilonFamily& f, std::vector<double> x) { return f.extended_frame(x); })
      .def("volume_polynomial",
           [](const EpsilonFamily& f, std::vector<double> x, double r) { return volume_polynomial(f, x, r); },
           py::arg("x"), py::arg("r"))
      .def("lambda_det",
           [](const EpsilonFamily& f, std::vector<double> x, std::vector<int> index) {
             return lambda_det(f, x, make_index(f, std::move(index)));
           },
           py::arg("x"), py::arg("index"));

  py::class_<DistanceField>(m, "DistanceField")
      .def_readonly("origin", &DistanceField::origin)
      .def_readonly("epsilon", &DistanceField::epsilon)
      .def_property_readonly("values", [](const DistanceField& f) { return grid_array(f.values); })
      .def_property_readonly("lower", [](const DistanceField& f) { return f.lattice().box().lower; })
      .def_property_readonly("upper", [](const DistanceField& f) { return f.lattice().box().upper; })
      .def("boundary_min", &DistanceField::boundary_min)
      .def("__call__", [](const DistanceField& f, std::vector<double> y) { return f.value_at(y); })
      .def("ball_volume", &ball_volume, py::arg("r"), py::arg("samples") = 200000, py::arg("seed") = 1)
      .def("ball_volume_quadrature", &ball_volume_quadrature, py::arg("r"));

  m.def(
      "distance_field",
      [](const EpsilonFamily& fam, std::vector<double> origin, std::vector<double> lower, std::vector<double> upper,
         std::size_t nodes, int move_budget, int relax_sweeps) {
        if (lower.size() != fam.dim() || upper.size() != fam.dim() || origin.size() != fam.dim())
          throw DimensionMismatch("origin and box must have the frame dimension");
        Lattice lat(Box(std::move(lower), std::move(upper)), std::vector<std::size_t>(fam.dim(), nodes));
        return distance_field(fam, origin, lat, move_budget, relax_sweeps);
      },
      py::arg("family"), py::arg("origin"), py::arg("lower"), py::arg("upper"), py::arg("nodes") = 33,
      py::arg("move_budget") = 2, py::arg("relax_sweeps") = 30, py::call_guard<py::gil_scoped_release>());

  m.def(
      "fitted_field",
      [](const EpsilonFamily& fam, std::vector<double> x, double r, const py::object& window) {
        WindowOptions w = window_of(window);
        py::gil_scoped_release release;
        return fitted_field(fam, x, r, w);
      },
      py::arg("family"), py::arg("x"), py::arg("r"), py::arg("window") = py::none());

  m.def(
      "ball_volume",
      [](const EpsilonFamily& fam, std::vector<double> x, double r, std::size_t samples, std::uint64_t seed,
         const py::object& window) {
        WindowOptions w = window_of(window);
        VolumeEstimate v;
        {
          py::gil_scoped_release release;
          v = measure_ball(fam, x, r, samples, seed, w).volume;
        }
        return volume_dict(v);
      },
      py::arg("family"), py::arg("x"), py::arg("r"), py::arg("samples") = 200000, py::arg("seed") = 1,
      py::arg("window") = py::none());

  m.def(
      "doubling_ratio",
      [](const EpsilonFamily& fam, std::vector<double> x, double r, std::size_t samples, std::uint64_t seed,
         const py::object& window) {
        WindowOptions w = window_of(window);
        DoublingResult d;
        {
          py::gil_scoped_release release;
          d = doubling_ratio(fam, x, r, samples, seed, w);
        }
        py::dict out;
        out["ratio"] = d.ratio;
        out["half_width"] = d.half_width;
        out["small"] = volume_dict(d.small);
        out["large"] = volume_dict(d.large);
        return out;
      },
      py::arg("family"), py::arg("x"), py::arg("r"), py::arg("samples") = 200000, py::arg("seed") = 1,
      py::arg("window") = py::none());

  m.def(
      "poincare_estimate",
      [](const EpsilonFamily& fam, std::vector<double> x, double r, std::size_t ensemble_size, std::uint64_t seed,
         const py::object& window) {
        WindowOptions w = window_of(window);
        PoincareEstimate p;
        {
          py::gil_scoped_release release;
          p = poincare_constant_estimate(fam, x, r, ensemble_size, seed, w);
        }
        py::dict out;
        out["value"] = p.value;
        out["members"] = p.members;
        out["best_member"] = p.best_member;
        return out;
      },
      py::arg("family"), py::arg("x"), py::arg("r"), py::arg("ensemble_size") = 16, py::arg("seed") = 1,
      py::arg("window") = py::none());

  m.def("compute_theta", &compute_theta, py::arg("p"), py::arg("q"), py::arg("alpha"), py::arg("beta"),
        py::arg("N"));

  m.def(
      "solve",
      [](const py::object& config) {
        ProblemConfig pc = problem_from_json(json_of(config));
        SolveStats stats;
        SpaceTimeGridFunction u;
        {
          py::gil_scoped_release release;
          u = solve(pc.problem, pc.scheme, &stats);
        }
        const Lattice& lat = u.lattice();
        std::vector<std::size_t> shape{u.slice_count()};
        shape.insert(shape.end(), lat.dims().begin(), lat.dims().end());
        std::vector<double> flat;
        flat.reserve(u.slice_count() * lat.size());
        std::vector<double> times;
        for (std::size_t k = 0; k < u.slice_count(); ++k) {
          flat.insert(flat.end(), u.slice(k).values().begin(), u.slice(k).values().end());
          times.push_back(u.time(k));
        }
        py::dict out;
        out["values"] = to_array(flat, shape);
        out["times"] = times;
        out["tau"] = stats.tau;
        out["steps"] = stats.steps;
        out["lower"] = lat.box().lower;
        out["upper"] = lat.box().upper;
        if (pc.exact) {
          double err = 0.0;
          const GridFunction& last = u.slice(u.slice_count() - 1);
          for (std::size_t i = 0; i < lat.size(); ++i)
            err = std::max(err, std::abs(last[i] - (*pc.exact)(lat.point(i), u.t_end())));
          out["max_error"] = err;
        }
        return out;
      },
      py::arg("config"), "Solves the problem described by a config dict; returns slices as an array.");

  m.def(
      "cfl_limit",
      [](const py::object& config, const std::string& stencil) {
        ProblemConfig pc = problem_from_json(json_of(config));
        return cfl_limit(pc.problem, stencil == "monotone" ? StencilKind::monotone : StencilKind::nested);
      },
      py::arg("config"), py::arg("stencil") = "nested");

  m.def(
      "sweep_row",
      [](const py::object& config, double epsilon, double rho) {
        SweepConfig c = sweep_from_json(json_of(config));
        SweepRow r;
        {
          py::gil_scoped_release release;
          r = sweep_row(c, epsilon, rho);
        }
        return row_dict(r);
      },
      py::arg("config"), py::arg("epsilon"), py::arg("rho"));

  m.def(
      "sweep",
      [](const py::object& config) {
        SweepConfig c = sweep_from_json(json_of(config));
        SweepReport rep;
        {
          py::gil_scoped_release release;
          rep = epsilon_sweep(c);
        }
        py::list rows;
        for (const auto& r : rep.rows) rows.append(row_dict(r));
        py::list groups;
        for (const auto& g : rep.groups) {
          py::dict d;
          d["rho"] = g.rho;
          d["harnack_spread"] = g.harnack_spread;
          d["poincare_spread"] = g.poincare_spread;
          d["doubling_spread_small_eps"] = g.doubling_spread_small;
          d["doubling_spread_large_eps"] = g.doubling_spread_large;
          d["harnack_pass"] = g.harnack_pass;
          d["poincare_pass"] = g.poincare_pass;
          d["doubling_pass"] = g.doubling_pass;
          d["max_principle_pass"] = g.max_principle_pass;
          groups.append(d);
        }
        py::dict out;
        out["rows"] = rows;
        out["groups"] = groups;
        out["complete"] = rep.complete;
        out["pass"] = rep.pass();
        return out;
      },
      py::arg("config"));
}
