#include "sublab/config.hpp"

#include <algorithm>
#include <cstring>

#include "sublab/errors.hpp"

namespace sublab {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

std::vector<double> read_vector(const json& j, const std::string& key, std::size_t dim) {
  if (!j.contains(key)) throw ConfigError("missing key '" + key + "'");
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != dim)
    throw ConfigError("'" + key + "' must be an array of " + std::to_string(dim) + " numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError("'" + key + "' must contain numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

FrameSpec frame_of(const json& j) {
  if (!j.contains("frame")) throw ConfigError("missing key 'frame'");
  const json& f = j.at("frame");
  if (f.is_string()) return resolve_frame(f.get<std::string>());
  return parse_frame_json(f.dump());
}

Expression expression(const json& j, const char* key, const std::vector<std::string>& vars) {
  if (!j.at(key).is_string()) throw ConfigError(std::string("'") + key + "' must be an expression string");
  return Expression::parse(j.at(key).get<std::string>(), vars);
}

SpaceTimeFunction as_function(Expression e) {
  return [e = std::move(e)](std::span<const double> x, double t) { return e(x, t); };
}

}  // namespace

WindowOptions window_from_json(const json& j) {
  WindowOptions w;
  if (j.is_null()) return w;
  check_keys(j, {"coarse_nodes", "fine_nodes", "move_budget", "relax_sweeps", "nsw_margin", "fit_margin"}, "window");
  w.coarse_nodes = get_or<std::size_t>(j, "coarse_nodes", w.coarse_nodes);
  w.fine_nodes = get_or<std::size_t>(j, "fine_nodes", w.fine_nodes);
  w.move_budget = get_or<int>(j, "move_budget", w.move_budget);
  w.relax_sweeps = get_or<int>(j, "relax_sweeps", w.relax_sweeps);
  w.nsw_margin = get_or<double>(j, "nsw_margin", w.nsw_margin);
  w.fit_margin = get_or<double>(j, "fit_margin", w.fit_margin);
  if (w.coarse_nodes < 3 || w.fine_nodes < 3 || w.move_budget < 1 || w.relax_sweeps < 0)
    throw ConfigError("window: node counts must be >= 3 and move_budget >= 1");
  return w;
}

ProblemConfig problem_from_json(const json& j) {
  check_keys(j,
             {"frame", "epsilon", "box", "dims", "T", "tau", "scheme", "boundary_kind", "flux", "source", "initial",
              "boundary", "exact", "error_threshold", "output", "seed"},
             "problem");
  ProblemConfig pc;
  pc.frame = frame_of(j);
  pc.epsilon = get_or<double>(j, "epsilon", 0.0);
  const std::size_t n = pc.frame.dim;
  const auto& vars = pc.frame.variables;

  if (!j.contains("box")) throw ConfigError("missing key 'box'");
  check_keys(j.at("box"), {"lower", "upper"}, "box");
  Box box(read_vector(j.at("box"), "lower", n), read_vector(j.at("box"), "upper", n));
  auto dims = get_or<std::vector<std::size_t>>(j, "dims", {});
  if (dims.size() != n) throw ConfigError("'dims' must list one node count per axis");

  ParabolicProblem& prob = pc.problem;
  prob.family = rescale(pc.frame.table(), pc.epsilon);
  prob.lattice = Lattice(box, dims);
  if (!j.contains("T")) throw ConfigError("missing key 'T'");
  prob.T = get_or<double>(j, "T", 1.0);
  if (!j.contains("initial")) throw ConfigError("missing key 'initial'");
  Expression initial = expression(j, "initial", vars);
  prob.initial = GridFunction::sample(prob.lattice, [&](std::span<const double> x) { return initial(x, 0.0); });
  prob.boundary = as_function(j.contains("boundary") ? expression(j, "boundary", vars) : initial);

  const std::string bk = get_or<std::string>(j, "boundary_kind", "dirichlet");
  if (bk == "dirichlet") prob.boundary_kind = BoundaryKind::dirichlet;
  else if (bk == "periodic") prob.boundary_kind = BoundaryKind::periodic;
  else throw ConfigError("boundary_kind must be 'dirichlet' or 'periodic'");

  if (j.contains("flux")) {
    const json& f = j.at("flux");
    check_keys(f, {"kind", "matrix", "a", "abar", "amplitude"}, "flux");
    const std::string kind = get_or<std::string>(f, "kind", "linear");
    prob.flux.a = get_or<double>(f, "a", 1.0);
    prob.flux.abar = get_or<double>(f, "abar", 1.0);
    prob.flux.amplitude = get_or<double>(f, "amplitude", 1.0);
    if (kind == "linear") {
      prob.flux.kind = FluxSpec::Kind::linear;
    } else if (kind == "model") {
      prob.flux.kind = FluxSpec::Kind::model;
    } else if (kind == "matrix") {
      prob.flux.kind = FluxSpec::Kind::matrix;
      const std::size_t p = prob.family.size();
      if (!f.contains("matrix") || !f.at("matrix").is_array() || f.at("matrix").size() != p)
        throw ConfigError("flux.matrix must be a " + std::to_string(p) + " x " + std::to_string(p) +
                          " array of expressions");
      std::vector<Expression> entries;
      for (const auto& row : f.at("matrix")) {
        if (!row.is_array() || row.size() != p) throw ConfigError("flux.matrix rows must have p entries");
        for (const auto& e : row) {
          if (e.is_number()) entries.push_back(Expression::parse(std::to_string(e.get<double>()), vars));
          else if (e.is_string()) entries.push_back(Expression::parse(e.get<std::string>(), vars));
          else throw ConfigError("flux.matrix entries must be numbers or expressions");
        }
      }
      prob.flux.matrix = [entries](std::span<const double> x, double t, double* a) {
        for (std::size_t k = 0; k < entries.size(); ++k) a[k] = entries[k](x, t);
      };
    } else {
      throw ConfigError("flux.kind must be 'linear', 'matrix' or 'model'");
    }
  }
  if (j.contains("source")) {
    const json& s = j.at("source");
    check_keys(s, {"c", "d", "g"}, "source");
    if (s.contains("c")) prob.source.c = as_function(expression(s, "c", vars));
    if (s.contains("d")) prob.source.d = as_function(expression(s, "d", vars));
    if (s.contains("g")) prob.source.g = as_function(expression(s, "g", vars));
  }

  if (j.contains("tau")) {
    const json& t = j.at("tau");
    if (t.is_string()) {
      if (t.get<std::string>() != "auto") throw ConfigError("tau must be a number or \"auto\"");
    } else {
      pc.scheme.tau = get_or<double>(j, "tau", 0.0);
      if (!(pc.scheme.tau > 0.0)) throw ConfigError("tau must be positive");
    }
  }
  if (j.contains("scheme")) {
    const json& s = j.at("scheme");
    check_keys(s, {"mode", "stencil", "cfl_safety", "linear_solver_tol", "max_iters", "output_every"}, "scheme");
    const std::string mode = get_or<std::string>(s, "mode", "explicit");
    if (mode == "explicit") pc.scheme.mode = TimeMode::explicit_euler;
    else if (mode == "implicit") pc.scheme.mode = TimeMode::implicit_euler;
    else throw ConfigError("scheme.mode must be 'explicit' or 'implicit'");
    const std::string stencil = get_or<std::string>(s, "stencil", "nested");
    if (stencil == "nested") pc.scheme.stencil = StencilKind::nested;
    else if (stencil == "monotone") pc.scheme.stencil = StencilKind::monotone;
    else throw ConfigError("scheme.stencil must be 'nested' or 'monotone'");
    pc.scheme.cfl_safety = get_or<double>(s, "cfl_safety", pc.scheme.cfl_safety);
    pc.scheme.linear_solver_tol = get_or<double>(s, "linear_solver_tol", pc.scheme.linear_solver_tol);
    pc.scheme.max_iters = get_or<int>(s, "max_iters", pc.scheme.max_iters);
    pc.scheme.output_every = get_or<std::size_t>(s, "output_every", pc.scheme.output_every);
  }
  if (j.contains("exact")) pc.exact = expression(j, "exact", vars);
  pc.error_threshold = get_or<double>(j, "error_threshold", pc.error_threshold);
  return pc;
}

SweepConfig sweep_from_json(const json& j) {
  check_keys(j,
             {"frame", "center", "epsilons", "rhos", "heat_nodes", "heat_slices", "time_factor", "cfl_safety", "bump_floor",
              "bump_width", "volume_samples", "ensemble_size", "seed", "window", "factors", "workers", "output"},
             "sweep");
  SweepConfig c;
  FrameSpec frame = frame_of(j);
  c.table = frame.table();
  c.center = j.contains("center") ? read_vector(j, "center", frame.dim) : std::vector<double>(frame.dim, 0.0);
  c.epsilons = get_or<std::vector<double>>(j, "epsilons", {0.0});
  c.rhos = get_or<std::vector<double>>(j, "rhos", {});
  if (c.rhos.empty()) throw ConfigError("sweep: 'rhos' must list at least one radius");
  c.heat_nodes = get_or<std::size_t>(j, "heat_nodes", c.heat_nodes);
  c.heat_slices = get_or<std::size_t>(j, "heat_slices", c.heat_slices);
  c.time_factor = get_or<double>(j, "time_factor", c.time_factor);
  c.cfl_safety = get_or<double>(j, "cfl_safety", c.cfl_safety);
  c.bump_floor = get_or<double>(j, "bump_floor", c.bump_floor);
  c.bump_width = get_or<double>(j, "bump_width", c.bump_width);
  c.volume_samples = get_or<std::size_t>(j, "volume_samples", c.volume_samples);
  c.ensemble_size = get_or<std::size_t>(j, "ensemble_size", c.ensemble_size);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.workers = get_or<std::size_t>(j, "workers", c.workers);
  if (j.contains("window")) c.window = window_from_json(j.at("window"));
  if (j.contains("factors")) {
    const json& f = j.at("factors");
    check_keys(f, {"harnack", "poincare", "doubling"}, "factors");
    c.harnack_factor = get_or<double>(f, "harnack", c.harnack_factor);
    c.poincare_factor = get_or<double>(f, "poincare", c.poincare_factor);
    c.doubling_factor = get_or<double>(f, "doubling", c.doubling_factor);
  }
  if (c.time_factor < 9.0) throw ConfigError("sweep: time_factor must be >= 9 so that Q fits in [0, T]");
  if (c.heat_nodes < 5) throw ConfigError("sweep: heat_nodes must be >= 5");
  if (c.heat_slices < 10) throw ConfigError("sweep: heat_slices must be >= 10");
  return c;
}

}  // namespace sublab
