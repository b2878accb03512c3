// sublab command-line tool. Every command reads an optional JSON config,
// applies flag overrides, writes its artifacts plus manifest.json into the
// output directory and exits 0 (pass), 1 (check failure) or 2 (usage or
// configuration error).

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sublab/config.hpp"
#include "sublab/errors.hpp"
#include "sublab/frame_io.hpp"
#include "sublab/functional.hpp"
#include "sublab/harnack.hpp"
#include "sublab/metric.hpp"
#include "sublab/pde.hpp"

#ifndef SUBLAB_VERSION
#define SUBLAB_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sublab;

namespace {

constexpr int kPass = 0;
constexpr int kCheckFailure = 1;
constexpr int kUsageError = 2;

struct Run {
  std::string command;
  json config;
  fs::path out;
  json results = json::object();
  std::vector<std::string> files;
  bool pass = true;
};

fs::path output_dir(const json& cfg, const std::string& command) {
  fs::path out = cfg.contains("output") ? fs::path(cfg.at("output").get<std::string>()) : fs::path("sublab_out") / command;
  if (const char* root = std::getenv("SUBLAB_OUTPUT_ROOT"); root && *root && out.is_relative()) out = fs::path(root) / out;
  fs::create_directories(out);
  return out;
}

std::ofstream open_file(Run& run, const std::string& name, bool binary = false) {
  std::ofstream f(run.out / name, binary ? std::ios::binary : std::ios::out);
  if (!f) throw Error("cannot write " + (run.out / name).string());
  run.files.push_back(name);
  if (!binary) f.precision(17);
  return f;
}

void write_manifest(const Run& run, double seconds, const std::string& error) {
  json m;
  m["command"] = run.command;
  m["version"] = SUBLAB_VERSION;
  m["config"] = run.config;
  m["seed"] = run.config.value("seed", std::uint64_t{1});
  m["wall_time_seconds"] = seconds;
  m["results"] = run.results;
  m["outputs"] = run.files;
  m["pass"] = run.pass && error.empty();
  if (!error.empty()) m["error"] = error;
  std::ofstream f(run.out / "manifest.json");
  f << m.dump(2) << '\n';
}

template <class T>
T value_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

FrameSpec frame_of(const json& cfg) {
  if (!cfg.contains("frame")) throw ConfigError("missing 'frame' (use --frame or the config file)");
  const json& f = cfg.at("frame");
  return f.is_string() ? resolve_frame(f.get<std::string>()) : parse_frame_json(f.dump());
}

std::vector<double> point_of(const json& cfg, const char* key, std::size_t dim) {
  return cfg.contains(key) ? read_vector(cfg, key, dim) : std::vector<double>(dim, 0.0);
}

WindowOptions window_of(const json& cfg) { return cfg.contains("window") ? window_from_json(cfg.at("window")) : WindowOptions{}; }

// ---------------------------------------------------------------------------

void cmd_frame(Run& run, const std::string& action) {
  const json& cfg = run.config;
  check_keys(cfg, {"frame", "point", "epsilon", "radius", "output", "seed"}, "frame");
  FrameSpec spec = frame_of(cfg);
  CommutatorTable table = spec.table();
  std::vector<double> x = point_of(cfg, "point", spec.dim);
  json& r = run.results;
  r["name"] = spec.name;
  r["dim"] = spec.dim;
  r["point"] = x;
  if (action == "inspect" || action == "brackets") {
    r["p"] = table.size();
    r["degrees"] = table.degrees();
    json entries = json::array();
    for (const auto& e : table.entries()) {
      json fe;
      fe["degree"] = e.degree;
      fe["word"] = e.word;
      std::vector<std::string> comps;
      for (const auto& c : e.field.components()) comps.push_back(c.to_string(spec.variables));
      fe["field"] = comps;
      entries.push_back(fe);
    }
    r["entries"] = entries;
  }
  const int rank = hormander_rank(table, x);
  r["rank"] = rank;
  r["hormander"] = rank == static_cast<int>(spec.dim);
  if (action == "inspect") {
    const double eps = value_or<double>(cfg, "epsilon", 0.0);
    const double radius = value_or<double>(cfg, "radius", 0.1);
    EpsilonFamily fam = rescale(table, eps);
    r["epsilon"] = eps;
    r["degrees_eps"] = fam.degrees_eps();
    json lam = json::array();
    for_each_increasing_tuple(fam.extended_size(), spec.dim, [&](std::span<const int> idx) {
      IndexTuple I = make_index(fam, std::vector<int>(idx.begin(), idx.end()));
      lam.push_back({{"index", I.indices}, {"degree", I.degree_sum}, {"lambda", lambda_det(fam, x, I)}});
    });
    r["lambda"] = lam;
    try {
      IndexTuple best = best_index(fam, x, radius);
      r["best_index"] = {{"radius", radius}, {"index", best.indices}, {"degree", best.degree_sum}};
      r["volume_polynomial"] = volume_polynomial(fam, x, radius);
    } catch (const HormanderFailure&) {
      r["best_index"] = nullptr;
    }
  }
  run.pass = action != "rank" || r["hormander"].get<bool>();
  open_file(run, "report.json") << r.dump(2) << '\n';
  std::cout << r.dump(2) << '\n';
}

void cmd_distance(Run& run) {
  const json& cfg = run.config;
  check_keys(cfg,
             {"frame", "epsilon", "origin", "radius", "box", "nodes", "move_budget", "relax_sweeps",
              "verify_roundtrip", "window", "output", "seed"},
             "distance");
  FrameSpec spec = frame_of(cfg);
  const double eps = value_or<double>(cfg, "epsilon", 0.0);
  EpsilonFamily fam = rescale(spec.table(), eps);
  std::vector<double> origin = point_of(cfg, "origin", spec.dim);
  WindowOptions w = window_of(cfg);
  const int budget = value_or<int>(cfg, "move_budget", w.move_budget);
  const int sweeps = value_or<int>(cfg, "relax_sweeps", w.relax_sweeps);
  const std::size_t nodes = value_or<std::size_t>(cfg, "nodes", w.fine_nodes);
  Box box;
  if (cfg.contains("box")) {
    check_keys(cfg.at("box"), {"lower", "upper"}, "box");
    box = Box(read_vector(cfg.at("box"), "lower", spec.dim), read_vector(cfg.at("box"), "upper", spec.dim));
  } else {
    box = fit_window(fam, origin, value_or<double>(cfg, "radius", 0.1), w).box();
  }
  DistanceField field =
      distance_field(fam, origin, Lattice(box, std::vector<std::size_t>(spec.dim, nodes)), budget, sweeps);
  {
    auto f = open_file(run, "distance.bin", true);
    write_binary(f, field);
  }
  {
    auto f = open_file(run, "distance.csv");
    write_csv(f, field.values, spec.variables);
  }
  run.results["dims"] = field.lattice().dims();
  run.results["boundary_min"] = field.boundary_min();
  run.results["max"] = field.values.max();
  if (value_or<bool>(cfg, "verify_roundtrip", false)) {
    std::ifstream in(run.out / "distance.bin", std::ios::binary);
    DistanceField back = read_distance_field(in);
    const bool same = back.values.values() == field.values.values() && back.origin == field.origin &&
                      back.lattice() == field.lattice();
    run.results["roundtrip_identical"] = same;
    run.pass = same;
  }
}

void cmd_volume(Run& run) {
  const json& cfg = run.config;
  check_keys(cfg, {"frame", "epsilon", "center", "radius", "samples", "seed", "window", "box", "nodes", "output"},
             "volume");
  FrameSpec spec = frame_of(cfg);
  const double eps = value_or<double>(cfg, "epsilon", 0.0);
  const double r = value_or<double>(cfg, "radius", 0.1);
  const std::size_t samples = value_or<std::size_t>(cfg, "samples", 200000);
  const std::uint64_t seed = value_or<std::uint64_t>(cfg, "seed", 1);
  EpsilonFamily fam = rescale(spec.table(), eps);
  std::vector<double> center = point_of(cfg, "center", spec.dim);
  WindowOptions w = window_of(cfg);
  DistanceField field;
  VolumeEstimate vol;
  if (cfg.contains("box")) {
    // Fixed box: the ball must fit.
    check_keys(cfg.at("box"), {"lower", "upper"}, "box");
    Box box(read_vector(cfg.at("box"), "lower", spec.dim), read_vector(cfg.at("box"), "upper", spec.dim));
    const auto nodes = value_or<std::size_t>(cfg, "nodes", w.fine_nodes);
    field = distance_field(fam, center, Lattice(box, std::vector<std::size_t>(spec.dim, nodes)), w.move_budget,
                           w.relax_sweeps);
    if (!(field.boundary_min() > r))
      throw BallEscapesBox("B(x, " + std::to_string(r) + ") reaches the box boundary (boundary distance " +
                           std::to_string(field.boundary_min()) + ")");
    vol = ball_volume(field, r, samples, seed);
  } else {
    BallMeasurement m = measure_ball(fam, center, r, samples, seed, w);
    field = std::move(m.field);
    vol = m.volume;
  }
  const double quad = ball_volume_quadrature(field, r);
  auto f = open_file(run, "volume.csv");
  f << "epsilon,r,volume,half_width,samples,quadrature\n"
    << eps << ',' << r << ',' << vol.mean << ',' << vol.half_width << ',' << vol.samples << ',' << quad << '\n';
  run.results = {{"volume", vol.mean}, {"half_width", vol.half_width}, {"quadrature", quad}};
}

void cmd_doubling(Run& run) {
  const json& cfg = run.config;
  check_keys(cfg, {"frame", "epsilon", "center", "radius", "samples", "seed", "window", "expect", "tolerance", "output"},
             "doubling");
  FrameSpec spec = frame_of(cfg);
  const double eps = value_or<double>(cfg, "epsilon", 0.0);
  const double r = value_or<double>(cfg, "radius", 0.1);
  DoublingResult d = doubling_ratio(rescale(spec.table(), eps), point_of(cfg, "center", spec.dim), r,
                                    value_or<std::size_t>(cfg, "samples", 200000), value_or<std::uint64_t>(cfg, "seed", 1),
                                    window_of(cfg));
  auto f = open_file(run, "doubling.csv");
  f << "epsilon,r,small,large,ratio,half_width\n"
    << eps << ',' << r << ',' << d.small.mean << ',' << d.large.mean << ',' << d.ratio << ',' << d.half_width << '\n';
  run.results = {{"ratio", d.ratio}, {"half_width", d.half_width}, {"small", d.small.mean}, {"large", d.large.mean}};
  if (cfg.contains("expect")) {
    const double expect = value_or<double>(cfg, "expect", 0.0);
    const double tol = value_or<double>(cfg, "tolerance", 0.1);
    run.pass = std::abs(d.ratio / expect - 1.0) <= tol;
    run.results["expect"] = expect;
    run.results["tolerance"] = tol;
  }
}

void cmd_poincare(Run& run) {
  const json& cfg = run.config;
  check_keys(cfg, {"frame", "epsilon", "center", "radius", "ensemble", "seed", "window", "output"}, "poincare");
  FrameSpec spec = frame_of(cfg);
  const double eps = value_or<double>(cfg, "epsilon", 0.0);
  const double r = value_or<double>(cfg, "radius", 0.1);
  PoincareEstimate p = poincare_constant_estimate(rescale(spec.table(), eps), point_of(cfg, "center", spec.dim), r,
                                                  value_or<std::size_t>(cfg, "ensemble", 16),
                                                  value_or<std::uint64_t>(cfg, "seed", 1), window_of(cfg));
  auto f = open_file(run, "poincare.csv");
  f << "epsilon,r,estimate,members,best_member\n"
    << eps << ',' << r << ',' << p.value << ',' << p.members << ',' << p.best_member << '\n';
  run.results = {{"estimate", p.value}, {"members", p.members}, {"best_member", p.best_member}};
}

void cmd_solve(Run& run) {
  ProblemConfig pc = problem_from_json(run.config);
  SolveStats st;
  SpaceTimeGridFunction u = solve(pc.problem, pc.scheme, &st);
  {
    auto f = open_file(run, "solution.bin", true);
    write_binary(f, u);
  }
  {
    auto f = open_file(run, "final.csv");
    write_csv(f, u.slice(u.slice_count() - 1), pc.frame.variables);
  }
  json& r = run.results;
  r["steps"] = st.steps;
  r["tau"] = st.tau;
  r["slices"] = u.slice_count();
  r["final_time"] = u.t_end();
  r["linear_iterations"] = st.linear_iterations;
  r["picard_iterations"] = st.picard_iterations;
  r["max_linear_residual"] = st.max_linear_residual;
  r["min"] = u.slice(u.slice_count() - 1).min();
  r["max"] = u.slice(u.slice_count() - 1).max();
  if (pc.exact) {
    double err = 0.0;
    std::vector<double> x(pc.problem.lattice.dim());
    for (std::size_t k = 0; k < u.slice_count(); ++k)
      for (std::size_t i = 0; i < pc.problem.lattice.size(); ++i) {
        pc.problem.lattice.point(i, x.data());
        err = std::max(err, std::abs(u.slice(k)[i] - (*pc.exact)(x, u.time(k))));
      }
    r["max_error"] = err;
    r["error_threshold"] = pc.error_threshold;
    run.pass = err <= pc.error_threshold;
  }
}

json row_json(const SweepRow& row) {
  json j = {{"epsilon", row.epsilon},
            {"rho", row.rho},
            {"harnack_quotient", row.harnack_quotient},
            {"doubling_ratio", row.doubling_ratio},
            {"poincare_estimate", row.poincare_estimate},
            {"max_principle_margin", row.max_principle_margin},
            {"log_oscillation", row.log_oscillation}};
  if (!row.error.empty()) j["error"] = row.error;
  return j;
}

void cmd_harnack(Run& run) {
  json cfg = run.config;
  check_keys(cfg,
             {"frame", "center", "epsilon", "rho", "heat_nodes", "heat_slices", "time_factor", "cfl_safety", "bump_floor",
              "bump_width", "volume_samples", "ensemble_size", "seed", "window", "workers", "output"},
             "harnack");
  const double eps = value_or<double>(cfg, "epsilon", 0.0);
  if (!cfg.contains("rho")) throw ConfigError("missing 'rho'");
  const double rho = value_or<double>(cfg, "rho", 0.1);
  cfg.erase("epsilon");
  cfg.erase("rho");
  cfg["epsilons"] = {eps};
  cfg["rhos"] = {rho};
  SweepConfig sc = sweep_from_json(cfg);
  SweepReport rep;
  rep.rows.push_back(sweep_row(sc, eps, rho));
  rep.complete = true;
  auto f = open_file(run, "harnack.csv");
  write_sweep_csv(f, rep);
  run.results = row_json(rep.rows.front());
  run.pass = rep.rows.front().max_principle_margin <= 0.0;
}

void cmd_sweep(Run& run) {
  SweepConfig sc = sweep_from_json(run.config);
  SweepReport rep = epsilon_sweep(sc);
  {
    auto f = open_file(run, "sweep.csv");
    write_sweep_csv(f, rep);
  }
  json summary;
  summary["complete"] = rep.complete;
  summary["pass"] = rep.pass();
  summary["factors"] = {{"harnack", sc.harnack_factor}, {"poincare", sc.poincare_factor}, {"doubling", sc.doubling_factor}};
  json groups = json::array();
  for (const SweepGroup& g : rep.groups)
    groups.push_back({{"rho", g.rho},
                      {"harnack_spread", g.harnack_spread},
                      {"poincare_spread", g.poincare_spread},
                      {"doubling_spread_small_eps", g.doubling_spread_small},
                      {"doubling_spread_large_eps", g.doubling_spread_large},
                      {"harnack_pass", g.harnack_pass},
                      {"poincare_pass", g.poincare_pass},
                      {"doubling_pass", g.doubling_pass},
                      {"max_principle_pass", g.max_principle_pass}});
  summary["groups"] = groups;
  json rows = json::array();
  for (const SweepRow& r : rep.rows) rows.push_back(row_json(r));
  summary["rows"] = rows;
  open_file(run, "summary.json") << summary.dump(2) << '\n';

  // Plot data: one file per measured quantity, epsilon against value per rho.
  const std::pair<const char*, double SweepRow::*> quantities[] = {
      {"harnack_quotient", &SweepRow::harnack_quotient},
      {"doubling_ratio", &SweepRow::doubling_ratio},
      {"poincare_estimate", &SweepRow::poincare_estimate},
      {"max_principle_margin", &SweepRow::max_principle_margin},
      {"log_oscillation", &SweepRow::log_oscillation}};
  for (const auto& [name, member] : quantities) {
    auto f = open_file(run, std::string("plot_") + name + ".csv");
    f << "rho,epsilon," << name << '\n';
    for (const SweepRow& r : rep.rows)
      if (r.error.empty()) f << r.rho << ',' << r.epsilon << ',' << r.*member << '\n';
  }
  run.results = summary;
  run.results.erase("rows");
  run.pass = rep.pass();
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sublab: sub-Riemannian geometry and degenerate parabolic experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SUBLAB_VERSION);

  std::string config_path;
  json overrides = json::object();
  std::string frame_action = "inspect";

  auto common = [&](CLI::App* sc) {
    sc->add_option("-c,--config", config_path, "JSON config file; flags override its keys");
    sc->add_option_function<std::string>("-o,--out", [&](const std::string& v) { overrides["output"] = v; },
                                         "Output directory (relative paths go under $SUBLAB_OUTPUT_ROOT)");
    sc->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { overrides["seed"] = v; }, "PRNG seed");
  };
  auto opt_string = [&](CLI::App* sc, const std::string& flag, const std::string& key, const std::string& help) {
    sc->add_option_function<std::string>(flag, [&, key](const std::string& v) { overrides[json::json_pointer(key)] = v; }, help);
  };
  auto opt_double = [&](CLI::App* sc, const std::string& flag, const std::string& key, const std::string& help) {
    sc->add_option_function<double>(flag, [&, key](const double& v) { overrides[json::json_pointer(key)] = v; }, help);
  };
  auto opt_size = [&](CLI::App* sc, const std::string& flag, const std::string& key, const std::string& help) {
    sc->add_option_function<std::size_t>(flag, [&, key](const std::size_t& v) { overrides[json::json_pointer(key)] = v; }, help);
  };
  auto opt_vector = [&](CLI::App* sc, const std::string& flag, const std::string& key, const std::string& help) {
    sc->add_option_function<std::vector<double>>(
          flag, [&, key](const std::vector<double>& v) { overrides[json::json_pointer(key)] = v; }, help)
        ->delimiter(',');
  };
  auto geometry = [&](CLI::App* sc, const char* point_key) {
    opt_string(sc, "-f,--frame", "/frame", "Built-in frame name or frame JSON file");
    opt_double(sc, "-e,--epsilon", "/epsilon", "Regularization parameter in [0, 1]");
    opt_vector(sc, std::string("--") + (point_key + 1), point_key, "Point, comma separated");
    opt_double(sc, "-r,--radius", "/radius", "Ball radius");
  };

  auto* frame = app.add_subcommand("frame", "Inspect a frame: commutators, degrees, lambda_I, rank");
  common(frame);
  frame->add_option("action", frame_action, "inspect | brackets | rank")->check(CLI::IsMember({"inspect", "brackets", "rank"}));
  geometry(frame, "/point");

  auto* distance = app.add_subcommand("distance", "Carnot-Caratheodory distance field on a lattice");
  common(distance);
  geometry(distance, "/origin");
  opt_size(distance, "--nodes", "/nodes", "Nodes per axis");
  distance->add_flag_function("--verify-roundtrip", [&](std::int64_t) { overrides["verify_roundtrip"] = true; },
                              "Reload the binary export and compare");

  auto* volume = app.add_subcommand("volume", "Monte-Carlo ball volume");
  common(volume);
  geometry(volume, "/center");
  opt_size(volume, "--samples", "/samples", "Monte-Carlo samples");
  opt_size(volume, "--nodes", "/nodes", "Nodes per axis when a fixed box is configured");

  auto* doubling = app.add_subcommand("doubling", "Doubling ratio |B(2r)| / |B(r)|");
  common(doubling);
  geometry(doubling, "/center");
  opt_size(doubling, "--samples", "/samples", "Monte-Carlo samples per ball");
  opt_double(doubling, "--expect", "/expect", "Expected ratio (enables the pass check)");
  opt_double(doubling, "--tolerance", "/tolerance", "Relative tolerance for --expect");

  auto* poincare = app.add_subcommand("poincare", "Poincare constant estimate over a seeded test ensemble");
  common(poincare);
  geometry(poincare, "/center");
  opt_size(poincare, "--ensemble", "/ensemble", "Number of test functions");

  auto* solve_cmd = app.add_subcommand("solve", "Solve a degenerate parabolic problem");
  common(solve_cmd);
  opt_string(solve_cmd, "-f,--frame", "/frame", "Built-in frame name or frame JSON file");
  opt_double(solve_cmd, "-e,--epsilon", "/epsilon", "Regularization parameter");
  opt_double(solve_cmd, "-T,--final-time", "/T", "Final time");
  opt_double(solve_cmd, "--tau", "/tau", "Time step (default: auto from the CFL limit)");
  opt_string(solve_cmd, "--mode", "/scheme/mode", "explicit | implicit");
  opt_string(solve_cmd, "--stencil", "/scheme/stencil", "nested | monotone");

  auto* harnack = app.add_subcommand("harnack", "Harnack quotient and diagnostics for one (epsilon, rho)");
  common(harnack);
  opt_string(harnack, "-f,--frame", "/frame", "Built-in frame name or frame JSON file");
  opt_double(harnack, "-e,--epsilon", "/epsilon", "Regularization parameter");
  opt_double(harnack, "--rho", "/rho", "Cylinder radius");
  opt_size(harnack, "--heat-nodes", "/heat_nodes", "Heat lattice nodes per axis");

  auto* sweep = app.add_subcommand("sweep", "Epsilon-stability sweep");
  common(sweep);
  opt_size(sweep, "--workers", "/workers", "Parallel rows (0 = all cores)");
  opt_size(sweep, "--heat-nodes", "/heat_nodes", "Heat lattice nodes per axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kPass : kUsageError;
  }

  CLI::App* active = app.get_subcommands().front();
  Run run;
  run.command = active->get_name();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  bool have_out = false;
  try {
    run.config = load_config(config_path);
    run.config.merge_patch(overrides);
    run.out = output_dir(run.config, run.command);
    have_out = true;
    if (run.command == "frame") cmd_frame(run, frame_action);
    else if (run.command == "distance") cmd_distance(run);
    else if (run.command == "volume") cmd_volume(run);
    else if (run.command == "doubling") cmd_doubling(run);
    else if (run.command == "poincare") cmd_poincare(run);
    else if (run.command == "solve") cmd_solve(run);
    else if (run.command == "harnack") cmd_harnack(run);
    else if (run.command == "sweep") cmd_sweep(run);
  } catch (const std::exception& e) {
    const bool usage = dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
                       dynamic_cast<const CflViolation*>(&e) || dynamic_cast<const json::exception*>(&e) ||
                       dynamic_cast<const DimensionMismatch*>(&e);
    std::cerr << "sublab " << run.command << ": " << e.what() << '\n';
    if (have_out) write_manifest(run, elapsed(), e.what());
    return usage ? kUsageError : kCheckFailure;
  }
  write_manifest(run, elapsed(), "");
  std::cerr << "sublab " << run.command << ": " << (run.pass ? "pass" : "FAIL") << " (" << run.out.string() << ")\n";
  return run.pass ? kPass : kCheckFailure;
}
