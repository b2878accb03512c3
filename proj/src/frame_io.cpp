#include "sublab/frame_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sublab/errors.hpp"

namespace sublab {

using nlohmann::json;

FrameSpec parse_frame_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("frame file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("frame file must hold a JSON object");
  FrameSpec spec;
  try {
    spec.dim = j.at("dim").get<std::size_t>();
    spec.step = j.value("step", 1);
    spec.name = j.value("name", std::string());
    if (j.contains("variables")) spec.variables = j.at("variables").get<std::vector<std::string>>();
    else spec.variables = default_variable_names(spec.dim);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("frame file: ") + e.what());
  }
  if (spec.dim == 0) throw ConfigError("frame file: dim must be positive");
  if (spec.variables.size() != spec.dim) throw ConfigError("frame file: variables must list dim names");
  if (!j.contains("generators") || !j["generators"].is_array() || j["generators"].empty())
    throw ConfigError("frame file: generators must be a nonempty array");

  const auto& gens = j["generators"];
  for (std::size_t g = 0; g < gens.size(); ++g) {
    if (!gens[g].is_array() || gens[g].size() != spec.dim)
      throw ConfigError("frame file: generator " + std::to_string(g + 1) + " must have dim components");
    std::vector<Polynomial> comps;
    for (std::size_t k = 0; k < spec.dim; ++k) {
      const auto& c = gens[g][k];
      std::string s = c.is_string() ? c.get<std::string>() : c.is_number() ? c.dump() : std::string();
      if (s.empty()) throw ConfigError("frame file: component must be a string or number");
      try {
        comps.push_back(parse_polynomial(s, spec.dim, spec.variables));
      } catch (const ParseError& e) {
        throw ParseError("generator " + std::to_string(g + 1) + ", component " + std::to_string(k + 1) + " (\"" +
                             s + "\"): " + e.reason(),
                         e.position());
      }
    }
    spec.generators.emplace_back(std::move(comps));
  }
  if (spec.step < 1) throw ConfigError("frame file: step must be >= 1");
  return spec;
}

FrameSpec load_frame_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open frame file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  FrameSpec spec = parse_frame_json(ss.str());
  if (spec.name.empty()) spec.name = path.stem().string();
  return spec;
}

std::string frame_to_json(const FrameSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["dim"] = spec.dim;
  j["variables"] = spec.variables;
  j["step"] = spec.step;
  json gens = json::array();
  for (const auto& g : spec.generators) {
    json comps = json::array();
    for (const auto& c : g.components()) comps.push_back(c.to_string(spec.variables));
    gens.push_back(comps);
  }
  j["generators"] = gens;
  return j.dump(2);
}

FrameSpec builtin_frame(const std::string& name) {
  const char* text = nullptr;
  if (name == "heisenberg")
    text = R"({"name": "heisenberg", "dim": 3, "step": 2, "generators": [["1", "0", "-0.5*y"], ["0", "1", "0.5*x"]]})";
  else if (name == "grushin")
    text = R"({"name": "grushin", "dim": 2, "step": 2, "generators": [["1", "0"], ["0", "x"]]})";
  else if (name == "euclid2")
    text = R"({"name": "euclid2", "dim": 2, "step": 1, "generators": [["1", "0"], ["0", "1"]]})";
  else if (name == "euclid3")
    text = R"({"name": "euclid3", "dim": 3, "step": 1, "generators": [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]]})";
  else if (name == "commuting3")
    text = R"({"name": "commuting3", "dim": 3, "step": 3, "generators": [["1", "0", "0"], ["0", "1", "0"]]})";
  else
    throw ConfigError("unknown built-in frame '" + name + "'");
  return parse_frame_json(text);
}

FrameSpec resolve_frame(const std::string& ref) {
  static const char* names[] = {"heisenberg", "grushin", "euclid2", "euclid3", "commuting3"};
  for (const char* n : names)
    if (ref == n) return builtin_frame(ref);
  return load_frame_file(ref);
}

}  // namespace sublab
