#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sublab/expression.hpp"
#include "sublab/frame_io.hpp"
#include "sublab/harnack.hpp"
#include "sublab/pde.hpp"

namespace sublab {

/// Parsed problem file (see docs/config.md for the keys).
struct ProblemConfig {
  FrameSpec frame;
  double epsilon = 0.0;
  ParabolicProblem problem;
  SchemeConfig scheme;
  std::optional<Expression> exact;
  double error_threshold = 1e-8;
};

/// Throws ConfigError on unknown keys or bad values, ParseError on bad
/// expressions.
ProblemConfig problem_from_json(const nlohmann::json& j);
SweepConfig sweep_from_json(const nlohmann::json& j);
WindowOptions window_from_json(const nlohmann::json& j);

/// Throws ConfigError naming the first key of `j` not in `allowed`.
void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where);

std::vector<double> read_vector(const nlohmann::json& j, const std::string& key, std::size_t dim);

}  // namespace sublab
