#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sublab/frames.hpp"

namespace sublab {

/// A frame as read from a definition file.
struct FrameSpec {
  std::string name;
  std::size_t dim = 0;
  std::vector<std::string> variables;
  std::vector<PolyVectorField> generators;
  int step = 1;

  CommutatorTable table() const { return enumerate_commutators(generators, step); }
};

/// Parses `{"dim": n, "generators": [[...], ...], "step": r}` with optional
/// "name" and "variables". Generator components are polynomial strings.
FrameSpec parse_frame_json(const std::string& text);
FrameSpec load_frame_file(const std::filesystem::path& path);
std::string frame_to_json(const FrameSpec& spec);

/// Built-in frames: "heisenberg", "grushin", "euclid2", "euclid3",
/// "commuting3" ((d/dx, d/dy) in R^3, which fails the rank condition).
FrameSpec builtin_frame(const std::string& name);

/// Resolves `ref` as a built-in name first, then as a file path.
FrameSpec resolve_frame(const std::string& ref);

}  // namespace sublab
