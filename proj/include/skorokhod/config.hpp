#pragma once
// Run configuration: JSON in, validated specs out, plus the named presets the
// CLI ships with.

#include "skorokhod/barrier.hpp"
#include "skorokhod/hjb.hpp"
#include "skorokhod/lagrangian.hpp"
#include "skorokhod/lattice.hpp"
#include "skorokhod/measures.hpp"

#include <string>
#include <vector>

namespace skorokhod {

struct RunConfig {
  GridConfig grid;
  MeasureSpec mu;
  MeasureSpec nu;
  LagrangianSpec lagrangian;
  AscendOptions solver;
  McOptions mc;
  std::string output_dir = "out";
  std::string golden_dir;  // optional: verify also byte-compares artifacts here
};

std::vector<std::string> preset_names();
RunConfig preset_config(const std::string& name);

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
std::string config_to_json(const RunConfig& cfg);

}  // namespace skorokhod
