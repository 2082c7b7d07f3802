#pragma once

#include <string>
#include <vector>

#include "scenerep/sim/scenario.hpp"

namespace scenerep::sim {

/// Names accepted by `preset_scenario`.
std::vector<std::string> preset_names();

/// Built-in scenario by name: left_turn, double_merge, roundabout_a/b/c.
ScenarioConfig preset_scenario(const std::string& name);

/// A preset name or a path to a scenario JSON file.
ScenarioConfig resolve_scenario(const std::string& name_or_path);

}  // namespace scenerep::sim
