#pragma once

#include <array>

namespace scenerep::rl {

/// Policy output in [-1,1]^2 together with the command the simulator executes.
struct HybridAction {
  std::array<double, 2> raw{0.0, 0.0};
  double target_speed = 0.0;  // V_t in [0, V_max]
  int lane_command = 0;       // -1 change left, 0 keep, +1 change right
};

/// Maps a raw action onto target speed and a three-way lane command.
/// Throws UsageError when `raw` leaves [-1,1]^2.
HybridAction to_env(std::array<double, 2> raw, double v_max);

}  // namespace scenerep::rl
