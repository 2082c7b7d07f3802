#include "scenerep/rl/hybrid_action.hpp"

#include <cmath>

#include "scenerep/errors.hpp"

namespace scenerep::rl {

HybridAction to_env(std::array<double, 2> raw, double v_max) {
  for (double v : raw) {
    if (!(v >= -1.0 && v <= 1.0)) throw UsageError("raw action outside [-1, 1]");
  }
  HybridAction a;
  a.raw = raw;
  a.target_speed = (raw[0] + 1.0) / 2.0 * v_max;
  constexpr double kThird = 1.0 / 3.0;
  if (raw[1] < -kThird) a.lane_command = -1;
  else if (raw[1] > kThird) a.lane_command = 1;
  else a.lane_command = 0;
  return a;
}

}  // namespace scenerep::rl
