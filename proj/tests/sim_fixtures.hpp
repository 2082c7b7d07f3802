#pragma once

#include "scenerep/sim/scenario.hpp"

namespace fixtures {

using scenerep::sim::Lane;
using scenerep::sim::ScenarioConfig;
using scenerep::sim::Vec2;

/// Straight road along +x with `lanes` parallel lanes; lane 0 is the leftmost.
inline ScenarioConfig straight_road(int lanes, double length, double flow_rate) {
  ScenarioConfig c;
  c.name = "straight";
  for (int i = 0; i < lanes; ++i) {
    Lane l;
    l.id = i;
    l.name = "lane" + std::to_string(i);
    const double y = -3.5 * i;
    l.centerline = scenerep::sim::line_points({0.0, y}, {length, y}, 1.0);
    if (i > 0) l.left = i - 1;
    if (i + 1 < lanes) l.right = i + 1;
    c.lanes.push_back(l);
  }
  scenerep::sim::RouteSpec r;
  r.lanes = {0};
  r.start_s_min = 0.0;
  r.start_s_max = 0.0;
  r.goal = {length - 1.0, 0.0};
  c.routes.push_back(r);
  c.ego.route.lanes = {0};
  c.ego.route.start_s_min = 5.0;
  c.ego.route.start_s_max = 5.0;
  c.ego.route.goal = {length - 10.0, 0.0};
  c.ego.start_lanes = {0};
  c.flow_rate = flow_rate;
  c.traffic_preroll = 0.0;
  return c;
}

}  // namespace fixtures
