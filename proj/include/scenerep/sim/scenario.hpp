#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenerep/sim/geometry.hpp"

namespace scenerep::sim {

struct Lane {
  int id = 0;
  std::string name;
  std::vector<Vec2> centerline;
  double width = 3.5;
  std::optional<int> left;
  std::optional<int> right;
  std::vector<int> successors;
};

/// Ordered lane sequence. Consecutive lanes are either successors (follow) or
/// adjacent (lane change).
struct RouteSpec {
  std::vector<int> lanes;
  double start_s_min = 0.0;
  double start_s_max = 0.0;
  Vec2 goal;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct DriverParamRanges {
  Range imperfection_mean{0.3, 0.7};  // Normal(U[lo,hi], std) clipped to [0,1]
  double imperfection_std = 0.1;
  Range impatience{0.0, 1.0};
  Range cooperative{0.0, 1.0};
  Range desired_speed{8.0, 12.0};
  Range min_gap{2.0, 3.0};
};

/// Controls what the simulator reports around the ego vehicle.
struct ObservationSpec {
  double neighbor_radius = 50.0;
  int max_neighbors = 5;
  int route_horizon = 10;     // waypoints per candidate route
  int max_routes = 2;         // candidate routes per agent
  double waypoint_spacing = 1.0;
};

struct EgoTask {
  RouteSpec route;              // nominal route; its goal is the task target
  std::vector<int> start_lanes; // parallel lanes the ego may be spawned on
  double goal_tolerance = 1.0;  // meters of arc length before the goal point
  double initial_speed_max = 5.0;
};

struct ScenarioConfig {
  std::string name;
  std::vector<Lane> lanes;
  std::vector<RouteSpec> routes;  // traffic routes
  EgoTask ego;
  double flow_rate = 100.0;  // vehicles per hour per route
  int flows_per_route = 20;
  int vehicles_per_flow = 4;
  int max_timesteps = 400;
  double dt = 0.1;
  double traffic_preroll = 20.0;  // seconds of traffic simulated before the ego appears
  double ego_max_speed = 10.0;
  DriverParamRanges drivers;
  ObservationSpec observation;

  /// Maximum traffic vehicles spawned per route in one episode.
  int spawn_cap() const { return flows_per_route * vehicles_per_flow; }
};

/// Throws ConfigError when the config breaks a structural invariant.
void validate(const ScenarioConfig& config);

ScenarioConfig load_scenario(const std::string& path);
void save_scenario(const ScenarioConfig& config, const std::string& path);

void to_json(nlohmann::json& j, const ScenarioConfig& c);
void from_json(const nlohmann::json& j, ScenarioConfig& c);

}  // namespace scenerep::sim
