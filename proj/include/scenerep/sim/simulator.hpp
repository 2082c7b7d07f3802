#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenerep/rl/hybrid_action.hpp"
#include "scenerep/sim/lane_network.hpp"
#include "scenerep/sim/scenario.hpp"
#include "scenerep/sim/vehicle.hpp"

namespace scenerep::sim {

enum class Outcome { kRunning, kSuccess, kCollision, kOffRoute, kTimeout };

const char* outcome_name(Outcome o);

struct AgentObservation {
  int id = 0;  // persistent; 0 is the ego
  VehicleState state;
  std::vector<CandidateRoute> routes;
};

struct SimObservation {
  AgentObservation ego;
  std::vector<AgentObservation> neighbors;  // nearest first, ties by id
  int episode_step = 0;
};

struct StepInfo {
  Outcome outcome = Outcome::kRunning;
  int spawned = 0;  // traffic vehicles spawned since reset (preroll included)
};

struct StepResult {
  SimObservation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct TrafficVehicle {
  int id = 0;
  VehicleState state;
  DriverParams params;
  int route_index = 0;  // position of state.lane_id inside its route
};

/// Lane-graph traffic simulator. Single-threaded; instances share nothing.
class TrafficSimulator {
 public:
  static constexpr int kEgoId = 0;

  explicit TrafficSimulator(ScenarioConfig config);

  SimObservation reset(std::uint64_t seed);
  StepResult step(const rl::HybridAction& action);

  const ScenarioConfig& config() const { return config_; }
  const LaneNetwork& network() const { return net_; }
  const VehicleState& ego() const { return ego_; }
  const std::vector<TrafficVehicle>& traffic() const { return traffic_; }
  bool done() const { return done_; }
  int episode_step() const { return step_; }
  int spawned() const { return spawned_; }

  /// Overrides parameter sampling for newly spawned vehicles (tests, pinned runs).
  void pin_driver_params(std::optional<DriverParams> params) { pinned_params_ = params; }

  /// One JSON-lines trace record describing the current state.
  nlohmann::json trace_record(const rl::HybridAction* action, double reward) const;

 private:
  void advance_traffic(const std::vector<DriverContext>& contexts);
  void step_ego(const rl::HybridAction& action, bool& off_road, bool& dead_end);
  void spawn_traffic();
  DriverContext perceive(const TrafficVehicle& v) const;
  std::optional<int> ego_successor(int lane) const;
  std::optional<int> route_successor(const TrafficVehicle& v, int lane) const;
  SimObservation observe() const;

  ScenarioConfig config_;
  LaneNetwork net_;
  std::vector<int> hops_to_goal_;
  int goal_lane_ = 0;
  double goal_s_ = 0.0;

  std::mt19937_64 rng_;
  VehicleState ego_;
  std::vector<TrafficVehicle> traffic_;
  std::vector<double> next_arrival_;  // seconds, per route
  std::vector<int> spawned_per_route_;
  std::optional<DriverParams> pinned_params_;
  double time_ = 0.0;
  int step_ = 0;
  int next_id_ = 1;
  int spawned_ = 0;
  bool ego_present_ = false;
  bool done_ = true;
};

}  // namespace scenerep::sim
