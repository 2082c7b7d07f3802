#pragma once

#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "scenerep/sim/geometry.hpp"
#include "scenerep/sim/lane_network.hpp"
#include "scenerep/sim/scenario.hpp"

namespace scenerep::sim {

inline constexpr double kVehicleLength = 4.5;
inline constexpr double kVehicleWidth = 1.8;
inline constexpr double kLaneChangeSeconds = 2.0;
inline constexpr double kVehicleMaxSpeed = 20.0;

struct VehicleState {
  Vec2 position;
  double speed = 0.0;
  double heading = 0.0;
  int lane_id = -1;
  double longitudinal_offset = 0.0;  // arc length along the current lane
  double lateral_offset = 0.0;       // positive = left of the lane center
  double length = kVehicleLength;
  double width = kVehicleWidth;
  int route_id = -1;                 // -1 for the ego vehicle
  int lane_change_direction = 0;     // -1 left, +1 right, 0 none
  int lane_change_step = 0;          // progress in simulation steps

  OrientedBox footprint() const { return {position, heading, length, width}; }
  bool operator==(const VehicleState&) const = default;
};

struct DriverParams {
  double desired_speed = 10.0;
  double min_gap = 2.0;
  double imperfection = 0.0;
  double impatience = 0.0;
  double cooperative = 0.0;
};

/// Draws one vehicle's parameters from the scenario ranges.
DriverParams sample_driver_params(const DriverParamRanges& ranges, std::mt19937_64& rng);

/// What a driver perceives ahead along its path.
struct DriverContext {
  std::optional<double> leader_gap;  // bumper-to-bumper distance
  double leader_speed = 0.0;         // leader speed along the path
  double dt = 0.1;
};

/// Intelligent Driver Model constants shared by all neighbours.
struct IdmConstants {
  double max_accel = 2.0;
  double comfort_decel = 3.0;
  double time_headway = 1.2;
  double exponent = 4.0;
  double max_decel = 9.0;
  double noise_accel = 1.0;  // accel noise std at imperfection = 1
};

/// IDM acceleration for the given state, without noise.
double idm_acceleration(double speed, const DriverParams& params, const DriverContext& ctx,
                        const IdmConstants& k = {});

/// Advances speed and arc length of a neighbour. Lane topology is handled by
/// the simulator; the returned offset may exceed the lane length.
VehicleState driver_model_step(const VehicleState& vehicle, const DriverParams& params,
                               const DriverContext& ctx, std::mt19937_64& rng,
                               const IdmConstants& k = {});

struct LaneChangeResult {
  VehicleState state;
  bool off_road = false;  // crossed a lane boundary with no lane beyond it
};

/// One step of the lateral controller. A held command completes a change in
/// kLaneChangeSeconds with a cosine profile; releasing it steers back.
LaneChangeResult execute_lane_change(const LaneNetwork& net, const VehicleState& vehicle,
                                     int command, double dt);

/// Number of steps a complete lane change takes.
int lane_change_steps(double dt);

/// Recomputes world position from lane, arc length and lateral offset.
void place_on_lane(const LaneNetwork& net, VehicleState& v, double lateral_rate);

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};
using CandidateRoute = std::vector<Waypoint>;

/// Picks the next lane when the current one ends; nullopt means a dead end.
using SuccessorChooser = std::function<std::optional<int>(int lane)>;

/// Forward lane-center waypoint sequences: the preferred path first, then an
/// alternative branch, then adjacent lanes; at most `spec.max_routes`.
std::vector<CandidateRoute> candidate_routes(const LaneNetwork& net, const VehicleState& agent,
                                             const ObservationSpec& spec,
                                             const SuccessorChooser& preferred);

}  // namespace scenerep::sim
