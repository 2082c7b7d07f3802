#include "scenerep/sim/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace scenerep::sim {

DriverParams sample_driver_params(const DriverParamRanges& r, std::mt19937_64& rng) {
  auto uniform = [&](Range range) {
    return std::uniform_real_distribution<double>(range.lo, range.hi)(rng);
  };
  DriverParams p;
  const double imperfection_mean = uniform(r.imperfection_mean);
  p.imperfection = std::clamp(
      std::normal_distribution<double>(imperfection_mean, r.imperfection_std)(rng), 0.0, 1.0);
  p.impatience = uniform(r.impatience);
  p.cooperative = uniform(r.cooperative);
  p.desired_speed = uniform(r.desired_speed);
  p.min_gap = uniform(r.min_gap);
  return p;
}

double idm_acceleration(double speed, const DriverParams& params, const DriverContext& ctx,
                        const IdmConstants& k) {
  double accel = k.max_accel * (1.0 - std::pow(speed / params.desired_speed, k.exponent));
  if (ctx.leader_gap) {
    const double closing = speed - ctx.leader_speed;
    const double desired_gap =
        params.min_gap +
        std::max(0.0, speed * k.time_headway +
                          speed * closing / (2.0 * std::sqrt(k.max_accel * k.comfort_decel)));
    const double gap = std::max(*ctx.leader_gap, 0.01);
    accel -= k.max_accel * (desired_gap / gap) * (desired_gap / gap);
  }
  return std::clamp(accel, -k.max_decel, k.max_accel);
}

VehicleState driver_model_step(const VehicleState& vehicle, const DriverParams& params,
                               const DriverContext& ctx, std::mt19937_64& rng,
                               const IdmConstants& k) {
  double accel = idm_acceleration(vehicle.speed, params, ctx, k);
  if (params.imperfection > 0.0) {
    accel += k.noise_accel * params.imperfection * std::normal_distribution<double>(0.0, 1.0)(rng);
    accel = std::clamp(accel, -k.max_decel, k.max_accel);
  }
  const double v0 = vehicle.speed;
  if (ctx.leader_gap) {
    // Safe-speed guard: after this step we must still be able to stop at max_decel
    // without entering min_gap, even if the leader brakes just as hard.
    const double d = k.max_decel;
    const double room = *ctx.leader_gap - params.min_gap + ctx.leader_speed * ctx.dt +
                        ctx.leader_speed * ctx.leader_speed / (2.0 * d);
    const double c = 0.5 * v0 * ctx.dt - room;
    double limit = accel;
    if (c <= 0.0) {
      const double v_safe = d * (-0.5 * ctx.dt + std::sqrt(0.25 * ctx.dt * ctx.dt - 2.0 * c / d));
      limit = (v_safe - v0) / ctx.dt;
    } else if (v0 > 0.0) {
      limit = room > 0.0 ? -v0 * v0 / (2.0 * room) : -d;
    }
    accel = std::max(std::min(accel, limit), -d);
  }
  VehicleState next = vehicle;
  double v1 = v0 + accel * ctx.dt;
  double distance;
  if (v1 < 0.0) {
    // Stops inside the step.
    distance = accel < 0.0 ? v0 * v0 / (-2.0 * accel) : 0.0;
    v1 = 0.0;
  } else {
    distance = 0.5 * (v0 + v1) * ctx.dt;
  }
  next.speed = std::min(v1, kVehicleMaxSpeed);
  next.longitudinal_offset += distance;
  return next;
}

int lane_change_steps(double dt) { return static_cast<int>(std::lround(kLaneChangeSeconds / dt)); }

LaneChangeResult execute_lane_change(const LaneNetwork& net, const VehicleState& vehicle,
                                     int command, double dt) {
  const int total = lane_change_steps(dt);
  LaneChangeResult out{vehicle, false};
  VehicleState& v = out.state;
  const double width = net.lane(v.lane_id).width;
  const double lateral_before = v.lateral_offset;

  if (v.lane_change_direction == 0 && command != 0) {
    v.lane_change_direction = command;
    v.lane_change_step = 0;
  }
  if (v.lane_change_direction != 0) {
    if (command == v.lane_change_direction) ++v.lane_change_step;
    else --v.lane_change_step;
    if (v.lane_change_step <= 0) {
      v.lane_change_step = 0;
      v.lane_change_direction = 0;
    }
  }

  const int dir = v.lane_change_direction;
  const double frac =
      dir == 0 ? 0.0
               : 0.5 * (1.0 - std::cos(std::numbers::pi * v.lane_change_step / total));
  v.lateral_offset = -dir * width * frac;

  const auto target = dir == 0 ? std::nullopt : net.adjacent(v.lane_id, dir);
  if (dir != 0 && !target && 2 * v.lane_change_step >= total) out.off_road = true;

  const double rate = (v.lateral_offset - lateral_before) / dt;
  if (dir != 0 && target && v.lane_change_step >= total) {
    const Vec2 world = net.lane(v.lane_id).center.offset_point(v.longitudinal_offset, v.lateral_offset);
    v.lane_id = *target;
    v.longitudinal_offset = net.lane(*target).center.project(world).s;
    v.lateral_offset = 0.0;
    v.lane_change_direction = 0;
    v.lane_change_step = 0;
  }
  place_on_lane(net, v, rate);
  return out;
}

void place_on_lane(const LaneNetwork& net, VehicleState& v, double lateral_rate) {
  const auto& center = net.lane(v.lane_id).center;
  v.position = center.offset_point(v.longitudinal_offset, v.lateral_offset);
  v.heading = wrap_angle(center.heading_at(v.longitudinal_offset) +
                         std::atan2(lateral_rate, std::max(v.speed, 1.0)));
}

namespace {

CandidateRoute walk_lanes(const LaneNetwork& net, int lane, double s, const ObservationSpec& spec,
                          const SuccessorChooser& next_lane) {
  CandidateRoute route;
  route.reserve(static_cast<std::size_t>(spec.route_horizon));
  while (static_cast<int>(route.size()) < spec.route_horizon) {
    const auto& center = net.lane(lane).center;
    if (s > center.length() + 1e-9) {
      const auto next = next_lane(lane);
      if (!next) break;
      s -= center.length();
      lane = *next;
      continue;
    }
    const Vec2 p = center.point_at(s);
    route.push_back({p.x, p.y, center.heading_at(s)});
    s += spec.waypoint_spacing;
  }
  return route;
}

}  // namespace

std::vector<CandidateRoute> candidate_routes(const LaneNetwork& net, const VehicleState& agent,
                                             const ObservationSpec& spec,
                                             const SuccessorChooser& preferred) {
  std::vector<CandidateRoute> routes;
  if (agent.lane_id < 0 || agent.lane_id >= static_cast<int>(net.size())) return routes;
  auto push = [&](CandidateRoute r) {
    if (!r.empty() && static_cast<int>(routes.size()) < spec.max_routes) routes.push_back(std::move(r));
  };

  push(walk_lanes(net, agent.lane_id, agent.longitudinal_offset, spec, preferred));

  // First branching point on the preferred path within the horizon.
  const double horizon = spec.route_horizon * spec.waypoint_spacing;
  double remaining = net.lane(agent.lane_id).center.length() - agent.longitudinal_offset;
  int lane = agent.lane_id;
  while (remaining < horizon) {
    const auto& succ = net.lane(lane).successors;
    const auto pref = preferred(lane);
    if (!pref) break;
    if (succ.size() > 1) {
      const auto alt = std::find_if(succ.begin(), succ.end(), [&](int s) { return s != *pref; });
      const int branch_lane = lane;
      const int alt_lane = *alt;
      push(walk_lanes(net, agent.lane_id, agent.longitudinal_offset, spec,
                      [&](int l) -> std::optional<int> {
                        return l == branch_lane ? std::optional<int>(alt_lane) : preferred(l);
                      }));
      break;
    }
    lane = *pref;
    remaining += net.lane(lane).center.length();
  }

  for (int side : {-1, 1}) {
    const auto adj = net.adjacent(agent.lane_id, side);
    if (!adj) continue;
    const double s = net.lane(*adj).center.project(agent.position).s;
    push(walk_lanes(net, *adj, s, spec, preferred));
  }
  return routes;
}

}  // namespace scenerep::sim
