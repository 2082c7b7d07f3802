#include "scenerep/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scenerep/errors.hpp"

namespace scenerep::sim {

namespace {

constexpr double kEgoSpeedGain = 2.0;  // 1/s, proportional speed tracking
constexpr double kEgoMaxAccel = 3.0;
constexpr double kEgoMaxDecel = 6.0;
constexpr double kLookahead = 50.0;
constexpr double kPathSpacing = 2.0;
constexpr double kSpawnClearance = 10.0;
constexpr double kCooperativeHorizon = 2.0;  // seconds of anticipation at cooperative = 1

double arrival_gap(double rate_per_hour, std::mt19937_64& rng) {
  if (rate_per_hour <= 0.0) return std::numeric_limits<double>::infinity();
  return std::exponential_distribution<double>(rate_per_hour / 3600.0)(rng);
}

}  // namespace

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::kRunning: return "running";
    case Outcome::kSuccess: return "success";
    case Outcome::kCollision: return "collision";
    case Outcome::kOffRoute: return "off_route";
    case Outcome::kTimeout: return "timeout";
  }
  return "unknown";
}

TrafficSimulator::TrafficSimulator(ScenarioConfig config)
    : config_((validate(config), std::move(config))), net_(config_.lanes) {
  goal_lane_ = config_.ego.route.lanes.back();
  goal_s_ = net_.lane(goal_lane_).center.project(config_.ego.route.goal).s;
  hops_to_goal_ = net_.hops_to(goal_lane_);
}

SimObservation TrafficSimulator::reset(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  rng_.seed(seq);
  traffic_.clear();
  time_ = 0.0;
  step_ = 0;
  next_id_ = kEgoId + 1;
  spawned_ = 0;
  ego_present_ = false;
  done_ = false;
  next_arrival_.assign(config_.routes.size(), 0.0);
  spawned_per_route_.assign(config_.routes.size(), 0);
  for (auto& t : next_arrival_) t = arrival_gap(config_.flow_rate, rng_);

  const int preroll = static_cast<int>(std::lround(config_.traffic_preroll / config_.dt));
  for (int i = 0; i < preroll; ++i) {
    std::vector<DriverContext> contexts;
    contexts.reserve(traffic_.size());
    for (const auto& v : traffic_) contexts.push_back(perceive(v));
    advance_traffic(contexts);
    time_ += config_.dt;
    spawn_traffic();
  }

  const auto& starts = config_.ego.start_lanes;
  const int lane = starts[std::uniform_int_distribution<std::size_t>(0, starts.size() - 1)(rng_)];
  ego_ = VehicleState{};
  ego_.lane_id = lane;
  ego_.longitudinal_offset = std::uniform_real_distribution<double>(
      config_.ego.route.start_s_min, config_.ego.route.start_s_max)(rng_);
  ego_.speed = std::uniform_real_distribution<double>(0.0, config_.ego.initial_speed_max)(rng_);
  ego_.route_id = -1;
  place_on_lane(net_, ego_, 0.0);
  std::erase_if(traffic_, [&](const TrafficVehicle& v) {
    return (v.state.position - ego_.position).norm() < kSpawnClearance;
  });
  ego_present_ = true;
  return observe();
}

std::optional<int> TrafficSimulator::ego_successor(int lane) const {
  const auto& succ = net_.lane(lane).successors;
  if (succ.empty()) return std::nullopt;
  return *std::min_element(succ.begin(), succ.end(),
                           [&](int a, int b) { return hops_to_goal_[a] < hops_to_goal_[b]; });
}

std::optional<int> TrafficSimulator::route_successor(const TrafficVehicle& v, int lane) const {
  const auto& lanes = config_.routes[v.state.route_id].lanes;
  for (std::size_t i = static_cast<std::size_t>(v.route_index); i + 1 < lanes.size(); ++i) {
    if (lanes[i] == lane) {
      if (net_.is_successor(lane, lanes[i + 1])) return lanes[i + 1];
      return std::nullopt;  // a lane change is due here
    }
  }
  // Off the nominal route (e.g. candidate routes on an adjacent lane).
  const auto& succ = net_.lane(lane).successors;
  if (succ.empty()) return std::nullopt;
  return succ.front();
}

DriverContext TrafficSimulator::perceive(const TrafficVehicle& v) const {
  DriverContext ctx;
  ctx.dt = config_.dt;

  // Sample the path ahead along the route.
  std::vector<Vec2> pts;
  int lane = v.state.lane_id;
  double s = v.state.longitudinal_offset;
  double travelled = 0.0;
  bool dead_end = false;
  const auto& route = config_.routes[v.state.route_id].lanes;
  const bool final_lane = v.route_index + 1 == static_cast<int>(route.size());
  while (travelled <= kLookahead) {
    const auto& center = net_.lane(lane).center;
    if (s > center.length()) {
      const auto next = route_successor(v, lane);
      if (!next) {
        pts.push_back(center.point_at(center.length()));
        dead_end = !(final_lane && lane == route.back());
        break;
      }
      s -= center.length();
      lane = *next;
      continue;
    }
    pts.push_back(center.point_at(s));
    s += kPathSpacing;
    travelled += kPathSpacing;
  }
  // Drop duplicates produced at lane joins.
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](Vec2 a, Vec2 b) { return (a - b).norm() < 1e-6; }),
            pts.end());
  if (pts.size() < 2) {
    if (dead_end) {
      ctx.leader_gap = 0.0;
      ctx.leader_speed = 0.0;
    }
    return ctx;
  }
  const Polyline path(std::move(pts));

  double best_gap = std::numeric_limits<double>::infinity();
  double best_speed = 0.0;
  auto consider = [&](const VehicleState& o) {
    if ((o.position - v.state.position).norm() > kLookahead + 10.0) return;
    const double corridor = 0.5 * (v.state.width + o.width) + 0.3;
    const double bumper = 0.5 * (v.state.length + o.length);
    const Projection pr = path.project(o.position);
    if (pr.s > 1e-6 && pr.s < path.length() - 1e-6 && std::abs(pr.lateral) < corridor) {
      const double gap = pr.s - bumper;
      if (gap < best_gap) {
        best_gap = gap;
        best_speed = std::max(0.0, o.speed * std::cos(o.heading - path.heading_at(pr.s)));
      }
      return;
    }
    if (v.params.cooperative <= 0.0 || o.speed <= 0.1) return;
    const Vec2 predicted =
        o.position + unit_from_heading(o.heading) * (o.speed * kCooperativeHorizon * v.params.cooperative);
    const Projection pp = path.project(predicted);
    if (pp.s > 1e-6 && pp.s < path.length() - 1e-6 && std::abs(pp.lateral) < corridor) {
      const double gap = pp.s - bumper;
      if (gap < best_gap) {
        best_gap = gap;
        best_speed = 0.0;
      }
    }
  };
  for (const auto& o : traffic_)
    if (o.id != v.id) consider(o.state);
  if (ego_present_) consider(ego_);
  if (dead_end) {
    const double gap = path.length() - 0.5 * v.state.length;
    if (gap < best_gap) {
      best_gap = gap;
      best_speed = 0.0;
    }
  }
  if (std::isfinite(best_gap)) {
    ctx.leader_gap = best_gap;
    ctx.leader_speed = best_speed;
  }
  return ctx;
}

void TrafficSimulator::advance_traffic(const std::vector<DriverContext>& contexts) {
  std::vector<TrafficVehicle> next;
  next.reserve(traffic_.size());
  for (std::size_t i = 0; i < traffic_.size(); ++i) {
    TrafficVehicle v = traffic_[i];
    const auto& route = config_.routes[v.state.route_id].lanes;
    v.state = driver_model_step(v.state, v.params, contexts[i], rng_);

    bool exited = false;
    while (v.state.longitudinal_offset > net_.lane(v.state.lane_id).center.length()) {
      const double len = net_.lane(v.state.lane_id).center.length();
      const auto nxt = route_successor(v, v.state.lane_id);
      if (!nxt) {
        if (v.route_index + 1 == static_cast<int>(route.size())) exited = true;
        else v.state.longitudinal_offset = len;
        break;
      }
      v.state.longitudinal_offset -= len;
      v.state.lane_id = *nxt;
      ++v.route_index;
    }
    if (exited) continue;

    int command = 0;
    if (v.route_index + 1 < static_cast<int>(route.size())) {
      const int target = route[v.route_index + 1];
      const int side = net_.adjacency_side(v.state.lane_id, target);
      if (side != 0) {
        if (v.state.lane_change_direction == side) {
          command = side;
        } else {
          // Gap acceptance in the target lane; impatience shrinks the required gaps.
          const auto& target_center = net_.lane(target).center;
          const double own_s = target_center.project(v.state.position).s;
          const double relax = 1.0 - 0.5 * v.params.impatience;
          bool ok = true;
          auto check = [&](const VehicleState& o) {
            const Projection pr = target_center.project(o.position);
            if (pr.distance > 2.5) return;
            const double ds = pr.s - own_s;
            const double clear = std::abs(ds) - 0.5 * (v.state.length + o.length);
            const double need =
                (v.params.min_gap + (ds >= 0.0 ? v.state.speed : o.speed) * 1.0) * relax;
            if (clear < need) ok = false;
          };
          for (std::size_t j = 0; j < traffic_.size(); ++j)
            if (j != i) check(traffic_[j].state);
          if (ego_present_) check(ego_);
          if (ok) command = side;
        }
      }
    }
    const int lane_before = v.state.lane_id;
    v.state = execute_lane_change(net_, v.state, command, config_.dt).state;
    if (v.state.lane_id != lane_before) ++v.route_index;
    next.push_back(std::move(v));
  }
  traffic_ = std::move(next);
}

void TrafficSimulator::spawn_traffic() {
  for (std::size_t r = 0; r < config_.routes.size(); ++r) {
    if (time_ < next_arrival_[r]) continue;
    if (spawned_per_route_[r] >= config_.spawn_cap()) continue;
    const auto& route = config_.routes[r];
    VehicleState st;
    st.lane_id = route.lanes.front();
    st.longitudinal_offset = route.start_s_min;
    st.route_id = static_cast<int>(r);
    place_on_lane(net_, st, 0.0);
    const bool blocked =
        std::any_of(traffic_.begin(), traffic_.end(),
                    [&](const TrafficVehicle& o) {
                      return (o.state.position - st.position).norm() < kSpawnClearance;
                    }) ||
        (ego_present_ && (ego_.position - st.position).norm() < kSpawnClearance);
    if (blocked) continue;  // retried next step
    TrafficVehicle v;
    v.id = next_id_++;
    v.params = pinned_params_ ? *pinned_params_ : sample_driver_params(config_.drivers, rng_);
    st.speed = v.params.desired_speed;
    v.state = st;
    v.route_index = 0;
    traffic_.push_back(v);
    ++spawned_per_route_[r];
    ++spawned_;
    next_arrival_[r] += arrival_gap(config_.flow_rate, rng_);
  }
}

void TrafficSimulator::step_ego(const rl::HybridAction& action, bool& off_road, bool& dead_end) {
  const double dt = config_.dt;
  const double target = std::clamp(action.target_speed, 0.0, config_.ego_max_speed);
  const double accel = std::clamp(kEgoSpeedGain * (target - ego_.speed), -kEgoMaxDecel, kEgoMaxAccel);
  const double v1 = std::clamp(ego_.speed + accel * dt, 0.0, config_.ego_max_speed);
  ego_.longitudinal_offset += 0.5 * (ego_.speed + v1) * dt;
  ego_.speed = v1;
  while (ego_.longitudinal_offset > net_.lane(ego_.lane_id).center.length()) {
    const double len = net_.lane(ego_.lane_id).center.length();
    const auto next = ego_successor(ego_.lane_id);
    if (!next) {
      ego_.longitudinal_offset = len;
      dead_end = true;
      break;
    }
    ego_.longitudinal_offset -= len;
    ego_.lane_id = *next;
  }
  const auto lc = execute_lane_change(net_, ego_, action.lane_command, dt);
  ego_ = lc.state;
  off_road = lc.off_road;
}

StepResult TrafficSimulator::step(const rl::HybridAction& action) {
  if (done_) throw UsageError("step() called on a finished episode; call reset()");
  std::vector<DriverContext> contexts;
  contexts.reserve(traffic_.size());
  for (const auto& v : traffic_) contexts.push_back(perceive(v));

  bool off_road = false, dead_end = false;
  step_ego(action, off_road, dead_end);
  advance_traffic(contexts);
  time_ += config_.dt;
  spawn_traffic();
  ++step_;

  const OrientedBox ego_box = ego_.footprint();
  const bool collision = std::any_of(traffic_.begin(), traffic_.end(), [&](const TrafficVehicle& v) {
    return boxes_overlap(ego_box, v.state.footprint());
  });
  const bool success = ego_.lane_id == goal_lane_ &&
                       ego_.longitudinal_offset >= goal_s_ - config_.ego.goal_tolerance && !off_road;
  const bool viable = hops_to_goal_[ego_.lane_id] != LaneNetwork::kUnreachable;
  const bool off = off_road || (dead_end && !success) || !viable;

  StepResult res;
  res.reward = (success ? 1.0 : 0.0) + ((collision || off) ? -1.0 : 0.0);
  Outcome outcome = Outcome::kRunning;
  if (collision) outcome = Outcome::kCollision;
  else if (off) outcome = Outcome::kOffRoute;
  else if (success) outcome = Outcome::kSuccess;
  else if (step_ >= config_.max_timesteps) outcome = Outcome::kTimeout;
  done_ = outcome != Outcome::kRunning;
  res.done = done_;
  res.info.outcome = outcome;
  res.info.spawned = spawned_;
  res.observation = observe();
  return res;
}

SimObservation TrafficSimulator::observe() const {
  SimObservation obs;
  obs.episode_step = step_;
  const auto& spec = config_.observation;
  obs.ego.id = kEgoId;
  obs.ego.state = ego_;
  obs.ego.routes = candidate_routes(net_, ego_, spec, [this](int l) { return ego_successor(l); });

  std::vector<std::pair<double, const TrafficVehicle*>> near;
  for (const auto& v : traffic_) {
    const double d = (v.state.position - ego_.position).norm();
    if (d <= spec.neighbor_radius) near.emplace_back(d, &v);
  }
  std::sort(near.begin(), near.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second->id < b.second->id;
  });
  if (static_cast<int>(near.size()) > spec.max_neighbors) near.resize(spec.max_neighbors);
  for (const auto& [d, v] : near) {
    AgentObservation a;
    a.id = v->id;
    a.state = v->state;
    a.routes = candidate_routes(net_, v->state, spec,
                                [this, v](int l) { return route_successor(*v, l); });
    obs.neighbors.push_back(std::move(a));
  }
  return obs;
}

nlohmann::json TrafficSimulator::trace_record(const rl::HybridAction* action, double reward) const {
  using nlohmann::json;
  auto vehicle_json = [](int id, const VehicleState& s) {
    return json{{"id", id},
                {"x", s.position.x},
                {"y", s.position.y},
                {"speed", s.speed},
                {"heading", s.heading},
                {"lane", s.lane_id},
                {"s", s.longitudinal_offset},
                {"d", s.lateral_offset},
                {"route", s.route_id}};
  };
  json vehicles = json::array();
  vehicles.push_back(vehicle_json(kEgoId, ego_));
  for (const auto& v : traffic_) vehicles.push_back(vehicle_json(v.id, v.state));
  json rec{{"step", step_}, {"reward", reward}, {"done", done_}, {"vehicles", vehicles}};
  if (action) {
    rec["action"] = {{"raw", action->raw},
                     {"target_speed", action->target_speed},
                     {"lane_command", action->lane_command}};
  } else {
    rec["action"] = nullptr;
  }
  return rec;
}

}  // namespace scenerep::sim
