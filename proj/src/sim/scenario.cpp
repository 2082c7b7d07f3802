#include "scenerep/sim/scenario.hpp"

#include <fstream>

#include "scenerep/errors.hpp"
#include "scenerep/sim/lane_network.hpp"

namespace scenerep::sim {

using nlohmann::json;

namespace {

json points_json(const std::vector<Vec2>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back({p.x, p.y});
  return arr;
}

std::vector<Vec2> points_from(const json& arr) {
  std::vector<Vec2> pts;
  for (const auto& p : arr) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return pts;
}

json route_json(const RouteSpec& r) {
  return {{"lanes", r.lanes},
          {"start_interval", {r.start_s_min, r.start_s_max}},
          {"goal", {r.goal.x, r.goal.y}}};
}

RouteSpec route_from(const json& j) {
  RouteSpec r;
  r.lanes = j.at("lanes").get<std::vector<int>>();
  r.start_s_min = j.at("start_interval").at(0).get<double>();
  r.start_s_max = j.at("start_interval").at(1).get<double>();
  r.goal = {j.at("goal").at(0).get<double>(), j.at("goal").at(1).get<double>()};
  return r;
}

json range_json(Range r) { return {r.lo, r.hi}; }
Range range_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

void check_route(const LaneNetwork& net, const RouteSpec& route, const std::string& what) {
  if (route.lanes.empty()) throw ConfigError(what + ": empty route");
  for (int id : route.lanes) {
    if (id < 0 || id >= static_cast<int>(net.size()))
      throw ConfigError(what + ": unknown lane " + std::to_string(id));
  }
  for (std::size_t i = 0; i + 1 < route.lanes.size(); ++i) {
    const int a = route.lanes[i], b = route.lanes[i + 1];
    if (!net.is_successor(a, b) && net.adjacency_side(a, b) == 0)
      throw ConfigError(what + ": disconnected route between lanes " + std::to_string(a) +
                        " and " + std::to_string(b));
  }
  const auto& first = net.lane(route.lanes.front()).center;
  if (route.start_s_min < 0.0 || route.start_s_max < route.start_s_min ||
      route.start_s_max > first.length())
    throw ConfigError(what + ": start interval outside the first lane");
  const auto& last = net.lane(route.lanes.back()).center;
  if (last.project(route.goal).distance > 0.5)
    throw ConfigError(what + ": goal point does not lie on the final lane");
}

}  // namespace

void validate(const ScenarioConfig& c) {
  if (c.dt != 0.1) throw ConfigError("simulation interval must be exactly 0.1 s");
  if (c.max_timesteps <= 0) throw ConfigError("max_timesteps must be positive");
  if (c.flow_rate < 0.0) throw ConfigError("flow_rate must be non-negative");
  if (c.ego_max_speed <= 0.0) throw ConfigError("ego_max_speed must be positive");
  const LaneNetwork net(c.lanes);  // checks polylines, ids and adjacency
  for (std::size_t i = 0; i < c.routes.size(); ++i)
    check_route(net, c.routes[i], "route " + std::to_string(i));
  check_route(net, c.ego.route, "ego route");
  const auto hops = net.hops_to(c.ego.route.lanes.back());
  if (c.ego.start_lanes.empty()) throw ConfigError("ego needs at least one start lane");
  for (int id : c.ego.start_lanes) {
    if (id < 0 || id >= static_cast<int>(net.size()))
      throw ConfigError("unknown ego start lane");
    if (hops[id] == LaneNetwork::kUnreachable)
      throw ConfigError("ego start lane cannot reach the goal");
    if (c.ego.route.start_s_max > net.lane(id).center.length())
      throw ConfigError("ego start interval exceeds a start lane");
  }
  const auto& obs = c.observation;
  if (obs.max_neighbors < 0 || obs.route_horizon <= 0 || obs.max_routes <= 0 ||
      obs.waypoint_spacing <= 0.0 || obs.neighbor_radius <= 0.0)
    throw ConfigError("invalid observation spec");
}

void to_json(json& j, const ScenarioConfig& c) {
  json lanes = json::array();
  for (const auto& l : c.lanes) {
    json lj = {{"id", l.id},
               {"name", l.name},
               {"centerline", points_json(l.centerline)},
               {"width", l.width},
               {"successors", l.successors}};
    lj["left"] = l.left ? json(*l.left) : json(nullptr);
    lj["right"] = l.right ? json(*l.right) : json(nullptr);
    lanes.push_back(std::move(lj));
  }
  json routes = json::array();
  for (const auto& r : c.routes) routes.push_back(route_json(r));
  j = json{{"name", c.name},
           {"lanes", lanes},
           {"routes", routes},
           {"ego",
            {{"route", route_json(c.ego.route)},
             {"start_lanes", c.ego.start_lanes},
             {"goal_tolerance", c.ego.goal_tolerance},
             {"initial_speed_max", c.ego.initial_speed_max}}},
           {"flow_rate", c.flow_rate},
           {"flows_per_route", c.flows_per_route},
           {"vehicles_per_flow", c.vehicles_per_flow},
           {"max_timesteps", c.max_timesteps},
           {"dt", c.dt},
           {"traffic_preroll", c.traffic_preroll},
           {"ego_max_speed", c.ego_max_speed},
           {"drivers",
            {{"imperfection_mean", range_json(c.drivers.imperfection_mean)},
             {"imperfection_std", c.drivers.imperfection_std},
             {"impatience", range_json(c.drivers.impatience)},
             {"cooperative", range_json(c.drivers.cooperative)},
             {"desired_speed", range_json(c.drivers.desired_speed)},
             {"min_gap", range_json(c.drivers.min_gap)}}},
           {"observation",
            {{"neighbor_radius", c.observation.neighbor_radius},
             {"max_neighbors", c.observation.max_neighbors},
             {"route_horizon", c.observation.route_horizon},
             {"max_routes", c.observation.max_routes},
             {"waypoint_spacing", c.observation.waypoint_spacing}}}};
}

void from_json(const json& j, ScenarioConfig& c) {
  c = ScenarioConfig{};
  c.name = j.value("name", "");
  for (const auto& lj : j.at("lanes")) {
    Lane l;
    l.id = lj.at("id").get<int>();
    l.name = lj.value("name", "");
    l.centerline = points_from(lj.at("centerline"));
    l.width = lj.value("width", 3.5);
    if (lj.contains("left") && !lj["left"].is_null()) l.left = lj["left"].get<int>();
    if (lj.contains("right") && !lj["right"].is_null()) l.right = lj["right"].get<int>();
    l.successors = lj.value("successors", std::vector<int>{});
    c.lanes.push_back(std::move(l));
  }
  for (const auto& rj : j.at("routes")) c.routes.push_back(route_from(rj));
  const auto& ej = j.at("ego");
  c.ego.route = route_from(ej.at("route"));
  c.ego.start_lanes = ej.at("start_lanes").get<std::vector<int>>();
  c.ego.goal_tolerance = ej.value("goal_tolerance", 1.0);
  c.ego.initial_speed_max = ej.value("initial_speed_max", 5.0);
  c.flow_rate = j.value("flow_rate", 100.0);
  c.flows_per_route = j.value("flows_per_route", 20);
  c.vehicles_per_flow = j.value("vehicles_per_flow", 4);
  c.max_timesteps = j.value("max_timesteps", 400);
  c.dt = j.value("dt", 0.1);
  c.traffic_preroll = j.value("traffic_preroll", 20.0);
  c.ego_max_speed = j.value("ego_max_speed", 10.0);
  if (j.contains("drivers")) {
    const auto& d = j["drivers"];
    c.drivers.imperfection_mean = range_from(d.at("imperfection_mean"));
    c.drivers.imperfection_std = d.at("imperfection_std").get<double>();
    c.drivers.impatience = range_from(d.at("impatience"));
    c.drivers.cooperative = range_from(d.at("cooperative"));
    c.drivers.desired_speed = range_from(d.at("desired_speed"));
    c.drivers.min_gap = range_from(d.at("min_gap"));
  }
  if (j.contains("observation")) {
    const auto& o = j["observation"];
    c.observation.neighbor_radius = o.value("neighbor_radius", 50.0);
    c.observation.max_neighbors = o.value("max_neighbors", 5);
    c.observation.route_horizon = o.value("route_horizon", 10);
    c.observation.max_routes = o.value("max_routes", 2);
    c.observation.waypoint_spacing = o.value("waypoint_spacing", 1.0);
  }
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed scenario file " + path + ": " + e.what());
  }
  ScenarioConfig c;
  try {
    c = j.get<ScenarioConfig>();
  } catch (const json::exception& e) {
    throw ConfigError("malformed scenario file " + path + ": " + e.what());
  }
  validate(c);
  return c;
}

void save_scenario(const ScenarioConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write scenario file: " + path);
  out << json(config).dump(1) << '\n';
}

}  // namespace scenerep::sim
