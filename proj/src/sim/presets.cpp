#include "scenerep/sim/presets.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

#include "scenerep/errors.hpp"

namespace scenerep::sim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLaneWidth = 3.5;

class Builder {
 public:
  int add(std::string name, std::vector<Vec2> pts) {
    Lane l;
    l.id = static_cast<int>(lanes.size());
    l.name = std::move(name);
    l.centerline = std::move(pts);
    l.width = kLaneWidth;
    lanes.push_back(std::move(l));
    return lanes.back().id;
  }
  void link(int from, int to) { lanes[from].successors.push_back(to); }
  /// `right` is the right-hand neighbour of `left` in the direction of travel.
  void pair(int left, int right) {
    lanes[left].right = right;
    lanes[right].left = left;
  }
  Vec2 end_of(int id) const { return lanes[id].centerline.back(); }
  Vec2 point_on(int id, double s) const {
    const auto& pts = lanes[id].centerline;
    double acc = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double seg = (pts[i] - pts[i - 1]).norm();
      if (acc + seg >= s) return pts[i - 1] + (pts[i] - pts[i - 1]) * ((s - acc) / seg);
      acc += seg;
    }
    return pts.back();
  }

  std::vector<Lane> lanes;
};

RouteSpec traffic_route(const Builder& b, std::vector<int> lanes) {
  RouteSpec r;
  r.goal = b.end_of(lanes.back());
  r.lanes = std::move(lanes);
  return r;
}

// T-intersection: two-lane one-way minor road from the south, four-lane major
// road running east-west. The ego turns left across eastbound traffic and must
// end on the rightmost westbound lane.
ScenarioConfig left_turn() {
  Builder b;
  const double w = kLaneWidth;
  const int minor_left = b.add("minor_left", line_points({0.5 * w, -70.0}, {0.5 * w, -2 * w}));
  const int minor_right = b.add("minor_right", line_points({1.5 * w, -70.0}, {1.5 * w, -2 * w}));
  b.pair(minor_left, minor_right);
  const Vec2 pivot{-2 * w, -2 * w};
  const int turn_inner = b.add("turn_inner", arc_points(pivot, 2.5 * w, 0.0, kPi / 2));
  const int turn_outer = b.add("turn_outer", arc_points(pivot, 3.5 * w, 0.0, kPi / 2));
  b.pair(turn_inner, turn_outer);
  const int wb_inner_east = b.add("wb_inner_east", line_points({70.0, 0.5 * w}, {-2 * w, 0.5 * w}));
  const int wb_outer_east = b.add("wb_outer_east", line_points({70.0, 1.5 * w}, {-2 * w, 1.5 * w}));
  const int wb_inner_west = b.add("wb_inner_west", line_points({-2 * w, 0.5 * w}, {-70.0, 0.5 * w}));
  const int wb_outer_west = b.add("wb_outer_west", line_points({-2 * w, 1.5 * w}, {-70.0, 1.5 * w}));
  b.pair(wb_inner_east, wb_outer_east);
  b.pair(wb_inner_west, wb_outer_west);
  const int eb_inner = b.add("eb_inner", line_points({-70.0, -0.5 * w}, {70.0, -0.5 * w}));
  const int eb_outer = b.add("eb_outer", line_points({-70.0, -1.5 * w}, {70.0, -1.5 * w}));
  b.pair(eb_inner, eb_outer);
  b.link(minor_left, turn_inner);
  b.link(minor_right, turn_outer);
  b.link(turn_inner, wb_inner_west);
  b.link(turn_outer, wb_outer_west);
  b.link(wb_inner_east, wb_inner_west);
  b.link(wb_outer_east, wb_outer_west);

  ScenarioConfig c;
  c.name = "left_turn";
  c.routes = {traffic_route(b, {wb_inner_east, wb_inner_west}),
              traffic_route(b, {wb_outer_east, wb_outer_west}),
              traffic_route(b, {eb_inner}), traffic_route(b, {eb_outer})};
  c.ego.route.lanes = {minor_right, turn_outer, wb_outer_west};
  c.ego.route.start_s_min = 5.0;
  c.ego.route.start_s_max = 30.0;
  c.ego.route.goal = b.point_on(wb_outer_west, 50.0);
  c.ego.start_lanes = {minor_left, minor_right};
  c.lanes = std::move(b.lanes);
  c.flow_rate = 100.0;
  c.max_timesteps = 400;
  return c;
}

// Two-lane road with entrances A (left) and B (right) and exits A (left) and
// B (right). The ego enters at A and leaves at B, so it must cross the road.
ScenarioConfig double_merge() {
  Builder b;
  const double w = kLaneWidth;
  const int entry_a = b.add("entry_a", line_points({-60.0, 4 * w}, {0.0, 0.5 * w}));
  const int entry_b = b.add("entry_b", line_points({-60.0, -4 * w}, {0.0, -0.5 * w}));
  const int main_left = b.add("main_left", line_points({0.0, 0.5 * w}, {120.0, 0.5 * w}));
  const int main_right = b.add("main_right", line_points({0.0, -0.5 * w}, {120.0, -0.5 * w}));
  b.pair(main_left, main_right);
  const int exit_a = b.add("exit_a", line_points({120.0, 0.5 * w}, {180.0, 4 * w}));
  const int exit_b = b.add("exit_b", line_points({120.0, -0.5 * w}, {180.0, -4 * w}));
  b.link(entry_a, main_left);
  b.link(entry_b, main_right);
  b.link(main_left, exit_a);
  b.link(main_right, exit_b);

  ScenarioConfig c;
  c.name = "double_merge";
  c.routes = {traffic_route(b, {entry_a, main_left, exit_a}),
              traffic_route(b, {entry_a, main_left, main_right, exit_b}),
              traffic_route(b, {entry_b, main_right, main_left, exit_a}),
              traffic_route(b, {entry_b, main_right, exit_b})};
  c.ego.route.lanes = {entry_a, main_left, main_right, exit_b};
  c.ego.route.start_s_min = 5.0;
  c.ego.route.start_s_max = 30.0;
  c.ego.route.goal = b.point_on(exit_b, 40.0);
  c.ego.start_lanes = {entry_a};
  c.lanes = std::move(b.lanes);
  c.flow_rate = 200.0;
  c.max_timesteps = 400;
  return c;
}

// Two-lane counter-clockwise ring with four arms A (south), B (east), C (north)
// and D (west). Entries and exits connect to the outer ring lane only.
ScenarioConfig roundabout(char exit_arm) {
  Builder b;
  const double w = kLaneWidth;
  const double r_outer = 20.0;
  const double r_inner = r_outer - w;
  const double arm_len = 60.0;
  const double offset = 15.0 * kPi / 180.0;
  const std::array<double, 4> arm_angle = {-kPi / 2, 0.0, kPi / 2, kPi};  // A B C D

  // Ring split points in counter-clockwise order starting at A's entry.
  std::vector<double> cuts;
  for (int a = 0; a < 4; ++a) {
    cuts.push_back(arm_angle[a] + offset);        // entry join
    cuts.push_back(arm_angle[(a + 1) % 4] - offset);  // next arm's exit split
  }
  for (std::size_t i = 1; i < cuts.size(); ++i)
    while (cuts[i] <= cuts[i - 1]) cuts[i] += 2 * kPi;

  const Vec2 origin{0.0, 0.0};
  std::vector<int> outer, inner;
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    double a0 = cuts[i];
    double a1 = i + 1 < cuts.size() ? cuts[i + 1] : cuts[0] + 2 * kPi;
    outer.push_back(b.add("ring_outer_" + std::to_string(i),
                          arc_points(origin, r_outer, a0, a1 - a0)));
    inner.push_back(b.add("ring_inner_" + std::to_string(i),
                          arc_points(origin, r_inner, a0, a1 - a0)));
    b.pair(inner.back(), outer.back());
  }
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    b.link(outer[i], outer[(i + 1) % cuts.size()]);
    b.link(inner[i], inner[(i + 1) % cuts.size()]);
  }
  std::array<int, 4> entries{}, exits{};
  const char names[4] = {'a', 'b', 'c', 'd'};
  for (int a = 0; a < 4; ++a) {
    const double th = arm_angle[a];
    const Vec2 radial = unit_from_heading(th);
    // Right-hand traffic: inbound lane lies counter-clockwise of the arm axis.
    const Vec2 ccw{-radial.y, radial.x};
    const Vec2 entry_far = radial * arm_len + ccw * (0.5 * w);
    const Vec2 exit_far = radial * arm_len - ccw * (0.5 * w);
    entries[a] = b.add(std::string("entry_") + names[a],
                       line_points(entry_far, unit_from_heading(th + offset) * r_outer));
    exits[a] = b.add(std::string("exit_") + names[a],
                     line_points(unit_from_heading(th - offset) * r_outer, exit_far));
    // Segment 2a starts at this arm's entry; segment 2a-2 ends at this arm's exit.
    b.link(entries[a], outer[2 * a]);
    b.link(outer[(2 * a + 6) % 8], exits[a]);
  }

  auto ring_path = [&](int from_arm, int to_arm) {
    std::vector<int> lanes{entries[from_arm]};
    int seg = 2 * from_arm;
    const int last = (2 * to_arm + 6) % 8;
    while (true) {
      lanes.push_back(outer[seg]);
      if (seg == last) break;
      seg = (seg + 1) % 8;
    }
    lanes.push_back(exits[to_arm]);
    return lanes;
  };

  ScenarioConfig c;
  const int target = exit_arm - 'a';
  c.name = std::string("roundabout_") + exit_arm;
  for (int from = 0; from < 4; ++from)
    for (int to = 0; to < 4; ++to)
      if (from != to) c.routes.push_back(traffic_route(b, ring_path(from, to)));
  c.ego.route.lanes = ring_path(0, target);
  c.ego.route.start_s_min = 5.0;
  c.ego.route.start_s_max = 30.0;
  c.ego.route.goal = b.point_on(exits[target], 30.0);
  c.ego.start_lanes = {entries[0]};
  c.lanes = std::move(b.lanes);
  c.flow_rate = 100.0;
  c.max_timesteps = target == 1 ? 400 : (target == 2 ? 600 : 800);
  c.drivers.desired_speed = {6.0, 10.0};
  return c;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"left_turn", "double_merge", "roundabout_a", "roundabout_b", "roundabout_c"};
}

ScenarioConfig preset_scenario(const std::string& name) {
  ScenarioConfig c;
  if (name == "left_turn") c = left_turn();
  else if (name == "double_merge") c = double_merge();
  else if (name == "roundabout_a") c = roundabout('b');
  else if (name == "roundabout_b") c = roundabout('c');
  else if (name == "roundabout_c") c = roundabout('d');
  else throw ConfigError("unknown scenario preset: " + name);
  if (name.starts_with("roundabout")) c.name = name;
  validate(c);
  return c;
}

ScenarioConfig resolve_scenario(const std::string& name_or_path) {
  for (const auto& n : preset_names())
    if (n == name_or_path) return preset_scenario(n);
  if (std::filesystem::exists(name_or_path)) return load_scenario(name_or_path);
  throw ConfigError("unknown scenario: " + name_or_path);
}

}  // namespace scenerep::sim
