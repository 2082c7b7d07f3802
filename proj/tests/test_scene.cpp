#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "scenerep/errors.hpp"
#include "scenerep/rl/hybrid_action.hpp"
#include "scenerep/scene/scene_state.hpp"
#include "scenerep/sim/presets.hpp"
#include "scenerep/sim/simulator.hpp"

using namespace scenerep;
using scene::SceneDims;
using scene::SceneState;
using sim::AgentObservation;
using sim::SimObservation;

namespace {

constexpr double kPi = std::numbers::pi;

AgentObservation agent(int id, double x, double y, double speed = 0.0, double heading = 0.0) {
  AgentObservation a;
  a.id = id;
  a.state.position = {x, y};
  a.state.speed = speed;
  a.state.heading = heading;
  sim::CandidateRoute r;
  for (int i = 0; i < 10; ++i)
    r.push_back({x + i * std::cos(heading), y + i * std::sin(heading), heading});
  a.routes.push_back(r);
  return a;
}

SimObservation scene_at(int step, AgentObservation ego, std::vector<AgentObservation> neighbors) {
  SimObservation o;
  o.episode_step = step;
  o.ego = std::move(ego);
  o.neighbors = std::move(neighbors);
  return o;
}

// Random valid state from a short simulator rollout.
std::vector<SceneState> rollout_states(const std::string& scenario, std::uint64_t seed, int steps) {
  sim::TrafficSimulator sim(sim::preset_scenario(scenario));
  scene::HistoryBuffer buf(10);
  auto obs = sim.reset(seed);
  buf.update(obs);
  std::vector<SceneState> out{scene::build_state(buf, obs)};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < steps; ++t) {
    const auto r = sim.step(rl::to_env({u(rng), 0.0}, 10.0));
    buf.update(r.observation);
    out.push_back(scene::build_state(buf, r.observation));
    if (r.done) break;
  }
  return out;
}

}  // namespace

TEST_CASE("hybrid action mapping") {
  auto a = rl::to_env({0.0, 0.0}, 10.0);
  CHECK(a.target_speed == 5.0);
  CHECK(a.lane_command == 0);
  a = rl::to_env({1.0, 0.5}, 10.0);
  CHECK(a.target_speed == 10.0);
  CHECK(a.lane_command == 1);
  a = rl::to_env({-1.0, -0.34}, 10.0);
  CHECK(a.target_speed == 0.0);
  CHECK(a.lane_command == -1);
  CHECK(rl::to_env({0, 1.0 / 3.0}, 10).lane_command == 0);
  CHECK(rl::to_env({0, -1.0 / 3.0}, 10).lane_command == 0);
  CHECK(rl::to_env({0, 1.0}, 10).lane_command == 1);
  CHECK(rl::to_env({0, -1.0}, 10).lane_command == -1);
  CHECK_THROWS_AS(rl::to_env({1.01, 0}, 10), UsageError);
  CHECK_THROWS_AS(rl::to_env({0, std::nan("")}, 10), UsageError);

  // The three preimages partition [-1, 1].
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 100000; ++i) {
    const double x = u(rng);
    const int l = rl::to_env({x, x}, 10).lane_command;
    const int expected = x < -1.0 / 3.0 ? -1 : (x > 1.0 / 3.0 ? 1 : 0);
    REQUIRE(l == expected);
    REQUIRE(rl::to_env({x, 0}, 10).target_speed == doctest::Approx((x + 1) * 5.0));
  }
}

TEST_CASE("state shapes and empty neighbourhood") {
  scene::HistoryBuffer buf(10);
  const auto obs = scene_at(0, agent(0, 3, 4, 5, 0.3), {});
  buf.update(obs);
  const auto s = scene::build_state(buf, obs);
  CHECK(s.motion.size() == 6u * 10 * 5);
  CHECK(s.routes.size() == 6u * 2 * 10 * 3);
  CHECK(s.agent_mask == std::vector<std::uint8_t>{1, 0, 0, 0, 0, 0});
  for (int a = 1; a < 6; ++a)
    for (int k = 0; k < 2; ++k)
      for (int w = 0; w < 10; ++w) CHECK(s.route_mask[s.route_mask_index(a, k, w)] == 0);
  CHECK(s.route_mask[s.route_mask_index(0, 0, 0)] == 1);
  CHECK(s.route_mask[s.route_mask_index(0, 1, 0)] == 0);
  // Ego centred and aligned with +x.
  CHECK(s.motion[s.motion_index(0, 9, 0)] == 0.0);
  CHECK(s.motion[s.motion_index(0, 9, 1)] == 0.0);
  CHECK(s.motion[s.motion_index(0, 9, 4)] == 0.0);
  CHECK(s.motion[s.motion_index(0, 9, 2)] == doctest::Approx(5.0));
  CHECK(std::abs(s.motion[s.motion_index(0, 9, 3)]) < 1e-12);
  // Ego route heads straight along +x in its own frame.
  CHECK(s.routes[s.route_index(0, 0, 3, 0)] == doctest::Approx(3.0));
  CHECK(s.routes[s.route_index(0, 0, 3, 1)] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.routes[s.route_index(0, 0, 3, 2)] == doctest::Approx(0.0).epsilon(1e-12));

  const SceneDims other{3, 10, 2, 10};
  CHECK_NOTHROW(scene::build_state(buf, obs, other));
  CHECK_THROWS_AS(scene::build_state(buf, obs, SceneDims{5, 8, 2, 10}), UsageError);
}

TEST_CASE("short histories are left padded") {
  scene::HistoryBuffer buf(10);
  SimObservation obs;
  for (int t = 0; t < 10; ++t) {
    std::vector<AgentObservation> n;
    if (t >= 7) n.push_back(agent(4, 10.0 + t, 2.0, 3.0));
    obs = scene_at(t, agent(0, t, 0, 1), n);
    buf.update(obs);
  }
  const auto s = scene::build_state(buf, obs);
  std::vector<std::uint8_t> row(s.motion_mask.begin() + 10, s.motion_mask.begin() + 20);
  CHECK(row == std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 0, 1, 1, 1});
  CHECK(s.agent_ids[1] == 4);
  // Ego x at history slot k equals k - 9 (moved 1 m per step).
  for (int k = 0; k < 10; ++k) CHECK(s.motion[s.motion_index(0, k, 0)] == doctest::Approx(k - 9.0));
  // Masked entries are zero.
  for (int a = 0; a < 6; ++a)
    for (int t = 0; t < 10; ++t)
      if (!s.motion_mask[s.motion_mask_index(a, t)])
        for (int f = 0; f < 5; ++f) REQUIRE(s.motion[s.motion_index(a, t, f)] == 0.0);
  for (std::size_t i = 0; i < s.route_mask.size(); ++i)
    if (!s.route_mask[i])
      for (int f = 0; f < 3; ++f) REQUIRE(s.routes[i * 3 + f] == 0.0);
}

TEST_CASE("absent agents are evicted after the history length") {
  scene::HistoryBuffer buf(10);
  buf.update(scene_at(0, agent(0, 0, 0), {agent(7, 5, 0)}));
  for (int t = 1; t <= 9; ++t) buf.update(scene_at(t, agent(0, 0, 0), {}));
  CHECK(buf.track(7) != nullptr);
  buf.update(scene_at(10, agent(0, 0, 0), {}));
  CHECK(buf.track(7) == nullptr);
  CHECK(buf.track(0)->size() == 10);
}

TEST_CASE("neighbour selection ignores observation order") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(-30, 30);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<AgentObservation> n;
    for (int i = 1; i <= 9; ++i) n.push_back(agent(i, pos(rng), pos(rng), 2.0, 1.0));
    // Equidistant pair to exercise the id tie-break.
    n.push_back(agent(20, 6, 8, 1.0));
    n.push_back(agent(13, -8, 6, 1.0));
    const auto ego = agent(0, 0, 0, 4.0);

    scene::HistoryBuffer b1(10), b2(10);
    const auto o1 = scene_at(0, ego, n);
    std::shuffle(n.begin(), n.end(), rng);
    const auto o2 = scene_at(0, ego, n);
    b1.update(o1);
    b2.update(o2);
    const auto s1 = scene::build_state(b1, o1);
    const auto s2 = scene::build_state(b2, o2);
    REQUIRE(s1 == s2);

    // Oracle: n nearest by (distance, id).
    std::vector<std::pair<double, int>> d;
    for (const auto& a : n) d.push_back({a.state.position.norm(), a.id});
    std::sort(d.begin(), d.end());
    for (int k = 0; k < 5; ++k) CHECK(s1.agent_ids[k + 1] == d[k].second);
    // Purity.
    CHECK(scene::build_state(b1, o1) == s1);
  }
}

TEST_CASE("rotation and augmentation") {
  const auto states = rollout_states("double_merge", 3, 120);
  REQUIRE(states.size() > 50);

  SUBCASE("theta = 0 is the identity") {
    for (const auto& s : states) REQUIRE(scene::rotate(s, 0.0) == s);
  }
  SUBCASE("quarter turn on a point") {
    SceneState s;
    s.agent_mask[0] = 1;
    s.motion_mask[s.motion_mask_index(0, 9)] = 1;
    s.motion[s.motion_index(0, 9, 0)] = 1.0;
    const auto r = scene::rotate(s, kPi / 2);
    CHECK(r.motion[r.motion_index(0, 9, 0)] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(r.motion[r.motion_index(0, 9, 1)] == doctest::Approx(1.0));
    CHECK(r.motion[r.motion_index(0, 9, 4)] == doctest::Approx(kPi / 2));
  }
  SUBCASE("matches a direct 2x2 rotation and is an isometry") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> ang(-kPi / 2, kPi / 2);
    for (const auto& s : states) {
      const double th = ang(rng);
      const auto r = scene::rotate(s, th);
      const double c = std::cos(th), sn = std::sin(th);
      REQUIRE(r.motion_mask == s.motion_mask);
      REQUIRE(r.route_mask == s.route_mask);
      REQUIRE(r.agent_mask == s.agent_mask);
      std::vector<std::pair<double, double>> before, after;
      for (int a = 0; a < 6; ++a)
        for (int t = 0; t < 10; ++t) {
          if (!s.motion_mask[s.motion_mask_index(a, t)]) continue;
          for (int f : {0, 2}) {
            const double x = s.motion[s.motion_index(a, t, f)], y = s.motion[s.motion_index(a, t, f + 1)];
            const double rx = r.motion[r.motion_index(a, t, f)], ry = r.motion[r.motion_index(a, t, f + 1)];
            REQUIRE(std::abs(rx - (c * x - sn * y)) < 1e-9);
            REQUIRE(std::abs(ry - (sn * x + c * y)) < 1e-9);
            REQUIRE(std::abs(std::hypot(rx, ry) - std::hypot(x, y)) < 1e-9);
          }
          const double dpsi = std::remainder(r.motion[r.motion_index(a, t, 4)] - s.motion[s.motion_index(a, t, 4)] - th, 2 * kPi);
          REQUIRE(std::abs(dpsi) < 1e-9);
          before.push_back({s.motion[s.motion_index(a, t, 0)], s.motion[s.motion_index(a, t, 1)]});
          after.push_back({r.motion[r.motion_index(a, t, 0)], r.motion[r.motion_index(a, t, 1)]});
        }
      for (std::size_t i = 0; i < before.size(); ++i)
        for (std::size_t j = i + 1; j < before.size(); ++j) {
          const double d0 = std::hypot(before[i].first - before[j].first, before[i].second - before[j].second);
          const double d1 = std::hypot(after[i].first - after[j].first, after[i].second - after[j].second);
          REQUIRE(std::abs(d0 - d1) < 1e-9);
        }
      for (std::size_t i = 0; i < s.route_mask.size(); ++i) {
        const double x = s.routes[i * 3], y = s.routes[i * 3 + 1];
        REQUIRE(std::abs(r.routes[i * 3] - (c * x - sn * y)) < 1e-9);
        REQUIRE(std::abs(r.routes[i * 3 + 1] - (sn * x + c * y)) < 1e-9);
      }
    }
  }
  SUBCASE("augmentation angles cover [-pi/2, pi/2]") {
    SceneState s;
    s.agent_mask[0] = 1;
    s.motion_mask[s.motion_mask_index(0, 9)] = 1;
    s.motion[s.motion_index(0, 9, 0)] = 1.0;
    std::mt19937_64 rng(2);
    double lo = 10, hi = -10;
    for (int i = 0; i < 5000; ++i) {
      const auto r = scene::augment(s, rng);
      const double th = std::atan2(r.motion[r.motion_index(0, 9, 1)], r.motion[r.motion_index(0, 9, 0)]);
      REQUIRE(th >= -kPi / 2 - 1e-12);
      REQUIRE(th <= kPi / 2 + 1e-12);
      lo = std::min(lo, th);
      hi = std::max(hi, th);
    }
    CHECK(lo < -1.55);
    CHECK(hi > 1.55);
  }
}

TEST_CASE("window states") {
  std::vector<int> states{10, 11, 12, 13, 14};
  std::vector<scene::RawAction> actions{{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}};
  SUBCASE("mid episode is fully valid") {
    const auto w = scene::window_states(states, actions, 1, 3);
    CHECK(w.states == std::vector<int>{11, 12, 13, 14});
    CHECK(w.actions.size() == 3);
    CHECK(w.actions[2][0] == 3.0);
    CHECK(std::all_of(w.state_valid.begin(), w.state_valid.end(), [](auto v) { return v; }));
    CHECK(std::all_of(w.action_valid.begin(), w.action_valid.end(), [](auto v) { return v; }));
  }
  SUBCASE("one before the end pads two slots") {
    const auto w = scene::window_states(states, actions, 3, 3);
    CHECK(w.states == std::vector<int>{13, 14, 14, 14});
    CHECK(w.state_valid == std::vector<std::uint8_t>{1, 1, 0, 0});
    CHECK(w.action_valid == std::vector<std::uint8_t>{1, 1, 0});
  }
  SUBCASE("last step") {
    const auto w = scene::window_states(states, actions, 4, 3);
    CHECK(w.state_valid == std::vector<std::uint8_t>{1, 0, 0, 0});
    CHECK(w.action_valid == std::vector<std::uint8_t>{1, 0, 0});
    CHECK(w.actions[2][0] == 4.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(scene::window_states(states, actions, 5, 3), UsageError);
    actions.pop_back();
    CHECK_THROWS_AS(scene::window_states(states, actions, 0, 3), UsageError);
  }
}
