#include "scenerep/scene/scene_state.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace scenerep::scene {

SceneState::SceneState(SceneDims d)
    : dims(d),
      motion(static_cast<std::size_t>(d.agents()) * d.history * kMotionFeatures, 0.0),
      routes(static_cast<std::size_t>(d.agents()) * d.routes * d.route_length * kRouteFeatures, 0.0),
      motion_mask(static_cast<std::size_t>(d.agents()) * d.history, 0),
      route_mask(static_cast<std::size_t>(d.agents()) * d.routes * d.route_length, 0),
      agent_mask(static_cast<std::size_t>(d.agents()), 0),
      agent_ids(static_cast<std::size_t>(d.agents()), -1) {}

void HistoryBuffer::update(const sim::SimObservation& obs) {
  step_ = obs.episode_step;
  auto record = [&](const sim::AgentObservation& a) {
    auto& track = tracks_[a.id];
    if (!track.empty() && track.back().step == step_) track.back().state = a.state;
    else track.push_back({step_, a.state});
  };
  record(obs.ego);
  for (const auto& n : obs.neighbors) record(n);
  for (auto it = tracks_.begin(); it != tracks_.end();) {
    auto& track = it->second;
    while (!track.empty() && step_ - track.front().step >= history_) track.pop_front();
    if (track.empty()) it = tracks_.erase(it);
    else ++it;
  }
}

void HistoryBuffer::clear() {
  tracks_.clear();
  step_ = 0;
}

const std::deque<HistoryBuffer::Entry>* HistoryBuffer::track(int id) const {
  const auto it = tracks_.find(id);
  return it == tracks_.end() ? nullptr : &it->second;
}

namespace {

struct EgoFrame {
  sim::Vec2 origin;
  double heading;

  sim::Vec2 point(sim::Vec2 p) const { return vector(p - origin); }
  sim::Vec2 vector(sim::Vec2 v) const {
    const double c = std::cos(heading), s = std::sin(heading);
    return {c * v.x + s * v.y, -s * v.x + c * v.y};
  }
  double angle(double a) const { return sim::wrap_angle(a - heading); }
};

}  // namespace

SceneState build_state(const HistoryBuffer& buffer, const sim::SimObservation& obs,
                       const SceneDims& dims) {
  if (dims.history != buffer.history())
    throw UsageError("build_state: history length differs from the buffer");
  SceneState out(dims);
  const EgoFrame frame{obs.ego.state.position, obs.ego.state.heading};

  std::vector<const sim::AgentObservation*> agents{&obs.ego};
  std::vector<const sim::AgentObservation*> near;
  for (const auto& n : obs.neighbors) near.push_back(&n);
  auto dist = [&](const sim::AgentObservation* a) {
    return (a->state.position - obs.ego.state.position).norm();
  };
  std::sort(near.begin(), near.end(), [&](auto* a, auto* b) {
    const double da = dist(a), db = dist(b);
    return da != db ? da < db : a->id < b->id;
  });
  for (std::size_t i = 0; i < near.size() && static_cast<int>(i) < dims.neighbors; ++i)
    agents.push_back(near[i]);

  const int now = buffer.current_step();
  for (int a = 0; a < static_cast<int>(agents.size()); ++a) {
    const auto& agent = *agents[a];
    out.agent_mask[a] = 1;
    out.agent_ids[a] = agent.id;
    if (const auto* track = buffer.track(agent.id)) {
      for (const auto& e : *track) {
        const int age = now - e.step;
        if (age < 0 || age >= dims.history) continue;
        const int t = dims.history - 1 - age;
        const sim::Vec2 p = frame.point(e.state.position);
        const sim::Vec2 v = frame.vector(sim::unit_from_heading(e.state.heading) * e.state.speed);
        double* m = &out.motion[out.motion_index(a, t)];
        m[0] = p.x;
        m[1] = p.y;
        m[2] = v.x;
        m[3] = v.y;
        m[4] = frame.angle(e.state.heading);
        out.motion_mask[out.motion_mask_index(a, t)] = 1;
      }
    }
    for (int k = 0; k < dims.routes && k < static_cast<int>(agent.routes.size()); ++k) {
      const auto& route = agent.routes[k];
      for (int w = 0; w < dims.route_length && w < static_cast<int>(route.size()); ++w) {
        const sim::Vec2 p = frame.point({route[w].x, route[w].y});
        double* r = &out.routes[out.route_index(a, k, w)];
        r[0] = p.x;
        r[1] = p.y;
        r[2] = frame.angle(route[w].heading);
        out.route_mask[out.route_mask_index(a, k, w)] = 1;
      }
    }
  }
  return out;
}

SceneState rotate(const SceneState& state, double theta) {
  SceneState out = state;
  const double c = std::cos(theta), s = std::sin(theta);
  auto turn = [&](double* xy) {
    const double x = xy[0], y = xy[1];
    xy[0] = c * x - s * y;
    xy[1] = s * x + c * y;
  };
  const auto& d = state.dims;
  for (int a = 0; a < d.agents(); ++a) {
    for (int t = 0; t < d.history; ++t) {
      if (!state.motion_mask[state.motion_mask_index(a, t)]) continue;
      double* m = &out.motion[out.motion_index(a, t)];
      turn(m);
      turn(m + 2);
      m[4] = sim::wrap_angle(m[4] + theta);
    }
    for (int k = 0; k < d.routes; ++k) {
      for (int w = 0; w < d.route_length; ++w) {
        if (!state.route_mask[state.route_mask_index(a, k, w)]) continue;
        double* r = &out.routes[out.route_index(a, k, w)];
        turn(r);
        r[2] = sim::wrap_angle(r[2] + theta);
      }
    }
  }
  return out;
}

SceneState augment(const SceneState& state, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(-std::numbers::pi / 2, std::numbers::pi / 2);
  return rotate(state, angle(rng));
}

}  // namespace scenerep::scene
