#include "scenerep/sim/lane_network.hpp"

#include <algorithm>
#include <deque>

#include "scenerep/errors.hpp"

namespace scenerep::sim {

LaneNetwork::LaneNetwork(const std::vector<Lane>& lanes) {
  lanes_.reserve(lanes.size());
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const Lane& l = lanes[i];
    if (l.id != static_cast<int>(i)) throw ConfigError("lane ids must equal their index");
    lanes_.push_back({l.id, Polyline(l.centerline), l.width, l.left, l.right, l.successors});
  }
  auto check = [&](int id) {
    if (id < 0 || id >= static_cast<int>(lanes_.size()))
      throw ConfigError("lane reference out of range: " + std::to_string(id));
  };
  for (const auto& l : lanes_) {
    for (int s : l.successors) check(s);
    if (l.left) {
      check(*l.left);
      if (lanes_[*l.left].right != l.id) throw ConfigError("lane adjacency must be symmetric");
    }
    if (l.right) {
      check(*l.right);
      if (lanes_[*l.right].left != l.id) throw ConfigError("lane adjacency must be symmetric");
    }
  }
}

bool LaneNetwork::is_successor(int from, int to) const {
  const auto& s = lane(from).successors;
  return std::find(s.begin(), s.end(), to) != s.end();
}

int LaneNetwork::adjacency_side(int from, int to) const {
  const auto& l = lane(from);
  if (l.left == to) return -1;
  if (l.right == to) return 1;
  return 0;
}

std::vector<int> LaneNetwork::hops_to(int goal) const {
  // Reverse BFS over successor and adjacency edges.
  std::vector<std::vector<int>> incoming(lanes_.size());
  for (const auto& l : lanes_) {
    for (int s : l.successors) incoming[s].push_back(l.id);
    if (l.left) incoming[*l.left].push_back(l.id);
    if (l.right) incoming[*l.right].push_back(l.id);
  }
  std::vector<int> hops(lanes_.size(), kUnreachable);
  std::deque<int> queue{goal};
  hops[goal] = 0;
  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop_front();
    for (int prev : incoming[cur]) {
      if (hops[prev] == kUnreachable) {
        hops[prev] = hops[cur] + 1;
        queue.push_back(prev);
      }
    }
  }
  return hops;
}

std::optional<std::pair<int, Projection>> LaneNetwork::locate(Vec2 p, double max_distance) const {
  std::optional<std::pair<int, Projection>> best;
  for (const auto& l : lanes_) {
    const Projection pr = l.center.project(p);
    if (pr.distance <= max_distance && (!best || pr.distance < best->second.distance))
      best = std::make_pair(l.id, pr);
  }
  return best;
}

}  // namespace scenerep::sim
