#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "scenerep/sim/geometry.hpp"
#include "scenerep/sim/scenario.hpp"

namespace scenerep::sim {

struct LaneGeometry {
  int id = 0;
  Polyline center;
  double width = 3.5;
  std::optional<int> left;
  std::optional<int> right;
  std::vector<int> successors;
};

/// Immutable lane graph built from a scenario config.
class LaneNetwork {
 public:
  static constexpr int kUnreachable = std::numeric_limits<int>::max();

  explicit LaneNetwork(const std::vector<Lane>& lanes);

  const LaneGeometry& lane(int id) const { return lanes_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return lanes_.size(); }

  bool is_successor(int from, int to) const;
  /// -1 if `to` is the left neighbour of `from`, +1 if right, 0 otherwise.
  int adjacency_side(int from, int to) const;
  std::optional<int> adjacent(int lane, int side) const {
    return side < 0 ? lanes_.at(lane).left : lanes_.at(lane).right;
  }

  /// Number of graph hops (successor or lane change) from every lane to `goal`.
  std::vector<int> hops_to(int goal) const;

  /// Closest lane to a point among all lanes; nullopt if farther than max_distance.
  std::optional<std::pair<int, Projection>> locate(Vec2 p, double max_distance) const;

 private:
  std::vector<LaneGeometry> lanes_;
};

}  // namespace scenerep::sim
