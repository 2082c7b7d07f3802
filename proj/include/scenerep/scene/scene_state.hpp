#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <random>
#include <unordered_map>
#include <vector>

#include "scenerep/errors.hpp"
#include "scenerep/sim/simulator.hpp"

namespace scenerep::scene {

inline constexpr int kMotionFeatures = 5;  // x, y, vx, vy, heading
inline constexpr int kRouteFeatures = 3;   // wx, wy, heading

struct SceneDims {
  int neighbors = 5;     // n
  int history = 10;      // T_h
  int routes = 2;        // N_k
  int route_length = 10; // T_K

  int agents() const { return neighbors + 1; }
  bool operator==(const SceneDims&) const = default;
};

/// Ego-centric scene tensors. Slot 0 is the ego; masked entries are zero.
struct SceneState {
  SceneDims dims;
  std::vector<double> motion;          // [A, T_h, 5]
  std::vector<double> routes;          // [A, N_k, T_K, 3]
  std::vector<std::uint8_t> motion_mask;  // [A, T_h]
  std::vector<std::uint8_t> route_mask;   // [A, N_k, T_K]
  std::vector<std::uint8_t> agent_mask;   // [A]
  std::vector<int> agent_ids;             // persistent ids, -1 for empty slots

  explicit SceneState(SceneDims d = {});

  std::size_t motion_index(int a, int t, int f = 0) const {
    return ((static_cast<std::size_t>(a) * dims.history + t) * kMotionFeatures) + f;
  }
  std::size_t route_index(int a, int k, int w, int f = 0) const {
    return (((static_cast<std::size_t>(a) * dims.routes + k) * dims.route_length + w) *
            kRouteFeatures) + f;
  }
  std::size_t motion_mask_index(int a, int t) const {
    return static_cast<std::size_t>(a) * dims.history + t;
  }
  std::size_t route_mask_index(int a, int k, int w) const {
    return (static_cast<std::size_t>(a) * dims.routes + k) * dims.route_length + w;
  }

  bool operator==(const SceneState&) const = default;
};

using StatePtr = std::shared_ptr<const SceneState>;

/// Rolling per-agent history keyed by persistent id.
class HistoryBuffer {
 public:
  struct Entry {
    int step = 0;
    sim::VehicleState state;
  };

  explicit HistoryBuffer(int history = 10) : history_(history) {}

  /// Records every agent of `obs` at obs.episode_step and evicts agents not
  /// seen for more than `history` steps.
  void update(const sim::SimObservation& obs);
  void clear();

  int history() const { return history_; }
  int current_step() const { return step_; }
  const std::deque<Entry>* track(int id) const;
  std::size_t tracked() const { return tracks_.size(); }

 private:
  int history_;
  int step_ = 0;
  std::unordered_map<int, std::deque<Entry>> tracks_;
};

/// Builds the ego-centric state for the current step.
SceneState build_state(const HistoryBuffer& buffer, const sim::SimObservation& obs,
                       const SceneDims& dims = {});

/// Rotates all positions, velocities and headings about the ego origin by theta.
SceneState rotate(const SceneState& state, double theta);

/// Random-rotation augmentation with theta ~ U[-pi/2, pi/2].
SceneState augment(const SceneState& state, std::mt19937_64& rng);

using RawAction = std::array<double, 2>;

template <class S>
struct Window {
  std::vector<S> states;               // T_f + 1
  std::vector<RawAction> actions;      // T_f
  std::vector<std::uint8_t> state_valid;
  std::vector<std::uint8_t> action_valid;
};

/// s_{t..t+T_f} and a_{t..t+T_f-1}; slots past the episode end repeat the
/// last element and are flagged invalid.
template <class S>
Window<S> window_states(const std::vector<S>& states, const std::vector<RawAction>& actions,
                        std::size_t t, int horizon) {
  if (states.empty() || t >= states.size())
    throw UsageError("window_states: t out of range");
  if (actions.size() != states.size())
    throw UsageError("window_states: states and actions differ in length");
  if (horizon < 1) throw UsageError("window_states: horizon must be positive");
  Window<S> w;
  const std::size_t last = states.size() - 1;
  for (int k = 0; k <= horizon; ++k) {
    const std::size_t i = t + static_cast<std::size_t>(k);
    w.states.push_back(states[std::min(i, last)]);
    w.state_valid.push_back(i <= last);
    if (k < horizon) {
      w.actions.push_back(actions[std::min(i, last)]);
      w.action_valid.push_back(i <= last);
    }
  }
  return w;
}

}  // namespace scenerep::scene
