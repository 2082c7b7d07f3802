#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <vector>

#include "scenerep/scene/scene_state.hpp"

namespace scenerep::replay {

using scene::RawAction;
using scene::StatePtr;

/// One environment step as produced by the rollout.
struct Step {
  StatePtr state;
  RawAction action{0.0, 0.0};
  double reward = 0.0;
  StatePtr next_state;
  bool done = false;
};

using FutureWindow = scene::Window<StatePtr>;

struct Transition {
  Step step;
  FutureWindow window;
  std::uint64_t id = 0;  // emission order, unique over the buffer's lifetime
};

/// Replay buffer with the per-episode future queue in front of it. States are
/// immutable and shared between a transition and the windows that reference it.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity = 20000, int horizon = 3);

  /// Queues a step; once more than `horizon` steps are queued the oldest is
  /// emitted with a complete window.
  void push_step(Step step);
  /// Emits every queued step with padded windows and clears the queue.
  void flush_episode();

  /// Distinct uniform indices into the buffer.
  std::vector<std::size_t> sample(std::size_t batch_size, std::mt19937_64& rng) const;

  const Transition& at(std::size_t i) const { return items_.at(i); }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  int horizon() const { return horizon_; }
  std::size_t queued() const { return queue_.size(); }
  std::uint64_t emitted() const { return next_id_; }

  /// Versioned binary snapshot including the future queue.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static ReplayBuffer load(std::istream& in);
  static ReplayBuffer load(const std::filesystem::path& path);

 private:
  void emit(std::size_t queue_pos);

  std::size_t capacity_;
  int horizon_;
  std::deque<Transition> items_;
  std::deque<Step> queue_;
  std::uint64_t next_id_ = 0;
};

}  // namespace scenerep::replay
