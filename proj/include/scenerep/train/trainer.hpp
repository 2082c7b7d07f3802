#pragma once

#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "scenerep/replay/replay_buffer.hpp"
#include "scenerep/scene/scene_state.hpp"
#include "scenerep/sim/simulator.hpp"
#include "scenerep/train/agent.hpp"
#include "scenerep/train/config.hpp"

namespace scenerep::train {

/// Raised when a loss turns NaN or infinite; names the offending transitions.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(const std::string& what, std::vector<std::uint64_t> ids)
      : std::runtime_error(what), batch_ids(std::move(ids)) {}
  std::vector<std::uint64_t> batch_ids;
};

struct EpisodeSummary {
  int episode = 0;
  int steps = 0;
  double episode_return = 0.0;
  sim::Outcome outcome = sim::Outcome::kRunning;
};

/// Seed of training episode `episode` for run seed `seed`.
std::uint64_t episode_seed(std::uint64_t seed, int episode);

/// Warm-up, rollout and the interleaved critic / actor / temperature / latent
/// prediction updates, with JSON-lines metrics and resumable snapshots.
class Trainer {
 public:
  Trainer(const TrainConfig& config, std::filesystem::path out_dir, bool verbose = false);

  /// Advances until total_steps, or at most `max_steps` more environment steps.
  void run(std::optional<int> max_steps = std::nullopt);

  void save_snapshot(const std::filesystem::path& dir) const;
  static std::unique_ptr<Trainer> resume(const std::filesystem::path& snapshot_dir,
                                         std::filesystem::path out_dir, bool verbose = false);

  int step() const { return step_; }
  int updates() const { return updates_; }
  bool finished() const { return step_ >= config_.total_steps; }
  const TrainConfig& config() const { return config_; }
  const std::vector<nlohmann::json>& metrics() const { return metrics_; }
  const std::vector<EpisodeSummary>& recent_episodes() const { return recent_; }
  Agent& agent() { return agent_; }
  const replay::ReplayBuffer& replay() const { return replay_; }
  std::filesystem::path checkpoint_path() const { return out_ / "checkpoint.pt"; }

 private:
  void make_optimizers();
  void begin_episode();
  void env_step();
  void update();
  void log_row();
  torch::Tensor normal(int64_t rows);
  void write_metrics_file() const;

  TrainConfig config_;
  std::filesystem::path out_;
  bool verbose_;
  Agent agent_;
  std::unique_ptr<torch::optim::Adam> critic_opt_, actor_opt_, alpha_opt_, slt_opt_;
  replay::ReplayBuffer replay_;
  std::mt19937_64 rng_;
  sim::TrafficSimulator env_;
  scene::HistoryBuffer history_;
  scene::StatePtr state_;

  int step_ = 0;
  int updates_ = 0;
  int episode_ = 0;
  int episodes_done_ = 0;
  double episode_return_ = 0.0;
  std::vector<scene::RawAction> episode_actions_;
  std::vector<EpisodeSummary> recent_;  // last success_window episodes

  // Since the previous metrics row.
  double sum_critic_ = 0.0, sum_actor_ = 0.0, sum_slt_ = 0.0, sum_alpha_loss_ = 0.0;
  int window_updates_ = 0, window_slt_ = 0;

  std::vector<nlohmann::json> metrics_;
};

}  // namespace scenerep::train
