#pragma once

#include <filesystem>
#include <string>

#include <torch/torch.h>

#include "scenerep/nn/encoder.hpp"
#include "scenerep/nn/slt.hpp"
#include "scenerep/rl/sac.hpp"
#include "scenerep/train/config.hpp"

namespace scenerep::train {

inline constexpr std::int64_t kCheckpointVersion = 1;

/// Every network of one training run. SLT members are null when the
/// configuration does not train them.
struct Agent {
  TrainConfig config;
  nn::SceneEncoder encoder, encoder_target;
  rl::Actor actor{nullptr};
  rl::Critic critic1{nullptr}, critic2{nullptr}, critic1_target{nullptr}, critic2_target{nullptr};
  torch::Tensor log_alpha;
  nn::LatentTransition transition{nullptr};
  nn::ProjectionHead head{nullptr};

  explicit Agent(const TrainConfig& config);

  double alpha() const { return log_alpha.exp().item<double>(); }
  /// Parameters updated by gradient steps (targets excluded).
  std::vector<torch::Tensor> trainable() const;
  void to(torch::Dtype dtype);

  void save(const std::filesystem::path& path) const;
  /// Rebuilds the agent from a checkpoint, including its configuration.
  static Agent load(const std::filesystem::path& path);
  /// Names of the parameter groups stored in a checkpoint.
  static std::vector<std::string> checkpoint_groups(const std::filesystem::path& path);
};

/// Deterministic policy used for evaluation: encoder plus actor mean.
class Policy {
 public:
  explicit Policy(Agent agent) : agent_(std::move(agent)) {}
  static Policy load(const std::filesystem::path& checkpoint) { return Policy(Agent::load(checkpoint)); }

  scene::RawAction act(const scene::SceneState& state, nn::AttentionTrace* trace = nullptr);
  torch::Tensor latent(const scene::SceneState& state, nn::AttentionTrace* trace = nullptr);
  Agent& agent() { return agent_; }

 private:
  Agent agent_;
};

}  // namespace scenerep::train
