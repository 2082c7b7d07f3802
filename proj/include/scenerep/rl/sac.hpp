#pragma once

#include <torch/torch.h>

#include "scenerep/nn/layers.hpp"

namespace scenerep::rl {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

struct SacConfig {
  int64_t latent = 128;
  int64_t hidden = 256;
  int64_t action_dim = 2;
  double gamma = 0.99;
  double tau = 0.005;
  double initial_alpha = 1.0;
  double target_entropy = -2.0;
};

/// Gaussian policy head: latent -> (mean, clamped log-std).
class ActorImpl : public torch::nn::Module {
 public:
  explicit ActorImpl(const SacConfig& config);
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& h);

 private:
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr}, mean_{nullptr}, log_std_{nullptr};
};
TORCH_MODULE(Actor);

/// Q(h, a) with two hidden layers.
class CriticImpl : public torch::nn::Module {
 public:
  explicit CriticImpl(const SacConfig& config);
  torch::Tensor forward(const torch::Tensor& h, const torch::Tensor& a);  // [B]

 private:
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr}, out_{nullptr};
};
TORCH_MODULE(Critic);

struct PolicySample {
  torch::Tensor action;    // [B, A] in (-1, 1)
  torch::Tensor log_prob;  // [B]; undefined in eval mode
};

/// Log-density of tanh(u) where u ~ N(mean, exp(log_std)^2), evaluated at u.
torch::Tensor squashed_log_prob(const torch::Tensor& u, const torch::Tensor& mean, const torch::Tensor& log_std);

/// Train mode (noise defined): reparameterized tanh(mean + std * noise) with log-prob.
/// Eval mode (noise undefined): tanh(mean).
PolicySample sample_action(Actor& actor, const torch::Tensor& h, const torch::Tensor& noise);

struct CriticBatch {
  torch::Tensor h;            // online latents of s_t (carries encoder gradients)
  torch::Tensor actions;      // [B, A]
  torch::Tensor rewards;      // [B]
  torch::Tensor dones;        // [B], 1 for terminal
  torch::Tensor h_next;       // online latents of s_{t+1} for the policy
  torch::Tensor h_next_target;  // target-encoder latents of s_{t+1}
  torch::Tensor next_noise;   // [B, A]
};

struct CriticLossOut {
  torch::Tensor loss;     // L(θ1) + L(θ2)
  torch::Tensor target;   // [B], detached regression target
  torch::Tensor q1, q2;   // [B]
};

CriticLossOut critic_loss(Critic& q1, Critic& q2, Critic& q1_target, Critic& q2_target, Actor& actor,
                          const CriticBatch& batch, double alpha, double gamma);

struct ActorLossOut {
  torch::Tensor loss;
  torch::Tensor log_prob;  // [B], detached
};

/// mean(α log π(a|h) − min Q(h, a)) with h detached and a reparameterized.
ActorLossOut actor_loss(Actor& actor, Critic& q1, Critic& q2, const torch::Tensor& h,
                        const torch::Tensor& noise, double alpha);

/// −mean(α (log π + H_target)) with the bracket detached.
torch::Tensor alpha_loss(const torch::Tensor& log_alpha, const torch::Tensor& log_prob, double target_entropy);

}  // namespace scenerep::rl
