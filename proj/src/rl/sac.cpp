#include "scenerep/rl/sac.hpp"

#include <cmath>
#include <numbers>

#include "scenerep/errors.hpp"

namespace scenerep::rl {

ActorImpl::ActorImpl(const SacConfig& c) {
  fc1_ = register_module("fc1", torch::nn::Linear(c.latent, c.hidden));
  fc2_ = register_module("fc2", torch::nn::Linear(c.hidden, c.hidden));
  mean_ = register_module("mean", torch::nn::Linear(c.hidden, c.action_dim));
  log_std_ = register_module("log_std", torch::nn::Linear(c.hidden, c.action_dim));
}

std::pair<torch::Tensor, torch::Tensor> ActorImpl::forward(const torch::Tensor& h) {
  const auto x = torch::relu(fc2_(torch::relu(fc1_(h))));
  return {mean_(x), log_std_(x).clamp(kLogStdMin, kLogStdMax)};
}

CriticImpl::CriticImpl(const SacConfig& c) {
  fc1_ = register_module("fc1", torch::nn::Linear(c.latent + c.action_dim, c.hidden));
  fc2_ = register_module("fc2", torch::nn::Linear(c.hidden, c.hidden));
  out_ = register_module("out", torch::nn::Linear(c.hidden, 1));
}

torch::Tensor CriticImpl::forward(const torch::Tensor& h, const torch::Tensor& a) {
  const auto x = torch::relu(fc2_(torch::relu(fc1_(torch::cat({h, a}, -1)))));
  return out_(x).squeeze(-1);
}

torch::Tensor squashed_log_prob(const torch::Tensor& u, const torch::Tensor& mean, const torch::Tensor& log_std) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const auto z = (u - mean) * torch::exp(-log_std);
  const auto gauss = -0.5 * z * z - log_std - half_log_2pi;
  // log(1 - tanh(u)^2) in a form that stays finite for large |u|
  const auto jac = 2.0 * (std::log(2.0) - u - torch::softplus(-2.0 * u));
  return (gauss - jac).sum(-1);
}

PolicySample sample_action(Actor& actor, const torch::Tensor& h, const torch::Tensor& noise) {
  auto [mean, log_std] = actor(h);
  if (!noise.defined()) return {torch::tanh(mean), {}};
  const auto u = mean + torch::exp(log_std) * noise;
  return {torch::tanh(u), squashed_log_prob(u, mean, log_std)};
}

CriticLossOut critic_loss(Critic& q1, Critic& q2, Critic& q1_target, Critic& q2_target, Actor& actor,
                          const CriticBatch& b, double alpha, double gamma) {
  if (b.h.size(0) == 0) throw UsageError("critic_loss: empty batch");
  CriticLossOut out;
  {
    torch::NoGradGuard guard;
    const auto next = sample_action(actor, b.h_next.detach(), b.next_noise);
    const auto h_bar = b.h_next_target.detach();
    const auto q_next = torch::min(q1_target(h_bar, next.action), q2_target(h_bar, next.action));
    const auto y = q_next - alpha * next.log_prob;
    out.target = b.rewards + gamma * (1.0 - b.dones) * y;
  }
  out.q1 = q1(b.h, b.actions);
  out.q2 = q2(b.h, b.actions);
  out.loss = (out.q1 - out.target).pow(2).mean() + (out.q2 - out.target).pow(2).mean();
  return out;
}

ActorLossOut actor_loss(Actor& actor, Critic& q1, Critic& q2, const torch::Tensor& h,
                        const torch::Tensor& noise, double alpha) {
  const auto hd = h.detach();
  const auto s = sample_action(actor, hd, noise);
  const auto q = torch::min(q1(hd, s.action), q2(hd, s.action));
  return {(alpha * s.log_prob - q).mean(), s.log_prob.detach()};
}

torch::Tensor alpha_loss(const torch::Tensor& log_alpha, const torch::Tensor& log_prob, double target_entropy) {
  return -(log_alpha.exp() * (log_prob + target_entropy).detach()).mean();
}

}  // namespace scenerep::rl
