#include "scenerep/nn/slt.hpp"

#include "scenerep/errors.hpp"

namespace scenerep::nn {

LatentTransitionImpl::LatentTransitionImpl(const SltConfig& c) {
  h_in_ = register_module("h_in", torch::nn::Linear(c.width, c.width));
  a_in_ = register_module("a_in", torch::nn::Linear(c.action_dim, c.width));
  position_ = register_module("position", torch::nn::Embedding(c.horizon, c.width));
  attn_ = register_module("attn", MultiHeadAttention(c.width, c.width, c.width, c.heads));
  ffn_ = register_module("ffn", Mlp(c.width, c.mlp_hidden, c.width));
}

torch::Tensor LatentTransitionImpl::forward(const torch::Tensor& h, const torch::Tensor& a) {
  if (h.dim() != 3 || a.dim() != 3 || h.size(0) != a.size(0) || h.size(1) != a.size(1))
    throw UsageError("latent and action sequences must align");
  const int64_t T = h.size(1);
  if (T > position_->weight.size(0)) throw UsageError("sequence longer than the prediction horizon");
  const auto pos = position_(torch::arange(T, torch::kLong)).unsqueeze(0);
  auto x = h_in_(h) + a_in_(a) + pos;
  const auto causal = torch::ones({T, T}, torch::kBool).tril().expand({h.size(0), T, T});
  x = x + attn_(x, x, causal);
  return x + ffn_(x);
}

ProjectionHeadImpl::ProjectionHeadImpl(const SltConfig& c) {
  projector = register_module("projector", Mlp(c.width, c.projector_hidden, c.projection_dim));
  predictor = register_module("predictor", torch::nn::Linear(c.projection_dim, c.projection_dim));
}

Projections project(ProjectionHead& head, const torch::Tensor& targets, const torch::Tensor& preds) {
  return {head->project(targets).detach(), head->predict(head->project(preds))};
}

torch::Tensor similarity_loss(const torch::Tensor& z, const torch::Tensor& z_hat, const torch::Tensor& valid) {
  const auto dot = (z * z_hat).sum(-1);
  const auto denom = (z.norm(2, -1) * z_hat.norm(2, -1)).clamp_min(1e-8);
  const auto cos = dot / denom;
  const auto v = valid.to(cos.scalar_type());
  const auto count = v.sum();
  if (count.item<double>() <= 0.0) throw UsageError("similarity_loss: no valid slot");
  return -(cos * v).sum() / count;
}

torch::Tensor slt_loss(LatentTransition& transition, ProjectionHead& head, const torch::Tensor& latents,
                       const torch::Tensor& actions, const torch::Tensor& target_valid) {
  using torch::indexing::Slice;
  const int64_t T = actions.size(1);
  if (latents.size(1) != T + 1) throw UsageError("slt_loss: expected T+1 latents");
  const auto preds = transition(latents.index({Slice(), Slice(0, T)}), actions);
  const auto p = project(head, latents.index({Slice(), Slice(1, T + 1)}), preds);
  return similarity_loss(p.z, p.z_hat, target_valid);
}

}  // namespace scenerep::nn
