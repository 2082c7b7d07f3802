#pragma once

#include <torch/torch.h>

#include "scenerep/nn/layers.hpp"

namespace scenerep::nn {

struct SltConfig {
  int64_t width = 128;        // D, matches the encoder
  int64_t heads = 4;
  int64_t mlp_hidden = 256;
  int64_t horizon = 3;        // T_f
  int64_t action_dim = 2;
  int64_t projector_hidden = 128;
  int64_t projection_dim = 64;
};

/// Causal one-layer Transformer predicting h_{k+1} from (h, a)_{0..k}.
class LatentTransitionImpl : public torch::nn::Module {
 public:
  explicit LatentTransitionImpl(const SltConfig& config);
  /// h: [B, T, D], a: [B, T, A] -> [B, T, D]; T <= horizon.
  torch::Tensor forward(const torch::Tensor& h, const torch::Tensor& a);

 private:
  torch::nn::Linear h_in_{nullptr}, a_in_{nullptr};
  torch::nn::Embedding position_{nullptr};
  MultiHeadAttention attn_{nullptr};
  Mlp ffn_{nullptr};
};
TORCH_MODULE(LatentTransition);

/// Projector (two-layer MLP) shared by both branches, plus the linear predictor.
class ProjectionHeadImpl : public torch::nn::Module {
 public:
  explicit ProjectionHeadImpl(const SltConfig& config);
  torch::Tensor project(const torch::Tensor& h) { return projector(h); }
  torch::Tensor predict(const torch::Tensor& z) { return predictor(z); }

  Mlp projector{nullptr};
  torch::nn::Linear predictor{nullptr};
};
TORCH_MODULE(ProjectionHead);

struct Projections {
  torch::Tensor z;      // target branch, detached
  torch::Tensor z_hat;  // online branch
};

/// z = sg(Θ(targets)), ẑ = P(Θ(preds)).
Projections project(ProjectionHead& head, const torch::Tensor& targets, const torch::Tensor& preds);

/// Mean over valid slots of the negative cosine similarity. valid: bool, same
/// leading shape as z without the feature dimension.
torch::Tensor similarity_loss(const torch::Tensor& z, const torch::Tensor& z_hat, const torch::Tensor& valid);

/// Full latent-prediction objective for encoded windows.
/// latents: [B, T+1, D] encodings of s_{t..t+T}; actions: [B, T, A];
/// target_valid: [B, T] validity of s_{t+1..t+T}.
torch::Tensor slt_loss(LatentTransition& transition, ProjectionHead& head, const torch::Tensor& latents,
                       const torch::Tensor& actions, const torch::Tensor& target_valid);

}  // namespace scenerep::nn
