#pragma once

#include <torch/torch.h>

namespace scenerep::nn {

/// Two-layer perceptron with a ReLU in between.
class MlpImpl : public torch::nn::Module {
 public:
  MlpImpl(int64_t in, int64_t hidden, int64_t out);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Linear fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(Mlp);

/// Scaled dot-product multi-head attention with a boolean mask.
/// q: [..., Lq, dq], kv: [..., Lk, dk], mask: [..., Lq, Lk] (true = attend).
/// Masked logits are set to -1e9; a query row with no valid key yields zeros.
class MultiHeadAttentionImpl : public torch::nn::Module {
 public:
  MultiHeadAttentionImpl(int64_t query_dim, int64_t key_dim, int64_t width, int64_t heads);

  /// `weights`, when given, receives the per-head attention [..., H, Lq, Lk].
  torch::Tensor forward(const torch::Tensor& q, const torch::Tensor& kv, const torch::Tensor& mask,
                        torch::Tensor* weights = nullptr);

  int64_t width() const { return width_; }
  int64_t heads() const { return heads_; }
  torch::nn::Linear wq{nullptr}, wk{nullptr}, wv{nullptr}, wo{nullptr};

 private:
  int64_t width_, heads_;
};
TORCH_MODULE(MultiHeadAttention);

/// Max over dim 1 restricted to valid entries; rows with nothing valid give 0.
/// x: [N, T, D], valid: [N, T] bool.
torch::Tensor masked_max_pool(const torch::Tensor& x, const torch::Tensor& valid);

/// dst <- src for every named parameter and buffer.
void copy_parameters(const torch::nn::Module& src, torch::nn::Module& dst);

/// target <- (1 - tau) * target + tau * online.
void polyak_update(const torch::nn::Module& online, torch::nn::Module& target, double tau);

}  // namespace scenerep::nn
