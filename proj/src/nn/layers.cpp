#include "scenerep/nn/layers.hpp"

#include <cmath>

#include "scenerep/errors.hpp"

namespace scenerep::nn {

MlpImpl::MlpImpl(int64_t in, int64_t hidden, int64_t out)
    : fc1_(register_module("fc1", torch::nn::Linear(in, hidden))),
      fc2_(register_module("fc2", torch::nn::Linear(hidden, out))) {}

torch::Tensor MlpImpl::forward(const torch::Tensor& x) { return fc2_(torch::relu(fc1_(x))); }

MultiHeadAttentionImpl::MultiHeadAttentionImpl(int64_t query_dim, int64_t key_dim, int64_t width,
                                               int64_t heads)
    : width_(width), heads_(heads) {
  if (heads <= 0 || width % heads != 0) throw ConfigError("attention width must divide by heads");
  auto lin = [](int64_t i, int64_t o) { return torch::nn::Linear(torch::nn::LinearOptions(i, o).bias(false)); };
  wq = register_module("wq", lin(query_dim, width));
  wk = register_module("wk", lin(key_dim, width));
  wv = register_module("wv", lin(key_dim, width));
  wo = register_module("wo", lin(width, width));
}

torch::Tensor MultiHeadAttentionImpl::forward(const torch::Tensor& q, const torch::Tensor& kv,
                                              const torch::Tensor& mask, torch::Tensor* weights) {
  const int64_t lq = q.size(-2), lk = kv.size(-2);
  if (mask.size(-2) != lq || mask.size(-1) != lk) throw UsageError("attention mask shape mismatch");
  std::vector<int64_t> lead(q.sizes().begin(), q.sizes().end() - 2);
  const int64_t dh = width_ / heads_;

  int64_t n = 1;
  for (auto d : lead) n *= d;
  auto qf = q.reshape({n, lq, q.size(-1)});
  auto kf = kv.reshape({n, lk, kv.size(-1)});
  auto mf = mask.reshape({n, lq, lk});

  auto Q = wq(qf).view({n, lq, heads_, dh}).transpose(1, 2);
  auto K = wk(kf).view({n, lk, heads_, dh}).transpose(1, 2);
  auto V = wv(kf).view({n, lk, heads_, dh}).transpose(1, 2);
  auto logits = torch::matmul(Q, K.transpose(-2, -1)) / std::sqrt(static_cast<double>(dh));
  const auto m = mf.unsqueeze(1);
  logits = logits.masked_fill(m.logical_not(), -1e9);
  // Composed softmax: the fused kernel is slow on rows this short.
  auto e = (logits - logits.amax(-1, true).detach()).exp();
  auto w = e / e.sum(-1, true) * m.any(-1, true).to(logits.scalar_type());
  auto out = torch::matmul(w, V).transpose(1, 2).reshape({n, lq, width_});
  out = wo(out);

  if (weights) {
    auto shape = lead;
    shape.insert(shape.end(), {heads_, lq, lk});
    *weights = w.reshape(shape);
  }
  auto shape = lead;
  shape.insert(shape.end(), {lq, width_});
  return out.reshape(shape);
}

torch::Tensor masked_max_pool(const torch::Tensor& x, const torch::Tensor& valid) {
  const auto v = valid.unsqueeze(-1);
  auto pooled = x.masked_fill(v.logical_not(), -1e9).amax(1);
  return pooled.masked_fill(valid.any(1, true).logical_not(), 0.0);
}

void copy_parameters(const torch::nn::Module& src, torch::nn::Module& dst) {
  torch::NoGradGuard guard;
  auto from = src.named_parameters(true);
  for (auto& p : dst.named_parameters(true)) p.value().copy_(from[p.key()]);
  auto bfrom = src.named_buffers(true);
  for (auto& b : dst.named_buffers(true)) b.value().copy_(bfrom[b.key()]);
}

void polyak_update(const torch::nn::Module& online, torch::nn::Module& target, double tau) {
  torch::NoGradGuard guard;
  auto from = online.named_parameters(true);
  for (auto& p : target.named_parameters(true)) {
    p.value().mul_(1.0 - tau).add_(from[p.key()], tau);
  }
}

}  // namespace scenerep::nn
