#pragma once

#include <memory>
#include <string>

#include <json.hpp>
#include <torch/torch.h>

#include "scenerep/nn/layers.hpp"
#include "scenerep/nn/scene_batch.hpp"

namespace scenerep::nn {

enum class EncoderKind { kMst, kLstm };

struct EncoderConfig {
  EncoderKind kind = EncoderKind::kMst;
  int64_t width = 128;       // D
  int64_t heads = 4;
  int64_t mlp_hidden = 256;
  int64_t embedding_categories = 2;  // ego / neighbour
  double input_scale = 0.1;          // applied to positions and velocities
  bool use_routes = true;            // false: no cross-modality or output level
  bool use_ego_routes = true;        // false: no output level
  scene::SceneDims dims;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

/// Head-averaged attention weights of one encode call. Undefined tensors for
/// levels that did not run.
struct AttentionTrace {
  torch::Tensor motion;       // [B, A, T_h, T_h]
  torch::Tensor route;        // [B, A, N_k, T_K, T_K]
  torch::Tensor cross;        // [B, n, 1, N_k]
  torch::Tensor aggregation;  // [B, 1, A]  keys: ego, neighbours 1..n
  torch::Tensor output;       // [B, 1, N_k]
};

class SceneEncoderImpl : public torch::nn::Module {
 public:
  virtual ~SceneEncoderImpl() = default;
  virtual torch::Tensor encode(const SceneBatch& batch, AttentionTrace* trace = nullptr) = 0;
  virtual const EncoderConfig& config() const = 0;
};
using SceneEncoder = std::shared_ptr<SceneEncoderImpl>;

/// Multi-stage Transformer: dynamic, cross-modality, aggregation and output levels.
class MstEncoderImpl : public SceneEncoderImpl {
 public:
  explicit MstEncoderImpl(const EncoderConfig& config);

  struct Dynamic {
    torch::Tensor motion;       // D_M [B, A, D]
    torch::Tensor routes;       // D_K [B, A, N_k, D]
    torch::Tensor route_valid;  // [B, A, N_k]
  };
  Dynamic encode_dynamic(const SceneBatch& batch, AttentionTrace* trace = nullptr);
  /// dm: [B, n, D], dk: [B, n, N_k, D], route_valid: [B, n, N_k] -> [B, n, D].
  torch::Tensor cross_modality(const torch::Tensor& dm, const torch::Tensor& dk,
                               const torch::Tensor& route_valid, AttentionTrace* trace = nullptr);
  /// ego: [B, D], c: [B, n, D], neighbour_mask: [B, n] -> [B, D].
  torch::Tensor aggregate(const torch::Tensor& ego, const torch::Tensor& c,
                          const torch::Tensor& neighbour_mask, AttentionTrace* trace = nullptr);
  /// ag: [B, D], ego_routes: [B, N_k, D], valid: [B, N_k] -> [B, D].
  torch::Tensor output_level(const torch::Tensor& ag, const torch::Tensor& ego_routes,
                             const torch::Tensor& valid, AttentionTrace* trace = nullptr);

  torch::Tensor encode(const SceneBatch& batch, AttentionTrace* trace = nullptr) override;
  const EncoderConfig& config() const override { return config_; }

 private:
  EncoderConfig config_;
  MultiHeadAttention motion_attn_{nullptr}, route_attn_{nullptr}, cross_attn_{nullptr},
      agg_attn_{nullptr}, out_attn_{nullptr};
  Mlp motion_mlp_{nullptr}, route_mlp_{nullptr}, cross_mlp_{nullptr}, agg_mlp_{nullptr},
      out_mlp_{nullptr};
  torch::nn::Embedding category_{nullptr};
};

/// Baseline: an LSTM over the stacked agent histories plus an MLP over the
/// ego's candidate routes.
class LstmEncoderImpl : public SceneEncoderImpl {
 public:
  explicit LstmEncoderImpl(const EncoderConfig& config);
  torch::Tensor encode(const SceneBatch& batch, AttentionTrace* trace = nullptr) override;
  const EncoderConfig& config() const override { return config_; }

 private:
  EncoderConfig config_;
  torch::nn::LSTM lstm_{nullptr};
  Mlp head_{nullptr};
};

SceneEncoder make_encoder(const EncoderConfig& config);

/// Scales positions and velocities of the motion tensor and positions of the
/// route tensor; headings are left in radians.
SceneBatch scale_inputs(const SceneBatch& batch, double scale);

}  // namespace scenerep::nn
