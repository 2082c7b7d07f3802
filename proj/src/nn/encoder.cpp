#include "scenerep/nn/encoder.hpp"

#include "scenerep/errors.hpp"

namespace scenerep::nn {

namespace {

torch::Tensor head_mean(const torch::Tensor& w) { return w.mean(-3); }

}  // namespace

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"kind", c.kind == EncoderKind::kMst ? "mst" : "lstm"},
       {"width", c.width},
       {"heads", c.heads},
       {"mlp_hidden", c.mlp_hidden},
       {"embedding_categories", c.embedding_categories},
       {"input_scale", c.input_scale},
       {"use_routes", c.use_routes},
       {"use_ego_routes", c.use_ego_routes},
       {"neighbors", c.dims.neighbors},
       {"history", c.dims.history},
       {"routes", c.dims.routes},
       {"route_length", c.dims.route_length}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  const std::string kind = j.value("kind", "mst");
  if (kind != "mst" && kind != "lstm") throw ConfigError("unknown encoder kind " + kind);
  c.kind = kind == "mst" ? EncoderKind::kMst : EncoderKind::kLstm;
  c.width = j.value("width", c.width);
  c.heads = j.value("heads", c.heads);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
  c.embedding_categories = j.value("embedding_categories", c.embedding_categories);
  c.input_scale = j.value("input_scale", c.input_scale);
  c.use_routes = j.value("use_routes", c.use_routes);
  c.use_ego_routes = j.value("use_ego_routes", c.use_ego_routes);
  c.dims.neighbors = j.value("neighbors", c.dims.neighbors);
  c.dims.history = j.value("history", c.dims.history);
  c.dims.routes = j.value("routes", c.dims.routes);
  c.dims.route_length = j.value("route_length", c.dims.route_length);
}

SceneBatch scale_inputs(const SceneBatch& batch, double scale) {
  const auto opts = batch.motion.options();
  const auto ms = torch::tensor({scale, scale, scale, scale, 1.0}, opts);
  const auto rs = torch::tensor({scale, scale, 1.0}, opts);
  SceneBatch out = batch;
  out.motion = batch.motion * ms;
  out.routes = batch.routes * rs;
  return out;
}

MstEncoderImpl::MstEncoderImpl(const EncoderConfig& config) : config_(config) {
  const int64_t D = config.width, H = config.heads, F = config.mlp_hidden;
  if (D <= 0 || H <= 0 || D % H != 0) throw ConfigError("encoder width must be a positive multiple of heads");
  motion_attn_ = register_module("motion_attn", MultiHeadAttention(scene::kMotionFeatures, scene::kMotionFeatures, D, H));
  motion_mlp_ = register_module("motion_mlp", Mlp(D, F, D));
  agg_attn_ = register_module("agg_attn", MultiHeadAttention(D, D, D, H));
  agg_mlp_ = register_module("agg_mlp", Mlp(D, F, D));
  if (config.use_routes) {
    route_attn_ = register_module("route_attn", MultiHeadAttention(scene::kRouteFeatures, scene::kRouteFeatures, D, H));
    category_ = register_module("category", torch::nn::Embedding(config.embedding_categories, D));
    route_mlp_ = register_module("route_mlp", Mlp(2 * D, F, D));
    cross_attn_ = register_module("cross_attn", MultiHeadAttention(D, D, D, H));
    cross_mlp_ = register_module("cross_mlp", Mlp(D, F, D));
    if (config.use_ego_routes) {
      out_attn_ = register_module("out_attn", MultiHeadAttention(D, D, D, H));
      out_mlp_ = register_module("out_mlp", Mlp(D, F, D));
    }
  }
}

MstEncoderImpl::Dynamic MstEncoderImpl::encode_dynamic(const SceneBatch& input, AttentionTrace* trace) {
  const SceneBatch b = scale_inputs(input, config_.input_scale);
  const int64_t B = b.motion.size(0), A = b.motion.size(1), T = b.motion.size(2);
  const int64_t D = config_.width;
  const auto dtype = b.motion.scalar_type();
  Dynamic out;

  const auto x = b.motion.reshape({B * A, T, scene::kMotionFeatures});
  const auto mm = b.motion_mask.reshape({B * A, T});
  // Only sequences with a visible step are encoded; the rest stay zero.
  const auto rows = mm.any(1).nonzero().squeeze(1);
  const auto xs = x.index_select(0, rows);
  const auto ms = mm.index_select(0, rows);
  torch::Tensor w;
  const auto y = motion_attn_(xs, xs, ms.unsqueeze(2).logical_and(ms.unsqueeze(1)), trace ? &w : nullptr);
  if (trace) {
    trace->motion = torch::zeros({B * A, T, T}, w.options()).index_copy(0, rows, head_mean(w)).reshape({B, A, T, T});
  }
  const auto dm = torch::zeros({B * A, D}, x.options()).index_copy(0, rows, motion_mlp_(masked_max_pool(y, ms)));
  out.motion = dm.reshape({B, A, D}) * b.agent_mask.unsqueeze(-1).to(dtype);

  if (!config_.use_routes) return out;
  const int64_t K = b.routes.size(2), W = b.routes.size(3);
  const auto r = b.routes.reshape({B * A * K, W, scene::kRouteFeatures});
  const auto rm = b.route_mask.reshape({B * A * K, W});
  const auto rrows = rm.any(1).nonzero().squeeze(1);
  const auto rs = r.index_select(0, rrows);
  const auto rms = rm.index_select(0, rrows);
  const auto yr = route_attn_(rs, rs, rms.unsqueeze(2).logical_and(rms.unsqueeze(1)), trace ? &w : nullptr);
  if (trace) {
    trace->route = torch::zeros({B * A * K, W, W}, w.options()).index_copy(0, rrows, head_mean(w)).reshape({B, A, K, W, W});
  }
  const auto is_ego = (torch::arange(A, torch::kLong) == 0).to(torch::kLong);
  const auto category = category_(is_ego.view({1, A, 1}).expand({B, A, K}).reshape({B * A * K}).index_select(0, rrows));
  const auto dks = route_mlp_(torch::cat({masked_max_pool(yr, rms), category}, -1));
  const auto dk = torch::zeros({B * A * K, D}, x.options()).index_copy(0, rrows, dks);
  out.route_valid = rm.any(1).reshape({B, A, K}).logical_and(b.agent_mask.unsqueeze(-1));
  out.routes = dk.reshape({B, A, K, D}) * out.route_valid.unsqueeze(-1).to(dtype);
  return out;
}

torch::Tensor MstEncoderImpl::cross_modality(const torch::Tensor& dm, const torch::Tensor& dk,
                                             const torch::Tensor& route_valid, AttentionTrace* trace) {
  torch::Tensor w;
  const auto y = cross_attn_(dm.unsqueeze(2), dk, route_valid.unsqueeze(2), trace ? &w : nullptr);
  if (trace) trace->cross = head_mean(w);
  const auto any = route_valid.any(-1, true).to(dm.scalar_type());
  return cross_mlp_(y.squeeze(2)) * any + dm;
}

torch::Tensor MstEncoderImpl::aggregate(const torch::Tensor& ego, const torch::Tensor& c,
                                        const torch::Tensor& neighbour_mask, AttentionTrace* trace) {
  const auto keys = torch::cat({ego.unsqueeze(1), c}, 1);
  const auto self = torch::ones({ego.size(0), 1}, neighbour_mask.options());
  const auto mask = torch::cat({self, neighbour_mask}, 1).unsqueeze(1);
  torch::Tensor w;
  const auto y = agg_attn_(ego.unsqueeze(1), keys, mask, trace ? &w : nullptr);
  if (trace) trace->aggregation = head_mean(w);
  return agg_mlp_(y.squeeze(1));
}

torch::Tensor MstEncoderImpl::output_level(const torch::Tensor& ag, const torch::Tensor& ego_routes,
                                           const torch::Tensor& valid, AttentionTrace* trace) {
  torch::Tensor w;
  const auto y = out_attn_(ag.unsqueeze(1), ego_routes, valid.unsqueeze(1), trace ? &w : nullptr);
  if (trace) trace->output = head_mean(w);
  return out_mlp_(y.squeeze(1)) * valid.any(-1, true).to(ag.scalar_type()) + ag;
}

torch::Tensor MstEncoderImpl::encode(const SceneBatch& batch, AttentionTrace* trace) {
  using torch::indexing::Slice;
  const auto dyn = encode_dynamic(batch, trace);
  const auto ego = dyn.motion.select(1, 0);
  const auto neighbours = batch.agent_mask.index({Slice(), Slice(1)});
  torch::Tensor c = dyn.motion.index({Slice(), Slice(1)});
  if (config_.use_routes) {
    c = cross_modality(c, dyn.routes.index({Slice(), Slice(1)}),
                       dyn.route_valid.index({Slice(), Slice(1)}), trace);
  }
  const auto ag = aggregate(ego, c, neighbours, trace);
  if (!config_.use_routes || !config_.use_ego_routes) return ag;
  return output_level(ag, dyn.routes.select(1, 0), dyn.route_valid.select(1, 0), trace);
}

LstmEncoderImpl::LstmEncoderImpl(const EncoderConfig& config) : config_(config) {
  const auto& d = config.dims;
  const int64_t in = static_cast<int64_t>(d.agents()) * (scene::kMotionFeatures + 1);
  lstm_ = register_module("lstm", torch::nn::LSTM(torch::nn::LSTMOptions(in, config.width).batch_first(true)));
  const int64_t route_in = static_cast<int64_t>(d.routes) * d.route_length * (scene::kRouteFeatures + 1);
  head_ = register_module("head", Mlp(config.width + route_in, config.mlp_hidden, config.width));
}

torch::Tensor LstmEncoderImpl::encode(const SceneBatch& input, AttentionTrace*) {
  const SceneBatch b = scale_inputs(input, config_.input_scale);
  const int64_t B = b.motion.size(0), T = b.motion.size(2);
  const auto dtype = b.motion.scalar_type();
  const auto feats = torch::cat({b.motion, b.motion_mask.unsqueeze(-1).to(dtype)}, -1);  // [B, A, T, 6]
  const auto seq = feats.permute({0, 2, 1, 3}).reshape({B, T, -1});
  const auto hidden = std::get<0>(std::get<1>(lstm_->forward(seq))).select(0, -1);  // [B, D]
  const auto routes = torch::cat({b.routes.select(1, 0), b.route_mask.select(1, 0).unsqueeze(-1).to(dtype)}, -1);
  return head_(torch::cat({hidden, routes.reshape({B, -1})}, -1));
}

SceneEncoder make_encoder(const EncoderConfig& config) {
  if (config.kind == EncoderKind::kLstm) return std::make_shared<LstmEncoderImpl>(config);
  return std::make_shared<MstEncoderImpl>(config);
}

}  // namespace scenerep::nn
