#pragma once

#include <vector>

#include <torch/torch.h>

#include "scenerep/scene/scene_state.hpp"

namespace scenerep::nn {

/// SceneStates stacked along a leading batch dimension. Masks are bool.
struct SceneBatch {
  torch::Tensor motion;       // [B, A, T_h, 5]
  torch::Tensor motion_mask;  // [B, A, T_h]
  torch::Tensor routes;       // [B, A, N_k, T_K, 3]
  torch::Tensor route_mask;   // [B, A, N_k, T_K]
  torch::Tensor agent_mask;   // [B, A]

  int64_t size() const { return motion.size(0); }
  SceneBatch to(torch::Dtype dtype) const;
};

SceneBatch make_batch(const std::vector<const scene::SceneState*>& states,
                      torch::Dtype dtype = torch::kFloat32);
SceneBatch make_batch(const scene::SceneState& state, torch::Dtype dtype = torch::kFloat32);

}  // namespace scenerep::nn
