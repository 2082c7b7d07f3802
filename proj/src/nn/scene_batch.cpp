#include "scenerep/nn/scene_batch.hpp"

#include <algorithm>

#include "scenerep/errors.hpp"

namespace scenerep::nn {

namespace {

template <class T>
torch::Tensor stack_field(const std::vector<const scene::SceneState*>& states,
                          const std::vector<T> scene::SceneState::*field,
                          std::vector<int64_t> shape, torch::Dtype src, torch::Dtype dst) {
  const std::size_t per = (states.front()->*field).size();
  std::vector<T> flat(per * states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& v = states[i]->*field;
    std::copy(v.begin(), v.end(), flat.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  shape.insert(shape.begin(), static_cast<int64_t>(states.size()));
  return torch::from_blob(flat.data(), shape, torch::TensorOptions().dtype(src)).to(dst).clone();
}

}  // namespace

SceneBatch SceneBatch::to(torch::Dtype dtype) const {
  return {motion.to(dtype), motion_mask, routes.to(dtype), route_mask, agent_mask};
}

SceneBatch make_batch(const std::vector<const scene::SceneState*>& states, torch::Dtype dtype) {
  if (states.empty()) throw UsageError("make_batch: no states");
  const auto d = states.front()->dims;
  for (const auto* s : states)
    if (!(s->dims == d)) throw UsageError("make_batch: mixed scene dimensions");
  const int64_t A = d.agents(), T = d.history, K = d.routes, W = d.route_length;
  using S = scene::SceneState;
  SceneBatch b;
  b.motion = stack_field(states, &S::motion, {A, T, scene::kMotionFeatures}, torch::kFloat64, dtype);
  b.routes = stack_field(states, &S::routes, {A, K, W, scene::kRouteFeatures}, torch::kFloat64, dtype);
  b.motion_mask = stack_field(states, &S::motion_mask, {A, T}, torch::kUInt8, torch::kBool);
  b.route_mask = stack_field(states, &S::route_mask, {A, K, W}, torch::kUInt8, torch::kBool);
  b.agent_mask = stack_field(states, &S::agent_mask, {A}, torch::kUInt8, torch::kBool);
  return b;
}

SceneBatch make_batch(const scene::SceneState& state, torch::Dtype dtype) {
  return make_batch(std::vector<const scene::SceneState*>{&state}, dtype);
}

}  // namespace scenerep::nn
