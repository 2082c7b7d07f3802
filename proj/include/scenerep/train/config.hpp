#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "scenerep/nn/encoder.hpp"
#include "scenerep/nn/slt.hpp"
#include "scenerep/rl/sac.hpp"
#include "scenerep/scene/scene_state.hpp"
#include "scenerep/sim/scenario.hpp"

namespace scenerep::train {

enum class Ablation { kFull, kMstOnly, kNoEgoRoutes, kNoRoutes, kLstmSac };

const char* ablation_name(Ablation a);
Ablation parse_ablation(const std::string& name);

struct TrainConfig {
  // Reference hyperparameters.
  int neighbors = 5;            // n
  double v_max = 10.0;          // m/s
  int history = 10;             // T_h
  int route_length = 10;        // T_K
  int horizon = 3;              // T_G = T_f
  int candidate_routes = 2;     // N_k
  double gamma = 0.99;
  double tau = 0.005;           // Polyak weight
  double initial_alpha = 1.0;
  int warmup_steps = 5000;      // N_init
  std::size_t buffer_capacity = 20000;
  int batch_size = 32;
  int total_steps = 100000;     // N_train
  double learning_rate = 1e-4;

  double target_entropy = -2.0;
  int updates_per_step = 1;
  int log_interval = 200;
  int success_window = 20;
  int snapshot_interval = 0;    // 0 disables periodic resumable snapshots

  std::string scenario = "left_turn";  // preset name or scenario file
  std::optional<double> flow_rate;     // overrides the scenario's rate
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::kFull;

  int width = 128;              // D
  int heads = 4;
  int mlp_hidden = 256;
  int policy_hidden = 256;

  bool uses_slt() const { return ablation == Ablation::kFull; }
  bool uses_augmentation() const { return ablation != Ablation::kLstmSac; }
  scene::SceneDims dims() const { return {neighbors, history, candidate_routes, route_length}; }
  nn::EncoderConfig encoder_config() const;
  nn::SltConfig slt_config() const;
  rl::SacConfig sac_config() const;
  sim::ScenarioConfig scenario_config() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& c);

TrainConfig load_train_config(const std::string& path);

}  // namespace scenerep::train
