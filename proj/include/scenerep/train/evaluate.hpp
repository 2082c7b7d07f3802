#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenerep/sim/simulator.hpp"
#include "scenerep/train/agent.hpp"

namespace scenerep::train {

struct EpisodeResult {
  int episode = 0;
  std::uint64_t seed = 0;
  sim::Outcome outcome = sim::Outcome::kRunning;
  int steps = 0;
  double episode_return = 0.0;
  bool operator==(const EpisodeResult&) const = default;
};

struct EvalReport {
  std::string scenario;
  int episodes = 0;
  double success_rate = 0.0;     // percent
  double collision_rate = 0.0;   // percent
  double stagnation_rate = 0.0;  // percent, step limit reached
  double off_route_rate = 0.0;   // percent
  double completion_time_mean = 0.0;  // seconds, successful episodes only
  double completion_time_std = 0.0;
  std::vector<EpisodeResult> results;
  bool operator==(const EvalReport&) const = default;
};

nlohmann::json to_json(const EvalReport& r);

/// Seed of evaluation episode i; disjoint from the training seeds.
std::uint64_t eval_seed(std::uint64_t seed, int episode);

/// Aggregates per-episode outcomes into rates and completion times.
EvalReport summarize(const std::string& scenario, std::vector<EpisodeResult> results, double dt);

/// Runs `episodes` episodes with the deterministic policy. When `trace_dir` is
/// set, one JSON-lines rollout trace per episode is written there.
EvalReport evaluate(Policy& policy, const sim::ScenarioConfig& scenario, int episodes, std::uint64_t seed,
                    const std::optional<std::filesystem::path>& trace_dir = std::nullopt);

/// Evaluation from a checkpoint file; an empty scenario means the training one.
EvalReport evaluate(const std::filesystem::path& checkpoint, const std::string& scenario, int episodes,
                    std::uint64_t seed);

/// Scenario used by a checkpoint, optionally replaced by another preset/file.
sim::ScenarioConfig scenario_for(const Agent& agent, const std::string& override_name);

/// One episode's per-step attention weights with agent and route labels.
std::vector<nlohmann::json> export_attention(Policy& policy, const sim::ScenarioConfig& scenario,
                                             std::uint64_t seed, int max_steps = -1);

struct PcaResult {
  std::vector<std::array<double, 2>> points;
  std::vector<double> q_values;  // mean of the two critics
  std::array<double, 2> explained_ratio{0.0, 0.0};
};

/// Principal components of rows of `x` ([N, F]); rows projected on the first two.
PcaResult pca_2d(const torch::Tensor& x);

/// PCA over the critics' inputs (h, a) for states visited by the policy.
PcaResult pca_latents(Agent& agent, const std::vector<scene::SceneState>& states);

/// States visited by the deterministic policy over `episodes` episodes.
std::vector<scene::SceneState> collect_states(Policy& policy, const sim::ScenarioConfig& scenario,
                                              int episodes, std::uint64_t seed);

}  // namespace scenerep::train
