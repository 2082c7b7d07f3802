#include "scenerep/train/evaluate.hpp"

#include <cmath>
#include <fstream>

#include "scenerep/errors.hpp"
#include "scenerep/rl/hybrid_action.hpp"
#include "scenerep/scene/scene_state.hpp"
#include "scenerep/sim/presets.hpp"

namespace scenerep::train {

using nlohmann::json;

std::uint64_t eval_seed(std::uint64_t seed, int episode) {
  return seed + 1000000ull + static_cast<std::uint64_t>(episode);
}

json to_json(const EvalReport& r) {
  json eps = json::array();
  for (const auto& e : r.results) {
    eps.push_back({{"episode", e.episode},
                   {"seed", e.seed},
                   {"outcome", sim::outcome_name(e.outcome)},
                   {"steps", e.steps},
                   {"return", e.episode_return}});
  }
  return {{"scenario", r.scenario},
          {"episodes", r.episodes},
          {"success_rate", r.success_rate},
          {"collision_rate", r.collision_rate},
          {"stagnation_rate", r.stagnation_rate},
          {"off_route_rate", r.off_route_rate},
          {"completion_time_mean", r.completion_time_mean},
          {"completion_time_std", r.completion_time_std},
          {"results", eps}};
}

EvalReport summarize(const std::string& scenario, std::vector<EpisodeResult> results, double dt) {
  EvalReport r;
  r.scenario = scenario;
  r.episodes = static_cast<int>(results.size());
  std::vector<double> times;
  int success = 0, collision = 0, timeout = 0, off = 0;
  for (const auto& e : results) {
    switch (e.outcome) {
      case sim::Outcome::kSuccess:
        ++success;
        times.push_back(e.steps * dt);
        break;
      case sim::Outcome::kCollision: ++collision; break;
      case sim::Outcome::kTimeout: ++timeout; break;
      case sim::Outcome::kOffRoute: ++off; break;
      case sim::Outcome::kRunning: break;
    }
  }
  const double n = r.episodes ? r.episodes : 1;
  r.success_rate = 100.0 * success / n;
  r.collision_rate = 100.0 * collision / n;
  r.stagnation_rate = 100.0 * timeout / n;
  r.off_route_rate = 100.0 * off / n;
  if (!times.empty()) {
    double mean = 0.0;
    for (double t : times) mean += t;
    mean /= static_cast<double>(times.size());
    double var = 0.0;
    for (double t : times) var += (t - mean) * (t - mean);
    r.completion_time_mean = mean;
    r.completion_time_std = times.size() > 1 ? std::sqrt(var / static_cast<double>(times.size() - 1)) : 0.0;
  }
  r.results = std::move(results);
  return r;
}

namespace {

struct Rollout {
  sim::TrafficSimulator env;
  scene::HistoryBuffer history;
  scene::SceneDims dims;
  scene::SceneState state;

  Rollout(const sim::ScenarioConfig& sc, const TrainConfig& tc)
      : env(sc), history(tc.history), dims(tc.dims()), state(dims) {}

  void reset(std::uint64_t seed) {
    const auto obs = env.reset(seed);
    history.clear();
    history.update(obs);
    state = build_state(history, obs, dims);
  }

  sim::StepResult step(scene::RawAction raw, double v_max) {
    auto res = env.step(rl::to_env(raw, v_max));
    history.update(res.observation);
    state = build_state(history, res.observation, dims);
    return res;
  }
};

scene::RawAction clamp_raw(scene::RawAction a) {
  for (auto& x : a) x = std::clamp(x, -1.0, 1.0);
  return a;
}

}  // namespace

sim::ScenarioConfig scenario_for(const Agent& agent, const std::string& override_name) {
  TrainConfig c = agent.config;
  if (!override_name.empty()) {
    c.scenario = override_name;
    c.flow_rate.reset();
  }
  return c.scenario_config();
}

EvalReport evaluate(Policy& policy, const sim::ScenarioConfig& scenario, int episodes, std::uint64_t seed,
                    const std::optional<std::filesystem::path>& trace_dir) {
  if (episodes <= 0) throw UsageError("evaluate: episodes must be positive");
  const auto& tc = policy.agent().config;
  Rollout ro(scenario, tc);
  std::vector<EpisodeResult> results;
  if (trace_dir) std::filesystem::create_directories(*trace_dir);
  for (int i = 0; i < episodes; ++i) {
    EpisodeResult e;
    e.episode = i;
    e.seed = eval_seed(seed, i);
    ro.reset(e.seed);
    std::ofstream trace;
    if (trace_dir) {
      trace.open(*trace_dir / ("episode_" + std::to_string(i) + ".jsonl"));
      trace << ro.env.trace_record(nullptr, 0.0).dump() << "\n";
    }
    sim::StepResult res;
    do {
      const auto raw = clamp_raw(policy.act(ro.state));
      res = ro.step(raw, tc.v_max);
      e.episode_return += res.reward;
      if (trace_dir) {
        const auto action = rl::to_env(raw, tc.v_max);
        trace << ro.env.trace_record(&action, res.reward).dump() << "\n";
      }
    } while (!res.done);
    e.outcome = res.info.outcome;
    e.steps = ro.env.episode_step();
    results.push_back(e);
  }
  return summarize(scenario.name, std::move(results), scenario.dt);
}

EvalReport evaluate(const std::filesystem::path& checkpoint, const std::string& scenario, int episodes,
                    std::uint64_t seed) {
  torch::set_num_threads(1);
  Policy policy = Policy::load(checkpoint);
  return evaluate(policy, scenario_for(policy.agent(), scenario), episodes, seed);
}

namespace {

json tensor_rows(const torch::Tensor& t) {
  const auto d = t.to(torch::kFloat64).contiguous();
  if (d.dim() == 1) {
    std::vector<double> v(d.data_ptr<double>(), d.data_ptr<double>() + d.numel());
    return v;
  }
  json out = json::array();
  for (int64_t i = 0; i < d.size(0); ++i) out.push_back(tensor_rows(d[i]));
  return out;
}

std::string agent_label(int id) { return id == sim::TrafficSimulator::kEgoId ? "ego" : "veh" + std::to_string(id); }

}  // namespace

std::vector<json> export_attention(Policy& policy, const sim::ScenarioConfig& scenario, std::uint64_t seed,
                                   int max_steps) {
  const auto& tc = policy.agent().config;
  if (tc.ablation == Ablation::kLstmSac) throw UsageError("export_attention: the LSTM encoder has no attention");
  Rollout ro(scenario, tc);
  ro.reset(seed);
  std::vector<json> out;
  const int K = tc.candidate_routes;
  for (int step = 0; max_steps < 0 || step < max_steps; ++step) {
    nn::AttentionTrace trace;
    const auto raw = clamp_raw(policy.act(ro.state, &trace));
    std::vector<std::string> agents;
    std::vector<int> present;
    for (int a = 0; a < ro.dims.agents(); ++a) {
      if (!ro.state.agent_mask[a]) continue;
      agents.push_back(agent_label(ro.state.agent_ids[a]));
      present.push_back(a);
    }
    std::vector<std::string> routes;
    for (int k = 0; k < K; ++k) routes.push_back("route" + std::to_string(k));

    json levels;
    {
      // Aggregation: ego query over ego plus present neighbours.
      const auto w = trace.aggregation[0][0];
      std::vector<double> weights;
      for (int a : present) weights.push_back(w[a].item<double>());
      levels["aggregation"] = {{"query", "ego"}, {"keys", agents}, {"weights", weights}};
    }
    if (trace.output.defined()) {
      levels["output"] = {{"query", "ego"}, {"keys", routes}, {"weights", tensor_rows(trace.output[0][0])}};
    }
    if (trace.cross.defined()) {
      json cross = json::array();
      for (std::size_t i = 1; i < present.size(); ++i) {
        const int a = present[i];
        cross.push_back({{"query", agents[i]}, {"keys", routes}, {"weights", tensor_rows(trace.cross[0][a - 1][0])}});
      }
      levels["cross"] = cross;
    }
    json motion = json::array();
    for (std::size_t i = 0; i < present.size(); ++i) {
      motion.push_back({{"agent", agents[i]}, {"weights", tensor_rows(trace.motion[0][present[i]])}});
    }
    levels["motion"] = motion;
    out.push_back({{"step", step}, {"agents", agents}, {"levels", levels}});
    const auto res = ro.step(raw, tc.v_max);
    if (res.done) break;
  }
  return out;
}

PcaResult pca_2d(const torch::Tensor& x_in) {
  const auto x = x_in.to(torch::kFloat64);
  const int64_t n = x.size(0);
  PcaResult r;
  r.points.assign(static_cast<std::size_t>(n), {0.0, 0.0});
  if (n == 0) return r;
  const auto centered = x - x.mean(0, true);
  const auto cov = torch::matmul(centered.t(), centered) / std::max<int64_t>(n - 1, 1);
  const auto [evals, evecs] = torch::linalg_eigh(cov);  // ascending
  const auto total = evals.clamp_min(0.0).sum().item<double>();
  const int64_t f = evals.size(0);
  if (total <= 1e-300) return r;  // no variance: every point at the origin
  const auto top = evecs.index({torch::indexing::Slice(), torch::indexing::Slice(std::max<int64_t>(f - 2, 0), f)}).flip(1);
  const auto proj = torch::matmul(centered, top);
  for (int k = 0; k < std::min<int64_t>(2, f); ++k) r.explained_ratio[k] = std::max(0.0, evals[f - 1 - k].item<double>()) / total;
  for (int64_t i = 0; i < n; ++i) {
    r.points[i][0] = proj[i][0].item<double>();
    r.points[i][1] = f > 1 ? proj[i][1].item<double>() : 0.0;
  }
  return r;
}

PcaResult pca_latents(Agent& agent, const std::vector<scene::SceneState>& states) {
  torch::NoGradGuard guard;
  if (states.empty()) return {};
  std::vector<const scene::SceneState*> ptrs;
  for (const auto& s : states) ptrs.push_back(&s);
  const auto dtype = agent.log_alpha.scalar_type();
  const auto h = agent.encoder->encode(nn::make_batch(ptrs, dtype));
  const auto a = rl::sample_action(agent.actor, h, {}).action;
  const auto q = 0.5 * (agent.critic1(h, a) + agent.critic2(h, a));
  PcaResult r = pca_2d(torch::cat({h, a}, -1));
  const auto qd = q.to(torch::kFloat64).contiguous();
  r.q_values.assign(qd.data_ptr<double>(), qd.data_ptr<double>() + qd.numel());
  return r;
}

std::vector<scene::SceneState> collect_states(Policy& policy, const sim::ScenarioConfig& scenario, int episodes,
                                              std::uint64_t seed) {
  const auto& tc = policy.agent().config;
  Rollout ro(scenario, tc);
  std::vector<scene::SceneState> out;
  for (int i = 0; i < episodes; ++i) {
    ro.reset(eval_seed(seed, i));
    sim::StepResult res;
    do {
      out.push_back(ro.state);
      res = ro.step(clamp_raw(policy.act(ro.state)), tc.v_max);
    } while (!res.done);
  }
  return out;
}

}  // namespace scenerep::train
