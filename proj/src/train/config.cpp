#include "scenerep/train/config.hpp"

#include <fstream>
#include <set>

#include "scenerep/errors.hpp"
#include "scenerep/sim/presets.hpp"

namespace scenerep::train {

const char* ablation_name(Ablation a) {
  switch (a) {
    case Ablation::kFull: return "full";
    case Ablation::kMstOnly: return "mst_only";
    case Ablation::kNoEgoRoutes: return "no_ego_routes";
    case Ablation::kNoRoutes: return "no_routes";
    case Ablation::kLstmSac: return "lstm_sac";
  }
  return "full";
}

Ablation parse_ablation(const std::string& name) {
  for (auto a : {Ablation::kFull, Ablation::kMstOnly, Ablation::kNoEgoRoutes, Ablation::kNoRoutes,
                 Ablation::kLstmSac})
    if (name == ablation_name(a)) return a;
  throw ConfigError("unknown ablation '" + name + "'");
}

nn::EncoderConfig TrainConfig::encoder_config() const {
  nn::EncoderConfig e;
  e.kind = ablation == Ablation::kLstmSac ? nn::EncoderKind::kLstm : nn::EncoderKind::kMst;
  e.width = width;
  e.heads = heads;
  e.mlp_hidden = mlp_hidden;
  e.use_routes = ablation != Ablation::kNoRoutes;
  e.use_ego_routes = ablation != Ablation::kNoEgoRoutes && ablation != Ablation::kNoRoutes;
  e.dims = dims();
  return e;
}

nn::SltConfig TrainConfig::slt_config() const {
  nn::SltConfig s;
  s.width = width;
  s.heads = heads;
  s.mlp_hidden = mlp_hidden;
  s.horizon = horizon;
  return s;
}

rl::SacConfig TrainConfig::sac_config() const {
  rl::SacConfig s;
  s.latent = width;
  s.hidden = policy_hidden;
  s.gamma = gamma;
  s.tau = tau;
  s.initial_alpha = initial_alpha;
  s.target_entropy = target_entropy;
  return s;
}

sim::ScenarioConfig TrainConfig::scenario_config() const {
  auto sc = sim::resolve_scenario(scenario);
  if (flow_rate) sc.flow_rate = *flow_rate;
  sc.ego_max_speed = v_max;
  sc.observation.max_neighbors = neighbors;
  sc.observation.route_horizon = route_length;
  sc.observation.max_routes = candidate_routes;
  return sc;
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(neighbors >= 0 && history > 0 && route_length > 0 && candidate_routes > 0, "scene dimensions must be positive");
  require(horizon > 0, "horizon must be positive");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
  require(tau >= 0.0 && tau <= 1.0, "tau must lie in [0, 1]");
  require(initial_alpha > 0.0, "initial alpha must be positive");
  require(batch_size > 0 && buffer_capacity >= static_cast<std::size_t>(batch_size), "buffer smaller than a batch");
  require(warmup_steps >= 0 && total_steps > 0, "step counts must be positive");
  require(learning_rate > 0.0, "learning rate must be positive");
  require(log_interval > 0 && success_window > 0, "logging intervals must be positive");
  require(updates_per_step >= 0 && snapshot_interval >= 0, "negative interval");
  require(width > 0 && heads > 0 && width % heads == 0, "width must be a multiple of heads");
  require(v_max > 0.0, "v_max must be positive");
  if (flow_rate) require(*flow_rate >= 0.0, "flow rate must be non-negative");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"neighbors", c.neighbors},
       {"v_max", c.v_max},
       {"history", c.history},
       {"route_length", c.route_length},
       {"horizon", c.horizon},
       {"candidate_routes", c.candidate_routes},
       {"gamma", c.gamma},
       {"tau", c.tau},
       {"initial_alpha", c.initial_alpha},
       {"warmup_steps", c.warmup_steps},
       {"buffer_capacity", c.buffer_capacity},
       {"batch_size", c.batch_size},
       {"total_steps", c.total_steps},
       {"learning_rate", c.learning_rate},
       {"target_entropy", c.target_entropy},
       {"updates_per_step", c.updates_per_step},
       {"log_interval", c.log_interval},
       {"success_window", c.success_window},
       {"snapshot_interval", c.snapshot_interval},
       {"scenario", c.scenario},
       {"flow_rate", c.flow_rate ? nlohmann::json(*c.flow_rate) : nlohmann::json(nullptr)},
       {"seed", c.seed},
       {"ablation", ablation_name(c.ablation)},
       {"width", c.width},
       {"heads", c.heads},
       {"mlp_hidden", c.mlp_hidden},
       {"policy_hidden", c.policy_hidden}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  static const std::set<std::string> known = {
      "neighbors", "v_max", "history", "route_length", "horizon", "candidate_routes", "gamma", "tau",
      "initial_alpha", "warmup_steps", "buffer_capacity", "batch_size", "total_steps", "learning_rate",
      "target_entropy", "updates_per_step", "log_interval", "success_window", "snapshot_interval",
      "scenario", "flow_rate", "seed", "ablation", "width", "heads", "mlp_hidden", "policy_hidden"};
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ConfigError("unknown training config key '" + k + "'");
  try {
    c.neighbors = j.value("neighbors", c.neighbors);
    c.v_max = j.value("v_max", c.v_max);
    c.history = j.value("history", c.history);
    c.route_length = j.value("route_length", c.route_length);
    c.horizon = j.value("horizon", c.horizon);
    c.candidate_routes = j.value("candidate_routes", c.candidate_routes);
    c.gamma = j.value("gamma", c.gamma);
    c.tau = j.value("tau", c.tau);
    c.initial_alpha = j.value("initial_alpha", c.initial_alpha);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.total_steps = j.value("total_steps", c.total_steps);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.target_entropy = j.value("target_entropy", c.target_entropy);
    c.updates_per_step = j.value("updates_per_step", c.updates_per_step);
    c.log_interval = j.value("log_interval", c.log_interval);
    c.success_window = j.value("success_window", c.success_window);
    c.snapshot_interval = j.value("snapshot_interval", c.snapshot_interval);
    c.scenario = j.value("scenario", c.scenario);
    if (j.contains("flow_rate")) {
      if (j["flow_rate"].is_null()) c.flow_rate.reset();
      else c.flow_rate = j["flow_rate"].get<double>();
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("ablation")) c.ablation = parse_ablation(j["ablation"].get<std::string>());
    c.width = j.value("width", c.width);
    c.heads = j.value("heads", c.heads);
    c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
    c.policy_hidden = j.value("policy_hidden", c.policy_hidden);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  c.validate();
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  TrainConfig c;
  from_json(j, c);
  return c;
}

}  // namespace scenerep::train
