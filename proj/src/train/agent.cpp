#include "scenerep/train/agent.hpp"

#include "scenerep/errors.hpp"

namespace scenerep::train {

namespace {

void write_group(torch::serialize::OutputArchive& root, const std::string& name, const torch::nn::Module& m) {
  torch::serialize::OutputArchive sub;
  m.save(sub);
  root.write(name, sub);
}

void read_group(torch::serialize::InputArchive& root, const std::string& name, torch::nn::Module& m) {
  torch::serialize::InputArchive sub;
  if (!root.try_read(name, sub)) throw ConfigError("checkpoint lacks group '" + name + "'");
  m.load(sub);
}

}  // namespace

Agent::Agent(const TrainConfig& c) : config(c) {
  c.validate();
  const auto ec = c.encoder_config();
  const auto sc = c.sac_config();
  encoder = nn::make_encoder(ec);
  encoder_target = nn::make_encoder(ec);
  nn::copy_parameters(*encoder, *encoder_target);
  actor = rl::Actor(sc);
  critic1 = rl::Critic(sc);
  critic2 = rl::Critic(sc);
  critic1_target = rl::Critic(sc);
  critic2_target = rl::Critic(sc);
  nn::copy_parameters(*critic1, *critic1_target);
  nn::copy_parameters(*critic2, *critic2_target);
  for (auto* m : {static_cast<torch::nn::Module*>(encoder_target.get()), static_cast<torch::nn::Module*>(critic1_target.get()),
                  static_cast<torch::nn::Module*>(critic2_target.get())})
    for (auto& p : m->parameters()) p.set_requires_grad(false);
  log_alpha = torch::full({1}, std::log(c.initial_alpha), torch::kFloat32).set_requires_grad(true);
  if (c.uses_slt()) {
    transition = nn::LatentTransition(c.slt_config());
    head = nn::ProjectionHead(c.slt_config());
  }
}

std::vector<torch::Tensor> Agent::trainable() const {
  std::vector<torch::Tensor> out;
  auto add = [&](const torch::nn::Module& m) {
    for (const auto& p : m.parameters()) out.push_back(p);
  };
  add(*encoder);
  add(*actor);
  add(*critic1);
  add(*critic2);
  out.push_back(log_alpha);
  if (transition) add(*transition);
  if (head) add(*head);
  return out;
}

void Agent::to(torch::Dtype dtype) {
  encoder->to(dtype);
  encoder_target->to(dtype);
  actor->to(dtype);
  critic1->to(dtype);
  critic2->to(dtype);
  critic1_target->to(dtype);
  critic2_target->to(dtype);
  {
    torch::NoGradGuard guard;
    log_alpha = log_alpha.detach().to(dtype).set_requires_grad(true);
  }
  if (transition) transition->to(dtype);
  if (head) head->to(dtype);
}

void Agent::save(const std::filesystem::path& path) const {
  torch::serialize::OutputArchive root;
  root.write("version", torch::tensor({kCheckpointVersion}));
  root.write("config", c10::IValue(nlohmann::json(config).dump()));
  write_group(root, "encoder", *encoder);
  write_group(root, "encoder_target", *encoder_target);
  write_group(root, "actor", *actor);
  write_group(root, "critic1", *critic1);
  write_group(root, "critic2", *critic2);
  write_group(root, "critic1_target", *critic1_target);
  write_group(root, "critic2_target", *critic2_target);
  root.write("log_alpha", log_alpha.detach());
  if (transition) write_group(root, "slt_transition", *transition);
  if (head) write_group(root, "slt_head", *head);
  root.save_to(path.string());
}

Agent Agent::load(const std::filesystem::path& path) {
  torch::serialize::InputArchive root;
  try {
    root.load_from(path.string());
  } catch (const c10::Error& e) {
    throw ConfigError("cannot read checkpoint " + path.string());
  }
  torch::Tensor version;
  if (!root.try_read("version", version) || version.item<std::int64_t>() != kCheckpointVersion)
    throw ConfigError("unsupported checkpoint version in " + path.string());
  c10::IValue cfg;
  if (!root.try_read("config", cfg)) throw ConfigError("checkpoint lacks its configuration");
  TrainConfig config;
  from_json(nlohmann::json::parse(cfg.toStringRef()), config);
  Agent a(config);
  read_group(root, "encoder", *a.encoder);
  read_group(root, "encoder_target", *a.encoder_target);
  read_group(root, "actor", *a.actor);
  read_group(root, "critic1", *a.critic1);
  read_group(root, "critic2", *a.critic2);
  read_group(root, "critic1_target", *a.critic1_target);
  read_group(root, "critic2_target", *a.critic2_target);
  torch::Tensor la;
  if (!root.try_read("log_alpha", la)) throw ConfigError("checkpoint lacks log_alpha");
  {
    torch::NoGradGuard guard;
    a.log_alpha.copy_(la);
  }
  if (a.transition) read_group(root, "slt_transition", *a.transition);
  if (a.head) read_group(root, "slt_head", *a.head);
  return a;
}

std::vector<std::string> Agent::checkpoint_groups(const std::filesystem::path& path) {
  torch::serialize::InputArchive root;
  root.load_from(path.string());
  return root.keys();
}

torch::Tensor Policy::latent(const scene::SceneState& state, nn::AttentionTrace* trace) {
  torch::NoGradGuard guard;
  const auto dtype = agent_.log_alpha.scalar_type();
  return agent_.encoder->encode(nn::make_batch(state, dtype), trace);
}

scene::RawAction Policy::act(const scene::SceneState& state, nn::AttentionTrace* trace) {
  torch::NoGradGuard guard;
  const auto h = latent(state, trace);
  const auto a = rl::sample_action(agent_.actor, h, {}).action.to(torch::kFloat64);
  return {a[0][0].item<double>(), a[0][1].item<double>()};
}

}  // namespace scenerep::train
