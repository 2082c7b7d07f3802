#include "scenerep/train/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "scenerep/errors.hpp"
#include "scenerep/nn/layers.hpp"
#include "scenerep/rl/hybrid_action.hpp"

namespace scenerep::train {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t episode_seed(std::uint64_t seed, int episode) {
  return (seed << 32) | static_cast<std::uint32_t>(episode);
}

namespace {

std::vector<torch::Tensor> params_of(std::initializer_list<const torch::nn::Module*> mods) {
  std::vector<torch::Tensor> out;
  for (const auto* m : mods)
    for (const auto& p : m->parameters()) out.push_back(p);
  return out;
}

void check_finite(const torch::Tensor& loss, const char* name, const std::vector<std::uint64_t>& ids,
                  const fs::path& out) {
  if (std::isfinite(loss.item<double>())) return;
  json dump{{"loss", name}, {"batch_ids", ids}};
  std::ofstream(out / "nonfinite_batch.json") << dump.dump(2) << "\n";
  std::ostringstream msg;
  msg << name << " is not finite; batch transition ids:";
  for (auto id : ids) msg << ' ' << id;
  throw NonFiniteLoss(msg.str(), ids);
}

json summary_json(const EpisodeSummary& e) {
  return {{"episode", e.episode}, {"steps", e.steps}, {"return", e.episode_return},
          {"outcome", static_cast<int>(e.outcome)}};
}

EpisodeSummary summary_from(const json& j) {
  return {j.at("episode").get<int>(), j.at("steps").get<int>(), j.at("return").get<double>(),
          static_cast<sim::Outcome>(j.at("outcome").get<int>())};
}

}  // namespace

Trainer::Trainer(const TrainConfig& config, fs::path out_dir, bool verbose)
    : config_(config),
      out_(std::move(out_dir)),
      verbose_(verbose),
      agent_((torch::manual_seed(config.seed), config)),
      replay_(config.buffer_capacity, config.horizon),
      rng_(config.seed),
      env_(config.scenario_config()),
      history_(config.history) {
  fs::create_directories(out_);
  make_optimizers();
  std::ofstream(out_ / "config.json") << json(config_).dump(2) << "\n";
  std::ofstream(out_ / "metrics.jsonl", std::ios::trunc);
  begin_episode();
}

void Trainer::make_optimizers() {
  const auto opts = torch::optim::AdamOptions(config_.learning_rate);
  critic_opt_ = std::make_unique<torch::optim::Adam>(
      params_of({agent_.encoder.get(), agent_.critic1.get(), agent_.critic2.get()}), opts);
  actor_opt_ = std::make_unique<torch::optim::Adam>(params_of({agent_.actor.get()}), opts);
  alpha_opt_ = std::make_unique<torch::optim::Adam>(std::vector<torch::Tensor>{agent_.log_alpha}, opts);
  if (config_.uses_slt()) {
    slt_opt_ = std::make_unique<torch::optim::Adam>(
        params_of({agent_.encoder.get(), agent_.transition.get(), agent_.head.get()}), opts);
  }
}

void Trainer::begin_episode() {
  const auto obs = env_.reset(episode_seed(config_.seed, episode_));
  history_.clear();
  history_.update(obs);
  state_ = std::make_shared<const scene::SceneState>(build_state(history_, obs, config_.dims()));
  episode_return_ = 0.0;
  episode_actions_.clear();
}

torch::Tensor Trainer::normal(int64_t rows) {
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<float> v(static_cast<std::size_t>(rows) * 2);
  for (auto& x : v) x = static_cast<float>(n01(rng_));
  return torch::from_blob(v.data(), {rows, 2}, torch::kFloat32).clone();
}

void Trainer::env_step() {
  scene::RawAction raw;
  if (step_ < config_.warmup_steps) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    raw = {u(rng_), u(rng_)};
  } else {
    torch::NoGradGuard guard;
    const auto h = agent_.encoder->encode(nn::make_batch(*state_));
    const auto a = rl::sample_action(agent_.actor, h, normal(1)).action.clamp(-1.0, 1.0);
    raw = {a[0][0].item<double>(), a[0][1].item<double>()};
  }
  const auto res = env_.step(rl::to_env(raw, config_.v_max));
  history_.update(res.observation);
  auto next = std::make_shared<const scene::SceneState>(build_state(history_, res.observation, config_.dims()));
  replay_.push_step({state_, raw, res.reward, next, res.done});
  episode_actions_.push_back(raw);
  episode_return_ += res.reward;
  state_ = next;
  ++step_;

  if (res.done) {
    replay_.flush_episode();
    recent_.push_back({episode_, env_.episode_step(), episode_return_, res.info.outcome});
    if (static_cast<int>(recent_.size()) > config_.success_window) recent_.erase(recent_.begin());
    ++episodes_done_;
    ++episode_;
    begin_episode();
  }
}

void Trainer::update() {
  const int B = config_.batch_size;
  const int T = config_.horizon;
  const bool aug = config_.uses_augmentation();
  const auto idx = replay_.sample(static_cast<std::size_t>(B), rng_);
  std::vector<std::uint64_t> ids;
  std::vector<scene::SceneState> cur, nxt;
  cur.reserve(B);
  nxt.reserve(B);
  std::vector<float> actions, rewards, dones;
  for (auto i : idx) {
    const auto& tr = replay_.at(i);
    ids.push_back(tr.id);
    cur.push_back(aug ? scene::augment(*tr.step.state, rng_) : *tr.step.state);
    nxt.push_back(aug ? scene::augment(*tr.step.next_state, rng_) : *tr.step.next_state);
    actions.push_back(static_cast<float>(tr.step.action[0]));
    actions.push_back(static_cast<float>(tr.step.action[1]));
    rewards.push_back(static_cast<float>(tr.step.reward));
    dones.push_back(tr.step.done ? 1.0f : 0.0f);
  }
  auto ptrs = [](const std::vector<scene::SceneState>& v) {
    std::vector<const scene::SceneState*> p;
    for (const auto& s : v) p.push_back(&s);
    return p;
  };
  const auto cur_batch = nn::make_batch(ptrs(cur));
  const auto nxt_batch = nn::make_batch(ptrs(nxt));

  rl::CriticBatch cb;
  cb.actions = torch::from_blob(actions.data(), {B, 2}, torch::kFloat32).clone();
  cb.rewards = torch::from_blob(rewards.data(), {B}, torch::kFloat32).clone();
  cb.dones = torch::from_blob(dones.data(), {B}, torch::kFloat32).clone();
  cb.h = agent_.encoder->encode(cur_batch);
  {
    torch::NoGradGuard guard;
    cb.h_next = agent_.encoder->encode(nxt_batch);
    cb.h_next_target = agent_.encoder_target->encode(nxt_batch);
  }
  cb.next_noise = normal(B);
  const double alpha = agent_.alpha();

  const auto c = rl::critic_loss(agent_.critic1, agent_.critic2, agent_.critic1_target, agent_.critic2_target,
                                 agent_.actor, cb, alpha, config_.gamma);
  check_finite(c.loss, "critic loss", ids, out_);
  critic_opt_->zero_grad();
  c.loss.backward();
  critic_opt_->step();

  nn::polyak_update(*agent_.encoder, *agent_.encoder_target, config_.tau);
  nn::polyak_update(*agent_.critic1, *agent_.critic1_target, config_.tau);
  nn::polyak_update(*agent_.critic2, *agent_.critic2_target, config_.tau);

  const auto a = rl::actor_loss(agent_.actor, agent_.critic1, agent_.critic2, cb.h, normal(B), alpha);
  check_finite(a.loss, "actor loss", ids, out_);
  actor_opt_->zero_grad();
  a.loss.backward();
  actor_opt_->step();

  const auto al = rl::alpha_loss(agent_.log_alpha, a.log_prob, config_.target_entropy);
  check_finite(al, "alpha loss", ids, out_);
  alpha_opt_->zero_grad();
  al.backward();
  alpha_opt_->step();

  sum_critic_ += c.loss.item<double>();
  sum_actor_ += a.loss.item<double>();
  sum_alpha_loss_ += al.item<double>();
  ++window_updates_;

  if (config_.uses_slt()) {
    std::vector<scene::SceneState> window;
    window.reserve(static_cast<std::size_t>(B) * (T + 1));
    std::vector<float> wactions;
    std::vector<std::uint8_t> valid;
    for (auto i : idx) {
      const auto& w = replay_.at(i).window;
      for (const auto& s : w.states) window.push_back(aug ? scene::augment(*s, rng_) : *s);
      for (const auto& act : w.actions) {
        wactions.push_back(static_cast<float>(act[0]));
        wactions.push_back(static_cast<float>(act[1]));
      }
      for (int k = 1; k <= T; ++k) valid.push_back(w.state_valid[k]);
    }
    const auto valid_t = torch::from_blob(valid.data(), {B, T}, torch::kUInt8).to(torch::kBool);
    if (valid_t.any().item<bool>()) {
      const auto h = agent_.encoder->encode(nn::make_batch(ptrs(window))).view({B, T + 1, -1});
      const auto acts = torch::from_blob(wactions.data(), {B, T, 2}, torch::kFloat32).clone();
      const auto loss = nn::slt_loss(agent_.transition, agent_.head, h, acts, valid_t);
      check_finite(loss, "latent prediction loss", ids, out_);
      slt_opt_->zero_grad();
      loss.backward();
      slt_opt_->step();
      sum_slt_ += loss.item<double>();
      ++window_slt_;
    }
  }
  ++updates_;
}

void Trainer::log_row() {
  double ret = 0.0, success = 0.0, collision = 0.0;
  for (const auto& e : recent_) {
    ret += e.episode_return;
    success += e.outcome == sim::Outcome::kSuccess;
    collision += e.outcome == sim::Outcome::kCollision;
  }
  const double n = recent_.empty() ? 1.0 : static_cast<double>(recent_.size());
  auto mean = [](double s, int k) { return k ? json(s / k) : json(nullptr); };
  json row{{"step", step_},
           {"episodes", episodes_done_},
           {"updates", updates_},
           {"episode_return", ret / n},
           {"success_rate", success / n},
           {"collision_rate", collision / n},
           {"critic_loss", mean(sum_critic_, window_updates_)},
           {"actor_loss", mean(sum_actor_, window_updates_)},
           {"alpha_loss", mean(sum_alpha_loss_, window_updates_)},
           {"slt_loss", mean(sum_slt_, window_slt_)},
           {"alpha", agent_.alpha()}};
  metrics_.push_back(row);
  std::ofstream(out_ / "metrics.jsonl", std::ios::app) << row.dump() << "\n";
  if (verbose_) std::cerr << row.dump() << "\n";
  sum_critic_ = sum_actor_ = sum_slt_ = sum_alpha_loss_ = 0.0;
  window_updates_ = window_slt_ = 0;
}

void Trainer::run(std::optional<int> max_steps) {
  torch::set_num_threads(1);
  const int stop = max_steps ? std::min(config_.total_steps, step_ + *max_steps) : config_.total_steps;
  while (step_ < stop) {
    env_step();
    if (step_ > config_.warmup_steps && replay_.size() >= static_cast<std::size_t>(config_.batch_size)) {
      for (int u = 0; u < config_.updates_per_step; ++u) update();
    }
    if (step_ % config_.log_interval == 0) log_row();
    if (config_.snapshot_interval > 0 && step_ % config_.snapshot_interval == 0) save_snapshot(out_ / "snapshot");
  }
  agent_.save(checkpoint_path());
}

void Trainer::write_metrics_file() const {
  std::ofstream out(out_ / "metrics.jsonl", std::ios::trunc);
  for (const auto& row : metrics_) out << row.dump() << "\n";
}

void Trainer::save_snapshot(const fs::path& dir) const {
  fs::create_directories(dir);
  agent_.save(dir / "agent.pt");
  torch::save(*critic_opt_, (dir / "optim_critic.pt").string());
  torch::save(*actor_opt_, (dir / "optim_actor.pt").string());
  torch::save(*alpha_opt_, (dir / "optim_alpha.pt").string());
  if (slt_opt_) torch::save(*slt_opt_, (dir / "optim_slt.pt").string());
  replay_.save(dir / "replay.bin");
  std::ostringstream rng;
  rng << rng_;
  json recent = json::array();
  for (const auto& e : recent_) recent.push_back(summary_json(e));
  json actions = json::array();
  for (const auto& a : episode_actions_) actions.push_back({a[0], a[1]});
  json state{{"step", step_},
             {"updates", updates_},
             {"episode", episode_},
             {"episodes_done", episodes_done_},
             {"episode_return", episode_return_},
             {"episode_actions", actions},
             {"recent", recent},
             {"sum_critic", sum_critic_},
             {"sum_actor", sum_actor_},
             {"sum_slt", sum_slt_},
             {"sum_alpha_loss", sum_alpha_loss_},
             {"window_updates", window_updates_},
             {"window_slt", window_slt_},
             {"rng", rng.str()},
             {"metrics", metrics_}};
  std::ofstream(dir / "trainer.json") << state.dump() << "\n";
}

std::unique_ptr<Trainer> Trainer::resume(const fs::path& dir, fs::path out_dir, bool verbose) {
  std::ifstream in(dir / "trainer.json");
  if (!in) throw ConfigError("no trainer state in " + dir.string());
  json state;
  in >> state;
  Agent loaded = Agent::load(dir / "agent.pt");
  auto t = std::make_unique<Trainer>(loaded.config, std::move(out_dir), verbose);
  t->agent_ = std::move(loaded);
  t->make_optimizers();
  torch::load(*t->critic_opt_, (dir / "optim_critic.pt").string());
  torch::load(*t->actor_opt_, (dir / "optim_actor.pt").string());
  torch::load(*t->alpha_opt_, (dir / "optim_alpha.pt").string());
  if (t->slt_opt_) torch::load(*t->slt_opt_, (dir / "optim_slt.pt").string());
  t->replay_ = replay::ReplayBuffer::load(dir / "replay.bin");

  t->step_ = state.at("step");
  t->updates_ = state.at("updates");
  t->episode_ = state.at("episode");
  t->episodes_done_ = state.at("episodes_done");
  t->recent_.clear();
  for (const auto& e : state.at("recent")) t->recent_.push_back(summary_from(e));
  t->sum_critic_ = state.at("sum_critic");
  t->sum_actor_ = state.at("sum_actor");
  t->sum_slt_ = state.at("sum_slt");
  t->sum_alpha_loss_ = state.at("sum_alpha_loss");
  t->window_updates_ = state.at("window_updates");
  t->window_slt_ = state.at("window_slt");
  t->metrics_ = state.at("metrics").get<std::vector<json>>();
  std::istringstream rng(state.at("rng").get<std::string>());
  rng >> t->rng_;

  // Rebuild the running episode by replaying its recorded actions.
  t->begin_episode();
  for (const auto& a : state.at("episode_actions")) {
    const scene::RawAction raw{a[0].get<double>(), a[1].get<double>()};
    const auto res = t->env_.step(rl::to_env(raw, t->config_.v_max));
    t->history_.update(res.observation);
    t->state_ = std::make_shared<const scene::SceneState>(
        build_state(t->history_, res.observation, t->config_.dims()));
    t->episode_actions_.push_back(raw);
  }
  t->episode_return_ = state.at("episode_return");
  t->write_metrics_file();
  return t;
}

}  // namespace scenerep::train
