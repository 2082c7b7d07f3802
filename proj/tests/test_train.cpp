#include "torch_doctest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "scenerep/errors.hpp"
#include "scenerep/sim/presets.hpp"
#include "scenerep/train/agent.hpp"
#include "scenerep/train/config.hpp"
#include "scenerep/train/evaluate.hpp"
#include "scenerep/train/plot.hpp"
#include "scenerep/train/trainer.hpp"

using namespace scenerep;
using namespace scenerep::train;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

TrainConfig tiny(Ablation ablation = Ablation::kFull) {
  TrainConfig c;
  c.ablation = ablation;
  c.width = 8;
  c.heads = 2;
  c.mlp_hidden = 16;
  c.policy_hidden = 16;
  c.warmup_steps = 100;
  c.total_steps = 600;
  c.batch_size = 8;
  c.buffer_capacity = 2000;
  c.flow_rate = 50.0;
  c.seed = 3;
  return c;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("scenerep_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<torch::Tensor> clone_params(const torch::nn::Module& m) {
  std::vector<torch::Tensor> out;
  for (const auto& p : m.parameters()) out.push_back(p.detach().clone());
  return out;
}

void check_polyak(const std::vector<torch::Tensor>& before, const torch::nn::Module& online,
                  const torch::nn::Module& target, double tau) {
  const auto o = online.parameters();
  const auto t = target.parameters();
  REQUIRE(o.size() == before.size());
  for (std::size_t i = 0; i < o.size(); ++i) {
    const auto expected = (1.0 - tau) * before[i] + tau * o[i].detach();
    CHECK(torch::allclose(t[i], expected, 1e-6, 1e-7));
    CHECK_FALSE(t[i].grad().defined());
  }
}

// Closed form: m_t = beta^t x_0 + (1 - beta) sum_{k=1..t} beta^(t-k) x_k.
double ema_closed_form(const std::vector<double>& x, std::size_t t, double beta) {
  double m = std::pow(beta, static_cast<double>(t)) * x[0];
  for (std::size_t k = 1; k <= t; ++k) m += (1.0 - beta) * std::pow(beta, static_cast<double>(t - k)) * x[k];
  return m;
}

}  // namespace

TEST_CASE("configuration defaults are the reference hyperparameters") {
  const TrainConfig c;
  CHECK(c.neighbors == 5);
  CHECK(c.v_max == 10.0);
  CHECK(c.history == 10);
  CHECK(c.route_length == 10);
  CHECK(c.horizon == 3);
  CHECK(c.candidate_routes == 2);
  CHECK(c.gamma == 0.99);
  CHECK(c.tau == 0.005);
  CHECK(c.initial_alpha == 1.0);
  CHECK(c.warmup_steps == 5000);
  CHECK(c.buffer_capacity == 20000);
  CHECK(c.batch_size == 32);
  CHECK(c.total_steps == 100000);
  CHECK(c.learning_rate == 1e-4);
  CHECK(c.target_entropy == -2.0);
  CHECK(c.log_interval == 200);
  CHECK(c.success_window == 20);
}

TEST_CASE("configuration JSON") {
  TrainConfig c = tiny(Ablation::kNoRoutes);
  c.scenario = "double_merge";
  const json j = c;
  TrainConfig back;
  from_json(j, back);
  CHECK(json(back) == j);
  CHECK(back.ablation == Ablation::kNoRoutes);
  CHECK(*back.flow_rate == 50.0);

  TrainConfig partial;
  from_json(json{{"seed", 9}}, partial);
  CHECK(partial.seed == 9);
  CHECK(partial.batch_size == 32);

  CHECK_THROWS_AS(from_json(json{{"bogus", 1}}, partial), ConfigError);
  CHECK_THROWS_AS(from_json(json{{"ablation", "nope"}}, partial), ConfigError);
  CHECK_THROWS_AS(from_json(json{{"gamma", "x"}}, partial), ConfigError);
  TrainConfig bad;
  bad.width = 10;
  bad.heads = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.buffer_capacity = 8;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  for (auto a : {Ablation::kFull, Ablation::kMstOnly, Ablation::kNoEgoRoutes, Ablation::kNoRoutes, Ablation::kLstmSac})
    CHECK(parse_ablation(ablation_name(a)) == a);
}

TEST_CASE("trainable parameters and targets") {
  torch::manual_seed(0);
  Agent full(tiny());
  std::set<const void*> trainable;
  for (const auto& p : full.trainable()) trainable.insert(p.unsafeGetTensorImpl());
  std::size_t expected = 1;  // log alpha
  for (const torch::nn::Module* m : {static_cast<const torch::nn::Module*>(full.encoder.get()),
                                     static_cast<const torch::nn::Module*>(full.actor.get()),
                                     static_cast<const torch::nn::Module*>(full.critic1.get()),
                                     static_cast<const torch::nn::Module*>(full.critic2.get()),
                                     static_cast<const torch::nn::Module*>(full.transition.get()),
                                     static_cast<const torch::nn::Module*>(full.head.get())})
    for (const auto& p : m->parameters()) {
      CHECK(trainable.count(p.unsafeGetTensorImpl()) == 1);
      ++expected;
    }
  CHECK(trainable.size() == expected);
  CHECK(trainable.count(full.log_alpha.unsafeGetTensorImpl()) == 1);
  for (const torch::nn::Module* m : {static_cast<const torch::nn::Module*>(full.encoder_target.get()),
                                     static_cast<const torch::nn::Module*>(full.critic1_target.get()),
                                     static_cast<const torch::nn::Module*>(full.critic2_target.get())})
    for (const auto& p : m->parameters()) {
      CHECK(trainable.count(p.unsafeGetTensorImpl()) == 0);
      CHECK_FALSE(p.requires_grad());
    }

  Agent mst_only(tiny(Ablation::kMstOnly));
  CHECK_FALSE(mst_only.transition);
  CHECK_FALSE(mst_only.head);
}

TEST_CASE("checkpoints carry named groups") {
  const auto dir = scratch("groups");
  Agent full(tiny());
  full.save(dir / "full.pt");
  Agent mst_only(tiny(Ablation::kMstOnly));
  mst_only.save(dir / "mst.pt");
  const auto g_full = Agent::checkpoint_groups(dir / "full.pt");
  const auto g_mst = Agent::checkpoint_groups(dir / "mst.pt");
  auto has = [](const std::vector<std::string>& g, const std::string& k) { return std::count(g.begin(), g.end(), k) > 0; };
  for (const char* k : {"version", "config", "encoder", "encoder_target", "actor", "critic1", "critic2",
                        "critic1_target", "critic2_target", "log_alpha"}) {
    CHECK(has(g_full, k));
    CHECK(has(g_mst, k));
  }
  CHECK(has(g_full, "slt_transition"));
  CHECK(has(g_full, "slt_head"));
  CHECK_FALSE(has(g_mst, "slt_transition"));
  CHECK_FALSE(has(g_mst, "slt_head"));

  // Round trip keeps every tensor.
  const Agent back = Agent::load(dir / "full.pt");
  const auto a = full.trainable(), b = back.trainable();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(torch::equal(a[i], b[i]));
  CHECK(json(back.config) == json(full.config));

  std::ofstream(dir / "junk.pt") << "not a checkpoint";
  CHECK_THROWS_AS(Agent::load(dir / "junk.pt"), ConfigError);
}

TEST_CASE("targets follow the online networks by Polyak averaging only") {
  for (auto ablation : {Ablation::kFull, Ablation::kMstOnly}) {
    CAPTURE(ablation_name(ablation));
    const auto cfg = tiny(ablation);
    Trainer t(cfg, scratch(std::string("polyak_") + ablation_name(ablation)));
    t.run(cfg.warmup_steps);
    CHECK(t.updates() == 0);
    auto& ag = t.agent();
    const auto enc0 = clone_params(*ag.encoder_target);
    const auto q10 = clone_params(*ag.critic1_target);
    const auto q20 = clone_params(*ag.critic2_target);
    t.run(1);
    CHECK(t.updates() == 1);
    check_polyak(q10, *ag.critic1, *ag.critic1_target, cfg.tau);
    check_polyak(q20, *ag.critic2, *ag.critic2_target, cfg.tau);
    // Without the latent prediction step the encoder is only touched by the critic step.
    if (ablation == Ablation::kMstOnly) check_polyak(enc0, *ag.encoder, *ag.encoder_target, cfg.tau);
  }
}

TEST_CASE("training loop bookkeeping") {
  auto cfg = tiny();
  cfg.warmup_steps = 300;
  const auto dir = scratch("loop");
  Trainer t(cfg, dir);
  t.run();
  CHECK(t.finished());
  CHECK(t.step() == cfg.total_steps);
  CHECK(t.updates() == cfg.total_steps - cfg.warmup_steps);
  const auto rows = read_jsonl(dir / "metrics.jsonl");
  CHECK(std::abs(static_cast<int>(rows.size()) - cfg.total_steps / cfg.log_interval) <= 1);
  CHECK(rows.size() == t.metrics().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i]["step"].get<int>() == static_cast<int>(i + 1) * cfg.log_interval);
    for (const char* k : {"episode_return", "success_rate", "alpha", "critic_loss", "actor_loss", "slt_loss"})
      CHECK(rows[i].contains(k));
  }
  CHECK(rows.front()["critic_loss"].is_null());  // still in warm-up
  CHECK(rows.back()["critic_loss"].is_number());
  CHECK(rows.back()["slt_loss"].is_number());
  CHECK(fs::exists(t.checkpoint_path()));
  CHECK(static_cast<int>(t.recent_episodes().size()) <= cfg.success_window);

  // Every trainable tensor moved.
  torch::manual_seed(cfg.seed);
  const Agent init(cfg);
  const auto a = init.trainable(), b = t.agent().trainable();
  REQUIRE(a.size() == b.size());
  int moved = 0;
  for (std::size_t i = 0; i < a.size(); ++i) moved += !torch::equal(a[i], b[i]);
  CHECK(moved == static_cast<int>(a.size()));
}

TEST_CASE("resuming reproduces the next metrics row bit for bit") {
  for (auto ablation : {Ablation::kFull, Ablation::kLstmSac}) {
    CAPTURE(ablation_name(ablation));
    const auto cfg = tiny(ablation);
    const auto base = scratch(std::string("resume_") + ablation_name(ablation));
    Trainer a(cfg, base / "a");
    a.run(300);
    a.save_snapshot(base / "snap");
    a.run(100);
    auto b = Trainer::resume(base / "snap", base / "b");
    CHECK(b->step() == 300);
    b->run(100);
    REQUIRE(a.metrics().size() == 2);
    REQUIRE(b->metrics().size() == 2);
    CHECK(a.metrics().back().dump() == b->metrics().back().dump());
    CHECK(read_jsonl(base / "b" / "metrics.jsonl").back().dump() == a.metrics().back().dump());
  }
}

TEST_CASE("evaluation") {
  const auto cfg = tiny();
  const auto dir = scratch("eval");
  Trainer t(cfg, dir);
  t.run(200);
  t.agent().save(t.checkpoint_path());

  const auto r1 = evaluate(t.checkpoint_path(), "", 3, 7);
  const auto r2 = evaluate(t.checkpoint_path(), "", 3, 7);
  CHECK(r1 == r2);
  CHECK(to_json(r1).dump() == to_json(r2).dump());
  CHECK(r1.episodes == 3);
  CHECK(r1.results.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(r1.results[i].seed == eval_seed(7, i));
  CHECK(r1.success_rate + r1.collision_rate + r1.stagnation_rate <= 100.0 + 1e-9);
  CHECK(eval_seed(7, 0) == 7 + 1000000);

  const auto other = evaluate(t.checkpoint_path(), "double_merge", 2, 7);
  CHECK(other.scenario == "double_merge");
}

TEST_CASE("evaluation summaries") {
  std::vector<EpisodeResult> all_collide;
  for (int i = 0; i < 4; ++i) all_collide.push_back({i, 0, sim::Outcome::kCollision, 10, -1.0});
  const auto r = summarize("left_turn", all_collide, 0.1);
  CHECK(r.collision_rate == 100.0);
  CHECK(r.success_rate == 0.0);
  CHECK(r.completion_time_mean == 0.0);

  std::vector<EpisodeResult> mixed{{0, 0, sim::Outcome::kSuccess, 100, 1.0},
                                   {1, 0, sim::Outcome::kSuccess, 200, 1.0},
                                   {2, 0, sim::Outcome::kTimeout, 400, 0.0},
                                   {3, 0, sim::Outcome::kOffRoute, 50, -1.0}};
  const auto m = summarize("left_turn", mixed, 0.1);
  CHECK(m.success_rate == 50.0);
  CHECK(m.stagnation_rate == 25.0);
  CHECK(m.off_route_rate == 25.0);
  CHECK(m.collision_rate == 0.0);
  CHECK(m.success_rate + m.collision_rate + m.stagnation_rate <= 100.0);
  CHECK(m.completion_time_mean == doctest::Approx(15.0));
  CHECK(m.completion_time_std == doctest::Approx(std::sqrt(50.0)));  // sample std of 10 s and 20 s
}

TEST_CASE("attention export") {
  const auto cfg = tiny();
  torch::manual_seed(1);
  Policy policy{Agent(cfg)};
  auto sc = sim::preset_scenario("double_merge");
  const auto steps = export_attention(policy, sc, 11, 60);
  REQUIRE(!steps.empty());
  auto sums_to_one = [](const std::vector<double>& w) {
    double s = 0.0;
    for (double x : w) s += x;
    return std::abs(s - 1.0) <= 1e-5;
  };
  for (const auto& st : steps) {
    const auto& lv = st["levels"];
    const auto agg = lv["aggregation"]["weights"].get<std::vector<double>>();
    CHECK(agg.size() == st["agents"].size());
    CHECK(sums_to_one(agg));
    if (lv.contains("output")) CHECK(sums_to_one(lv["output"]["weights"].get<std::vector<double>>()));
    for (const auto& row : lv["cross"]) {
      const auto w = row["weights"].get<std::vector<double>>();
      double s = 0.0;
      for (double x : w) s += x;
      CHECK((std::abs(s - 1.0) <= 1e-5 || s == 0.0));
    }
    for (const auto& m : lv["motion"]) {
      const auto last = m["weights"].get<std::vector<std::vector<double>>>().back();
      CHECK(sums_to_one(last));
    }
  }
  // Empty roads leave the ego alone with itself.
  auto empty = sim::preset_scenario("left_turn");
  empty.flow_rate = 0.0;
  for (const auto& st : export_attention(policy, empty, 2, 20)) {
    const auto agg = st["levels"]["aggregation"]["weights"].get<std::vector<double>>();
    REQUIRE(agg.size() == 1);
    CHECK(agg[0] == 1.0);
    CHECK(st["levels"]["cross"].empty());
  }

  const auto dir = scratch("attention");
  write_jsonl(dir / "attn.jsonl", steps);
  const auto back = read_jsonl(dir / "attn.jsonl");
  REQUIRE(back.size() == steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) CHECK(back[i] == steps[i]);
  for (const char* level : {"aggregation", "output", "cross", "motion"}) {
    const auto svg = attention_svg(back.back(), level);
    CHECK(svg.find("<svg") == 0);
  }
  CHECK_THROWS_AS(attention_svg(back.back(), "nope"), UsageError);

  TrainConfig lstm = tiny(Ablation::kLstmSac);
  Policy lp{Agent(lstm)};
  CHECK_THROWS_AS(export_attention(lp, sc, 1, 2), UsageError);
}

TEST_CASE("principal components") {
  SUBCASE("zero variance puts every point at the origin") {
    const auto r = pca_2d(torch::ones({10, 4}, torch::kFloat64));
    for (const auto& p : r.points) {
      CHECK(p[0] == 0.0);
      CHECK(p[1] == 0.0);
    }
    CHECK(r.explained_ratio[0] + r.explained_ratio[1] == 0.0);
  }
  SUBCASE("projection variances match the singular values") {
    torch::manual_seed(4);
    const auto x = torch::randn({200, 6}, torch::kFloat64) * torch::tensor({5.0, 3.0, 1.0, 0.5, 0.2, 0.1}, torch::kFloat64);
    const auto r = pca_2d(x);
    CHECK(r.points.size() == 200);
    const auto centered = x - x.mean(0, true);
    const auto s = torch::linalg_svdvals(centered);
    const double total = s.pow(2).sum().item<double>();
    double v0 = 0.0, v1 = 0.0;
    for (const auto& p : r.points) {
      v0 += p[0] * p[0];
      v1 += p[1] * p[1];
    }
    CHECK(v0 == doctest::Approx(std::pow(s[0].item<double>(), 2)).epsilon(1e-9));
    CHECK(v1 == doctest::Approx(std::pow(s[1].item<double>(), 2)).epsilon(1e-9));
    CHECK(r.explained_ratio[0] == doctest::Approx(std::pow(s[0].item<double>(), 2) / total).epsilon(1e-9));
    CHECK(r.explained_ratio[0] >= r.explained_ratio[1]);
    CHECK(r.explained_ratio[0] + r.explained_ratio[1] <= 1.0 + 1e-12);
  }
  SUBCASE("critic inputs of visited states") {
    torch::manual_seed(2);
    Policy policy{Agent(tiny())};
    const auto states = collect_states(policy, policy.agent().config.scenario_config(), 1, 5);
    REQUIRE(!states.empty());
    const auto r = pca_latents(policy.agent(), states);
    CHECK(r.points.size() == states.size());
    CHECK(r.q_values.size() == states.size());
    CHECK(r.explained_ratio[0] + r.explained_ratio[1] <= 1.0 + 1e-9);
  }
}

TEST_CASE("EMA smoothing") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-3, 3);
  std::vector<double> x(300);
  for (auto& v : x) v = u(rng);
  const auto m = ema(x, 0.99);
  for (std::size_t t = 0; t < x.size(); t += 13) CHECK(m[t] == doctest::Approx(ema_closed_form(x, t, 0.99)).epsilon(1e-12));
  const auto c = ema(std::vector<double>(50, 0.7), 0.99);
  for (double v : c) CHECK(v == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(ema({}, 0.99).empty());
  CHECK_THROWS_AS(ema({1.0}, 1.0), UsageError);
}

TEST_CASE("curves across seeds") {
  auto run = [](std::vector<json> vals) {
    std::vector<json> rows;
    for (std::size_t i = 0; i < vals.size(); ++i) rows.push_back({{"step", 200 * (i + 1)}, {"success_rate", vals[i]}});
    return rows;
  };
  SUBCASE("a single seed has a zero band") {
    const auto c = aggregate_runs("full", {run({0.1, 0.5, 0.9})}, "success_rate");
    CHECK(c.steps == std::vector<double>{200, 400, 600});
    for (double b : c.stderr_band) CHECK(b == 0.0);
    const auto e = ema({0.1, 0.5, 0.9}, 0.99);
    for (int i = 0; i < 3; ++i) CHECK(c.mean[i] == doctest::Approx(e[i]));
  }
  SUBCASE("mean and standard error without smoothing") {
    const auto c = aggregate_runs("x", {run({1.0, 2.0}), run({3.0, 6.0, 7.0})}, "success_rate", 0.0);
    REQUIRE(c.mean.size() == 2);
    CHECK(c.mean[0] == doctest::Approx(2.0));
    CHECK(c.stderr_band[0] == doctest::Approx(1.0));
    CHECK(c.mean[1] == doctest::Approx(4.0));
    CHECK(c.stderr_band[1] == doctest::Approx(2.0));
  }
  SUBCASE("null values carry the previous value") {
    const auto c = aggregate_runs("x", {run({nullptr, 2.0, nullptr})}, "success_rate", 0.0);
    CHECK(c.mean == std::vector<double>{0.0, 2.0, 2.0});
  }
  SUBCASE("svg output") {
    const auto svg = curves_svg({aggregate_runs("full", {run({0.1, 0.5})}, "success_rate")}, "left turn", "success");
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(svg.find("full") != std::string::npos);
  }
  CHECK_THROWS_AS(aggregate_runs("x", {}, "success_rate"), UsageError);
}
