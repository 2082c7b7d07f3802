// Command-line front end: training, evaluation, exports and plots.

#include <CLI11.hpp>
#include <torch/torch.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenerep/errors.hpp"
#include "scenerep/rl/hybrid_action.hpp"
#include "scenerep/sim/presets.hpp"
#include "scenerep/sim/simulator.hpp"
#include "scenerep/train/agent.hpp"
#include "scenerep/train/config.hpp"
#include "scenerep/train/evaluate.hpp"
#include "scenerep/train/plot.hpp"
#include "scenerep/train/trainer.hpp"

using namespace scenerep;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// "label=dir1,dir2" -> (label, [dir1, dir2]); a bare directory is its own label.
std::pair<std::string, std::vector<fs::path>> parse_group(const std::string& spec) {
  const auto eq = spec.find('=');
  const std::string label = eq == std::string::npos ? fs::path(spec).filename().string() : spec.substr(0, eq);
  std::string rest = eq == std::string::npos ? spec : spec.substr(eq + 1);
  std::vector<fs::path> dirs;
  std::size_t pos = 0;
  while (pos <= rest.size()) {
    const auto comma = rest.find(',', pos);
    const auto item = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!item.empty()) dirs.emplace_back(item);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (dirs.empty()) throw UsageError("empty run group '" + spec + "'");
  return {label, dirs};
}

fs::path metrics_file(const fs::path& p) { return fs::is_directory(p) ? p / "metrics.jsonl" : p; }

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  CLI::App app{"Scene representation RL for urban driving: train, evaluate, inspect"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train an agent");
  std::string config_path, ablation, out_dir = "runs/run", resume_dir, scenario_opt;
  std::uint64_t seed = 0;
  int total_steps = 0;
  double flow = -1.0;
  bool verbose = false;
  train_cmd->add_option("--config", config_path, "Training config JSON (missing keys keep defaults)");
  auto* seed_opt = train_cmd->add_option("--seed", seed, "Run seed");
  train_cmd->add_option("--ablation", ablation, "full | mst_only | no_ego_routes | no_routes | lstm_sac");
  train_cmd->add_option("--scenario", scenario_opt, "Preset name or scenario file");
  train_cmd->add_option("--flow-rate", flow, "Traffic flow per route (vehicles/hour)");
  train_cmd->add_option("--total-steps", total_steps, "Environment steps");
  train_cmd->add_option("--out", out_dir, "Output directory");
  train_cmd->add_option("--resume", resume_dir, "Continue from a snapshot directory");
  train_cmd->add_flag("-v,--verbose", verbose, "Echo metrics rows");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint with the deterministic policy");
  std::string ckpt, scenario, trace_dir, out_json;
  int episodes = 50;
  std::uint64_t eval_seed = 0;
  eval_cmd->add_option("--ckpt", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--scenario", scenario, "Preset or file; default is the training scenario");
  eval_cmd->add_option("--episodes", episodes, "Episodes");
  eval_cmd->add_option("--seed", eval_seed, "Evaluation seed");
  eval_cmd->add_option("--trace-dir", trace_dir, "Write one rollout trace per episode here");
  eval_cmd->add_option("--out", out_json, "Write the report JSON here");

  // export-attention
  auto* att_cmd = app.add_subcommand("export-attention", "Per-step attention weights of one episode");
  std::string att_out = "attention.jsonl";
  int max_steps = -1;
  std::uint64_t att_seed = 0;
  att_cmd->add_option("--ckpt", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  att_cmd->add_option("--scenario", scenario, "Preset or file; default is the training scenario");
  att_cmd->add_option("--seed", att_seed, "Episode seed");
  att_cmd->add_option("--max-steps", max_steps, "Stop after this many steps");
  att_cmd->add_option("--out", att_out, "JSON-lines output");

  // pca-latents
  auto* pca_cmd = app.add_subcommand("pca-latents", "PCA of the critics' (h, a) inputs on visited states");
  std::string pca_out = "pca.json", pca_svg;
  int pca_episodes = 5;
  std::uint64_t pca_seed = 0;
  pca_cmd->add_option("--ckpt", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  pca_cmd->add_option("--scenario", scenario, "Preset or file; default is the training scenario");
  pca_cmd->add_option("--episodes", pca_episodes, "Episodes used to collect states");
  pca_cmd->add_option("--seed", pca_seed, "Evaluation seed");
  pca_cmd->add_option("--out", pca_out, "JSON output");
  pca_cmd->add_option("--svg", pca_svg, "Also draw a scatter coloured by Q");

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "Training curves or attention heatmaps as SVG");
  std::vector<std::string> groups;
  std::string key = "success_rate", plot_out = "plot.svg", title, attention_file, level = "aggregation";
  double beta = 0.99;
  int att_step = 0;
  plot_cmd->add_option("--runs", groups, "label=dir1,dir2,... (one curve per label, band across dirs)");
  plot_cmd->add_option("--key", key, "Metrics field");
  plot_cmd->add_option("--ema", beta, "EMA smoothing weight");
  plot_cmd->add_option("--title", title, "Figure title");
  plot_cmd->add_option("--attention", attention_file, "Attention JSON-lines from export-attention");
  plot_cmd->add_option("--step", att_step, "Attention record index");
  plot_cmd->add_option("--level", level, "aggregation | output | cross | motion");
  plot_cmd->add_option("--out", plot_out, "SVG output");

  // export-scenario
  auto* scen_cmd = app.add_subcommand("export-scenario", "Write preset scenarios as JSON");
  std::string scen_dir = "scenarios";
  std::vector<std::string> scen_names;
  scen_cmd->add_option("--name", scen_names, "Presets (default: all)");
  scen_cmd->add_option("--out-dir", scen_dir, "Output directory");

  // rollout
  auto* roll_cmd = app.add_subcommand("rollout", "Rollout traces with a checkpoint or a random policy");
  std::string roll_dir = "rollout";
  int roll_episodes = 1;
  std::uint64_t roll_seed = 0;
  roll_cmd->add_option("--ckpt", ckpt, "Checkpoint file (omit for uniform random actions)");
  roll_cmd->add_option("--scenario", scenario, "Preset or file")->default_val("left_turn");
  roll_cmd->add_option("--episodes", roll_episodes, "Episodes");
  roll_cmd->add_option("--seed", roll_seed, "Seed");
  roll_cmd->add_option("--out-dir", roll_dir, "One JSON-lines trace per episode");

  // config-dump
  auto* dump_cmd = app.add_subcommand("config-dump", "Print the effective training config");
  dump_cmd->add_option("--config", config_path, "Training config JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      std::unique_ptr<train::Trainer> t;
      if (!resume_dir.empty()) {
        t = train::Trainer::resume(resume_dir, out_dir, verbose);
      } else {
        train::TrainConfig cfg = config_path.empty() ? train::TrainConfig{} : train::load_train_config(config_path);
        if (*seed_opt) cfg.seed = seed;
        if (!ablation.empty()) cfg.ablation = train::parse_ablation(ablation);
        if (!scenario_opt.empty()) cfg.scenario = scenario_opt;
        if (flow >= 0.0) cfg.flow_rate = flow;
        if (total_steps > 0) cfg.total_steps = total_steps;
        cfg.validate();
        t = std::make_unique<train::Trainer>(cfg, out_dir, verbose);
      }
      t->run();
      std::cout << "checkpoint " << t->checkpoint_path().string() << "\n";
      if (!t->metrics().empty()) std::cout << t->metrics().back().dump() << "\n";
    } else if (*eval_cmd) {
      auto policy = train::Policy::load(ckpt);
      const auto sc = train::scenario_for(policy.agent(), scenario);
      const auto report = train::evaluate(policy, sc, episodes, eval_seed,
                                          trace_dir.empty() ? std::nullopt : std::optional<fs::path>(trace_dir));
      const auto j = train::to_json(report);
      if (!out_json.empty()) write_text(out_json, j.dump(2) + "\n");
      std::cout << j.dump(2) << "\n";
    } else if (*att_cmd) {
      auto policy = train::Policy::load(ckpt);
      const auto rows = train::export_attention(policy, train::scenario_for(policy.agent(), scenario), att_seed,
                                                max_steps);
      train::write_jsonl(att_out, rows);
      std::cout << rows.size() << " steps written to " << att_out << "\n";
    } else if (*pca_cmd) {
      auto policy = train::Policy::load(ckpt);
      const auto states =
          train::collect_states(policy, train::scenario_for(policy.agent(), scenario), pca_episodes, pca_seed);
      const auto r = train::pca_latents(policy.agent(), states);
      json j{{"points", r.points}, {"q_values", r.q_values}, {"explained_ratio", r.explained_ratio}};
      write_text(pca_out, j.dump() + "\n");
      if (!pca_svg.empty()) write_text(pca_svg, train::scatter_svg(r.points, r.q_values, "PCA of (h, a)"));
      std::cout << r.points.size() << " points, explained ratio " << j["explained_ratio"].dump() << "\n";
    } else if (*plot_cmd) {
      if (!attention_file.empty()) {
        const auto rows = train::read_jsonl(attention_file);
        if (att_step < 0 || att_step >= static_cast<int>(rows.size()))
          throw UsageError("--step out of range (" + std::to_string(rows.size()) + " records)");
        write_text(plot_out, train::attention_svg(rows[static_cast<std::size_t>(att_step)], level));
      } else {
        if (groups.empty()) throw UsageError("plot needs --runs or --attention");
        std::vector<train::Curve> curves;
        for (const auto& g : groups) {
          const auto [label, dirs] = parse_group(g);
          std::vector<std::vector<json>> runs;
          for (const auto& d : dirs) runs.push_back(train::read_jsonl(metrics_file(d)));
          curves.push_back(train::aggregate_runs(label, runs, key, beta));
        }
        write_text(plot_out, train::curves_svg(curves, title.empty() ? key : title, key));
      }
      std::cout << "wrote " << plot_out << "\n";
    } else if (*scen_cmd) {
      if (scen_names.empty()) scen_names = sim::preset_names();
      fs::create_directories(scen_dir);
      for (const auto& n : scen_names) {
        const auto path = fs::path(scen_dir) / (n + ".json");
        sim::save_scenario(sim::preset_scenario(n), path.string());
        std::cout << path.string() << "\n";
      }
    } else if (*roll_cmd) {
      if (!ckpt.empty()) {
        auto policy = train::Policy::load(ckpt);
        const auto report = train::evaluate(policy, train::scenario_for(policy.agent(), scenario), roll_episodes,
                                            roll_seed, fs::path(roll_dir));
        std::cout << train::to_json(report).dump(2) << "\n";
      } else {
        const auto sc = sim::resolve_scenario(scenario);
        sim::TrafficSimulator env(sc);
        std::mt19937_64 rng(roll_seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        fs::create_directories(roll_dir);
        for (int e = 0; e < roll_episodes; ++e) {
          std::ofstream trace(fs::path(roll_dir) / ("episode_" + std::to_string(e) + ".jsonl"));
          env.reset(train::eval_seed(roll_seed, e));
          trace << env.trace_record(nullptr, 0.0).dump() << "\n";
          sim::StepResult r;
          do {
            const auto a = rl::to_env({u(rng), u(rng)}, 10.0);
            r = env.step(a);
            trace << env.trace_record(&a, r.reward).dump() << "\n";
          } while (!r.done);
          std::cout << "episode " << e << ": " << sim::outcome_name(r.info.outcome) << " after "
                    << env.episode_step() << " steps\n";
        }
      }
    } else if (*dump_cmd) {
      const auto cfg = config_path.empty() ? train::TrainConfig{} : train::load_train_config(config_path);
      std::cout << json(cfg).dump(2) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
