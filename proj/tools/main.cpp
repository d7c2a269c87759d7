#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpiqn/checkpoint.hpp"
#include "dpiqn/evaluator.hpp"
#include "dpiqn/trainer.hpp"
#include "dpiqn/verify.hpp"

using namespace dpiqn;
using nlohmann::json;

namespace {

std::string default_out_root() {
  const char* root = std::getenv("DPIQN_OUT_ROOT");
  return root ? root : "runs";
}

int cmd_train(const std::string& config_path, std::string out, int64_t seed,
              const std::string& resume) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  if (!out.empty()) cfg.out_dir = out;
  if (cfg.out_dir.empty())
    cfg.out_dir = default_out_root() + "/" + hex64(cfg.config_hash()).substr(0, 12);
  if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);

  TrainResult res = run_training(cfg, resume);
  std::cout << "trained " << res.env_steps << " timesteps";
  for (size_t i = 0; i < res.grad_steps.size(); ++i)
    std::cout << (i == 0 ? ", updates " : " / ") << res.grad_steps[i];
  std::cout << ", curves in " << cfg.out_dir << ", checkpoint " << res.final_checkpoint
            << std::endl;
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& config_path, std::string out,
             int64_t seed, int episodes) {
  Checkpoint ck = Checkpoint::load(checkpoint_path);
  json extras = json::parse(ck.extras());
  DPIQN_CHECK(extras.at("kind") == "trainer", checkpoint_path, " is not a trainer checkpoint");
  ExperimentConfig stored = ExperimentConfig::from_json_text(extras.at("config").dump());

  ExperimentConfig cfg = stored;
  if (!config_path.empty()) {
    cfg = ExperimentConfig::from_file(config_path);
    for (int slot = 0; slot < stored.n_learners(); ++slot) {
      const ModelKind want = slot == 0 ? cfg.model.kind : cfg.learner_b->kind;
      const ModelKind have = slot == 0 ? stored.model.kind : stored.learner_b->kind;
      DPIQN_CHECK(want == have, "config expects ", to_string(want), " but checkpoint holds ",
                  to_string(have));
    }
    DPIQN_CHECK(cfg.scenario == stored.scenario, "config scenario ", to_string(cfg.scenario),
                " does not match checkpoint scenario ", to_string(stored.scenario));
  }

  EvaluationConfig ec;
  ec.scenario = cfg.scenario;
  ec.episodes = episodes > 0 ? episodes : cfg.eval.episodes;
  ec.seed = seed >= 0 ? static_cast<uint64_t>(seed) : cfg.seed;
  ec.opponent_mode = cfg.eval.opponent_mode;
  ec.collaborator_mode = cfg.eval.collaborator_mode;

  std::vector<ModelSpec> specs;
  std::vector<ParamSet> params;
  for (int slot = 0; slot < stored.n_learners(); ++slot) {
    specs.push_back(model_spec_from_json(extras.at("models")[slot].dump()));
    params.push_back(ck.get_params(slot == 0 ? "a/online" : "b/online"));
  }
  std::vector<std::unique_ptr<GreedyModelPolicy>> owned;
  std::vector<EvalPolicy*> policies;
  for (size_t i = 0; i < specs.size(); ++i) {
    owned.push_back(std::make_unique<GreedyModelPolicy>(specs[i], params[i]));
    policies.push_back(owned.back().get());
  }

  EvalOutput result = evaluate(ec, policies);

  if (out.empty())
    out = std::filesystem::path(checkpoint_path).parent_path().string();
  if (out.empty()) out = ".";
  std::filesystem::create_directories(out);
  const std::string csv_path = out + "/metrics.csv";
  std::string csv = metrics_csv_header() + "\n";
  for (size_t i = 0; i < result.per_learner.size(); ++i)
    csv += metrics_csv_row(cfg.config_hash(), ec, result.per_learner[i],
                           i == 0 ? "a" : "b") +
           "\n";
  csv += metrics_csv_row(cfg.config_hash(), ec, result.team, "team") + "\n";
  write_text_file(csv_path, csv);

  std::cout << "eval " << to_string(ec.scenario) << " episodes=" << ec.episodes
            << " mean_reward=" << fmt_float(result.team.mean_reward)
            << " scoring_rate=" << fmt_float(result.per_learner[0].scoring_rate)
            << " draw_rate=" << fmt_float(result.team.draw_rate) << " -> " << csv_path
            << std::endl;
  return 0;
}

int cmd_verify() {
  bool all = true;
  for (const SuiteResult& r : run_verification()) {
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.name << ": " << r.detail << std::endl;
    all = all && r.pass;
  }
  return all ? 0 : 1;
}

int cmd_dump_obs(const std::string& scenario_name, int64_t seed, const std::string& out) {
  Scenario sc;
  DPIQN_CHECK(scenario_from_string(scenario_name, &sc), "unknown scenario ", scenario_name);
  SoccerEnv env(sc);
  Rng rng(static_cast<uint64_t>(seed));
  env.reset(rng);
  std::vector<float> obs(kObsPixels);
  env.render(obs.data());
  write_pgm(out, obs.data());
  std::cout << "wrote " << out << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grid-soccer multi-agent RL lab"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, out, scenario = "one_vs_one";
  std::string resume;
  int64_t seed = -1;
  int episodes = 0;

  auto* train = app.add_subcommand("train", "run a training experiment from a config file");
  train->add_option("--config", config_path, "experiment config (JSON)")->required();
  train->add_option("--out", out, "output directory (overrides the config)");
  train->add_option("--seed", seed, "seed override");
  train->add_option("--resume", resume, "checkpoint to resume from");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint_path, "trainer checkpoint")->required();
  eval->add_option("--config", config_path, "config override for the eval section");
  eval->add_option("--out", out, "output directory for metrics.csv");
  eval->add_option("--seed", seed, "evaluation seed");
  eval->add_option("--episodes", episodes, "episode count override");

  auto* verify = app.add_subcommand("verify", "run the verification battery");

  auto* dump = app.add_subcommand("dump-obs", "write a rendered observation as PGM");
  dump->add_option("--scenario", scenario, "one_vs_one | two_vs_two_small | two_vs_two_large");
  dump->add_option("--seed", seed, "reset seed");
  dump->add_option("--out", out, "output .pgm path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, out, seed, resume);
    if (eval->parsed()) return cmd_eval(checkpoint_path, config_path, out, seed, episodes);
    if (verify->parsed()) return cmd_verify();
    if (dump->parsed()) return cmd_dump_obs(scenario, seed < 0 ? 1 : seed, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}
