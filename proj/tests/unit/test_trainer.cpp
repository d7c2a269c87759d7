#include <doctest.h>

#include <filesystem>

#include "dpiqn/trainer.hpp"

using namespace dpiqn;

namespace {

std::string tiny_config(const std::string& out_dir, const std::string& kind, int64_t steps,
                        int epoch_len, const std::string& extra_train = "",
                        const std::string& extra_top = "") {
  std::string s = R"({
    "seed": 11,
    "out_dir": ")" + out_dir + R"(",
    "model": {"kind": ")" + kind + R"(", "conv": [[4,8,4],[4,4,2]],
              "embed_dim": 24, "branch_dim": 16, "lstm_hidden": 12},
    "train": {"total_timesteps": )" + std::to_string(steps) +
              R"(, "epoch_len": )" + std::to_string(epoch_len) + R"(,
              "replay_capacity": 3000, "batch": 8, "history": 4, "seq_len": 4,
              "warmup": 64, "target_sync": 25)" + extra_train + "}" + extra_top + "}";
  return s;
}

std::string slurp(const std::string& path) { return read_text_file(path); }

}  // namespace

TEST_CASE("epsilon schedule hits the table anchors") {
  TrainSection t;  // defaults: 1.0 -> 0.1 by epoch 100 of 10k steps
  CHECK(epsilon_at(0, t) == 1.0);
  CHECK(epsilon_at(1000000, t) == doctest::Approx(0.1));
  CHECK(epsilon_at(500000, t) == doctest::Approx(0.55));
  CHECK(epsilon_at(2000000, t) == doctest::Approx(0.1));
}

TEST_CASE("learning rate steps at the configured epochs") {
  TrainSection t;
  CHECK(lr_at(0, t) == 0.001);
  CHECK(lr_at(599, t) == 0.001);
  CHECK(lr_at(600, t) == 0.0004);
  CHECK(lr_at(999, t) == 0.0004);
  CHECK(lr_at(1000, t) == 0.0002);
  CHECK(lr_at(5000, t) == 0.0002);
}

TEST_CASE("dqn run: one curve row per epoch, empty policy-loss column, lambda 1") {
  const std::string dir = "test_runs/dqn_tiny";
  std::filesystem::remove_all(dir);
  ExperimentConfig cfg = ExperimentConfig::from_json_text(tiny_config(dir, "dqn", 400, 200));
  TrainResult res = run_training(cfg);
  CHECK(res.env_steps == 400);

  const std::string text = slurp(res.curve_files[0]);
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  CHECK(line ==
        "epoch,env_steps,mean_reward_first500,mean_L_Q,mean_L_PI,mean_lambda,epsilon,lr");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    // mean_L_PI sits between the 4th and 5th commas and must be empty
    size_t p = 0;
    for (int c = 0; c < 4; ++c) p = line.find(',', p) + 1;
    CHECK(line[p] == ',');
    // lambda column reads 1
    std::istringstream cells(line);
    std::string cell;
    for (int c = 0; c <= 5; ++c) std::getline(cells, cell, ',');
    CHECK(cell == "1");
  }
  CHECK(rows == 2);
}

TEST_CASE("identical config and seed reproduce byte-identical curves") {
  const std::string d1 = "test_runs/det_a", d2 = "test_runs/det_b";
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
  ExperimentConfig c1 = ExperimentConfig::from_json_text(tiny_config(d1, "dpiqn", 400, 200));
  ExperimentConfig c2 = ExperimentConfig::from_json_text(tiny_config(d2, "dpiqn", 400, 200));
  run_training(c1);
  run_training(c2);
  CHECK(slurp(d1 + "/curve.csv") == slurp(d2 + "/curve.csv"));
}

TEST_CASE("step accounting: a full epoch contributes epoch_len/train_every updates") {
  const std::string d1 = "test_runs/acct_a", d2 = "test_runs/acct_b";
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
  ExperimentConfig one = ExperimentConfig::from_json_text(tiny_config(d1, "dqn", 200, 200));
  ExperimentConfig two = ExperimentConfig::from_json_text(tiny_config(d2, "dqn", 400, 200));
  TrainResult r1 = run_training(one);
  TrainResult r2 = run_training(two);
  CHECK(r2.grad_steps[0] - r1.grad_steps[0] == 200 / 4);
}

TEST_CASE("lambda is non-decreasing whenever the policy loss decreases") {
  const std::string dir = "test_runs/lambda_dyn";
  std::filesystem::remove_all(dir);
  ExperimentConfig cfg = ExperimentConfig::from_json_text(tiny_config(dir, "dpiqn", 600, 200));
  std::vector<LossBreakdown> losses;
  TrainHooks hooks;
  hooks.losses = &losses;
  run_training(cfg, "", &hooks);
  CHECK(losses.size() > 50);
  for (size_t i = 1; i < losses.size(); ++i) {
    if (losses[i].l_pi < losses[i - 1].l_pi) CHECK(losses[i].lambda >= losses[i - 1].lambda);
    CHECK(std::isfinite(losses[i].total));
    CHECK(losses[i].lambda == doctest::Approx(adaptive_lambda(losses[i].l_pi)));
  }
}

TEST_CASE("target network is never staler than the sync period") {
  const std::string dir = "test_runs/sync";
  std::filesystem::remove_all(dir);
  ExperimentConfig cfg = ExperimentConfig::from_json_text(tiny_config(dir, "dqn", 600, 200));
  std::vector<int64_t> syncs;
  TrainHooks hooks;
  hooks.syncs = &syncs;
  run_training(cfg, "", &hooks);
  CHECK(!syncs.empty());
  int64_t prev = 0;
  for (int64_t s : syncs) {
    CHECK(s - prev <= cfg.train.target_sync);
    prev = s;
  }
}

TEST_CASE("resumed run reproduces the uninterrupted curve byte-for-byte") {
  const std::string full_dir = "test_runs/resume_full";
  const std::string part_dir = "test_runs/resume_part";
  std::filesystem::remove_all(full_dir);
  std::filesystem::remove_all(part_dir);

  ExperimentConfig full = ExperimentConfig::from_json_text(
      tiny_config(full_dir, "dpiqn", 800, 200, ", \"checkpoint_every_epochs\": 2"));
  run_training(full);

  ExperimentConfig part = ExperimentConfig::from_json_text(
      tiny_config(part_dir, "dpiqn", 800, 200, ", \"checkpoint_every_epochs\": 2"));
  run_training(part);
  const std::string ckpt = part_dir + "/ckpt_epoch0002.bin";
  REQUIRE(std::filesystem::exists(ckpt));

  // resume from the mid-run checkpoint: rows 3..4 must regenerate identically
  TrainResult resumed = run_training(part, ckpt);
  CHECK(slurp(part_dir + "/curve.csv") == slurp(full_dir + "/curve.csv"));
  CHECK(resumed.env_steps == 800);
}

TEST_CASE("recurrent kinds train through the sequence path") {
  for (const char* kind : {"drqn", "drpiqn"}) {
    const std::string dir = std::string("test_runs/rec_") + kind;
    std::filesystem::remove_all(dir);
    ExperimentConfig cfg = ExperimentConfig::from_json_text(tiny_config(dir, kind, 300, 100));
    TrainResult res = run_training(cfg);
    CHECK(res.grad_steps[0] > 0);
    CHECK(std::filesystem::exists(res.final_checkpoint));
  }
}

TEST_CASE("fpdqn trains with fingerprint inputs") {
  const std::string dir = "test_runs/fpdqn";
  std::filesystem::remove_all(dir);
  ExperimentConfig cfg = ExperimentConfig::from_json_text(tiny_config(dir, "fpdqn", 300, 100));
  TrainResult res = run_training(cfg);
  CHECK(res.grad_steps[0] > 0);
}

TEST_CASE("co-training: two learners, own replays, teammate actions as labels") {
  const std::string dir = "test_runs/cotrain";
  std::filesystem::remove_all(dir);
  std::string cfg_text = R"({
    "seed": 3, "out_dir": ")" + dir + R"(", "scenario": "two_vs_two_small",
    "model": {"kind": "dpiqn", "heads": "c_only", "conv": [[4,8,4],[4,4,2]],
              "embed_dim": 24, "branch_dim": 16},
    "learner_b": {"kind": "dqn", "conv": [[4,8,4],[4,4,2]], "embed_dim": 24, "branch_dim": 16},
    "train": {"total_timesteps": 400, "epoch_len": 200, "replay_capacity": 2000,
              "batch": 8, "history": 4, "warmup": 64, "target_sync": 50}})";
  ExperimentConfig cfg = ExperimentConfig::from_json_text(cfg_text);
  CHECK(cfg.modeled_agents(0) == std::vector<int>{1});  // models the DQN teammate
  CHECK(cfg.modeled_agents(1).empty());

  TrainResult res = run_training(cfg);
  CHECK(res.curve_files.size() == 2);
  CHECK(std::filesystem::exists(dir + "/curve_a.csv"));
  CHECK(std::filesystem::exists(dir + "/curve_b.csv"));
  CHECK(res.grad_steps[0] > 0);
  CHECK(res.grad_steps[1] > 0);
}

TEST_CASE("resolved config is echoed into the run directory") {
  const std::string dir = "test_runs/echo";
  std::filesystem::remove_all(dir);
  ExperimentConfig cfg = ExperimentConfig::from_json_text(tiny_config(dir, "dqn", 200, 100));
  run_training(cfg);
  const std::string echoed = slurp(dir + "/config.json");
  ExperimentConfig back = ExperimentConfig::from_json_text(echoed);
  CHECK(back.config_hash() == cfg.config_hash());
}
