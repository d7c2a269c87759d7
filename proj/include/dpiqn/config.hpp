#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpiqn/model.hpp"
#include "dpiqn/scripted.hpp"

namespace dpiqn {

enum class HeadSelection { None, Both, OpponentsOnly, CollaboratorOnly };

const char* to_string(HeadSelection h);
bool head_selection_from_string(const std::string& s, HeadSelection* out);

struct ModelConfig {
  ModelKind kind = ModelKind::DQN;
  HeadSelection heads = HeadSelection::None;
  std::vector<ConvLayerCfg> convs{{32, 8, 4}, {64, 4, 2}, {64, 3, 1}};
  int embed_dim = 512;
  int branch_dim = 512;
  int lstm_hidden = 512;
};

struct TrainSection {
  int64_t total_timesteps = 2000000;
  int epoch_len = 10000;  // env timesteps per epoch
  int train_every = 4;    // one gradient step per this many env timesteps
  double lr = 0.001;
  std::vector<std::pair<int, double>> lr_drops{{600, 0.0004}, {1000, 0.0002}};
  double epsilon_start = 1.0;
  double epsilon_final = 0.1;
  int epsilon_anneal_epochs = 100;
  double gamma = 0.99;
  int64_t target_sync = 10000;
  std::string target_sync_unit = "updates";  // or "env_steps"
  int replay_capacity = 100000;
  int batch = 32;
  int history = 12;
  int seq_len = 8;
  int warmup = 5000;  // effective warmup is max(warmup, batch*history)
  int checkpoint_every_epochs = 0;  // 0: final checkpoint only
  std::string lambda_mode = "adaptive";  // or "fixed1"
  ScheduleKind opponent_mode = ScheduleKind::FixedHybrid;
  ScheduleKind collaborator_mode = ScheduleKind::FixedHybrid;
};

struct EvalSection {
  int episodes = 2000;
  ScheduleKind opponent_mode = ScheduleKind::FixedHybrid;
  ScheduleKind collaborator_mode = ScheduleKind::FixedHybrid;
};

// The experiment config file: strict key-value document with sections; every
// field optional, unknown keys rejected.
struct ExperimentConfig {
  uint64_t seed = 1;
  std::string out_dir;
  int threads = 1;
  Scenario scenario = Scenario::OneVsOne;
  ModelConfig model;
  std::optional<ModelConfig> learner_b;  // present: co-training
  TrainSection train;
  EvalSection eval;

  int n_learners() const { return learner_b ? 2 : 1; }

  // Roster indices of the agents whose policies learner `slot` models,
  // collaborators first, then opponents.
  std::vector<int> modeled_agents(int slot) const;

  ModelSpec model_spec(int slot) const;

  // Resolved document with every default materialized.
  std::string to_json() const;
  uint64_t config_hash() const;

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
};

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

// ModelSpec round-trip for checkpoint manifests.
std::string model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const std::string& text);

}  // namespace dpiqn
