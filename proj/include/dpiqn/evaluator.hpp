#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dpiqn/config.hpp"
#include "dpiqn/model.hpp"

namespace dpiqn {

struct Metrics {
  int64_t episodes = 0;
  double mean_reward = 0.0;
  double scoring_rate = 0.0;       // this agent delivered the ball
  double team_scoring_rate = 0.0;  // any +1 finish for the left team
  double loss_rate = 0.0;
  double draw_rate = 0.0;
  int64_t wins = 0, losses = 0, draws = 0;
};

struct EvaluationConfig {
  Scenario scenario = Scenario::OneVsOne;
  int episodes = 2000;
  uint64_t seed = 1;
  ScheduleKind opponent_mode = ScheduleKind::FixedHybrid;
  ScheduleKind collaborator_mode = ScheduleKind::FixedHybrid;
  std::optional<Action> forced_scripted_action;  // test hook: overrides all scripted agents
};

// Action source for one controlled agent; greedy model policies and test
// stubs both implement this.
class EvalPolicy {
 public:
  virtual ~EvalPolicy() = default;
  virtual void begin_episode(const SoccerEnv& env, const float* obs) = 0;
  virtual Action act(const SoccerEnv& env, const float* obs) = 0;
};

// Exploration-free argmax-Q acting; ties break toward the lowest action index.
class GreedyModelPolicy : public EvalPolicy {
 public:
  GreedyModelPolicy(const ModelSpec& spec, const ParamSet& params);
  void begin_episode(const SoccerEnv& env, const float* obs) override;
  Action act(const SoccerEnv& env, const float* obs) override;

 private:
  Model<float> model_;
  const ParamSet& params_;
  std::vector<uint8_t> stack_;
  LstmState<float> rnn_;
  void push_frame(const float* obs);
};

struct EvalOutput {
  std::vector<Metrics> per_learner;
  Metrics team;
};

EvalOutput evaluate(const EvaluationConfig& cfg, const std::vector<EvalPolicy*>& policies);

enum class UnfamiliarSide { Opponents, Collaborator };

struct UnfamiliarOutput {
  EvalOutput metrics;
  double retention = 0.0;  // unfamiliar mean reward / familiar mean reward
};

// Re-runs an evaluation with Switching schedules on the designated side and
// reports the retention ratio against the familiar baseline.
UnfamiliarOutput unfamiliar_eval(const EvaluationConfig& familiar_cfg,
                                 const Metrics& familiar_team,
                                 const std::vector<EvalPolicy*>& policies, UnfamiliarSide side);

std::string metrics_csv_header();
std::string metrics_csv_row(uint64_t config_hash, const EvaluationConfig& cfg,
                            const Metrics& m, const std::string& agent_label);

}  // namespace dpiqn
