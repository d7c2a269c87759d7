#include "dpiqn/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dpiqn/scripted.hpp"

namespace dpiqn {

namespace {
void quantize(const float* src, uint8_t* dst) {
  for (int i = 0; i < kObsPixels; ++i)
    dst[i] = static_cast<uint8_t>(std::lround(std::clamp(src[i], 0.0f, 1.0f) * 255.0f));
}
}  // namespace

GreedyModelPolicy::GreedyModelPolicy(const ModelSpec& spec, const ParamSet& params)
    : model_(spec), params_(params) {
  stack_.assign(static_cast<size_t>(spec.history) * kObsPixels, 0);
  rnn_ = model_.zero_state(1);
}

void GreedyModelPolicy::push_frame(const float* obs) {
  std::copy(stack_.begin() + kObsPixels, stack_.end(), stack_.begin());
  quantize(obs, stack_.data() + stack_.size() - kObsPixels);
}

void GreedyModelPolicy::begin_episode(const SoccerEnv&, const float* obs) {
  std::vector<uint8_t> first(kObsPixels);
  quantize(obs, first.data());
  for (int h = 0; h < model_.spec().history; ++h)
    std::copy(first.begin(), first.end(), stack_.begin() + static_cast<int64_t>(h) * kObsPixels);
  rnn_ = model_.zero_state(1);
}

Action GreedyModelPolicy::act(const SoccerEnv&, const float* obs) {
  push_frame(obs);
  const ModelSpec& spec = model_.spec();
  Tensor<float> in({1, spec.in_channels(), kObsSize, kObsSize});
  constexpr float kInv = 1.0f / 255.0f;
  if (spec.recurrent()) {
    const uint8_t* cur = stack_.data() + stack_.size() - kObsPixels;
    for (int i = 0; i < kObsPixels; ++i) in[i] = cur[i] * kInv;
  } else {
    for (int64_t i = 0; i < in.numel(); ++i) in[i] = stack_[static_cast<size_t>(i)] * kInv;
  }
  Tensor<float> extra({1, 2});
  const Tensor<float>* pe = nullptr;
  if (spec.fingerprint()) {
    extra[0] = 0.0f;  // greedy testing: no exploration, fully trained
    extra[1] = 1.0f;
    pe = &extra;
  }
  ForwardOptions opt;
  opt.need_policies = false;  // testing only evaluates the Q path
  auto out = model_.forward(params_, in, pe, spec.recurrent() ? &rnn_ : nullptr, opt, nullptr);
  if (spec.recurrent()) rnn_ = out.state_out;
  int best = 0;
  for (int j = 1; j < static_cast<int>(out.q.dim(1)); ++j)
    if (out.q[j] > out.q[best]) best = j;
  return static_cast<Action>(best);
}

EvalOutput evaluate(const EvaluationConfig& cfg, const std::vector<EvalPolicy*>& policies) {
  DPIQN_CHECK(!policies.empty(), "evaluate needs at least one policy");
  const int n_learners = static_cast<int>(policies.size());
  SoccerEnv env(cfg.scenario, n_learners);
  ScriptedBank bank(env.roster(), cfg.opponent_mode, cfg.collaborator_mode);

  std::vector<float> obs(kObsPixels);
  std::vector<Action> actions(env.roster().size(), Action::Stand);

  EvalOutput out;
  out.per_learner.resize(static_cast<size_t>(n_learners));
  std::vector<int64_t> scored(static_cast<size_t>(n_learners), 0);
  int64_t wins = 0, losses = 0, draws = 0;
  double reward_sum = 0.0;

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    Rng rng(derive_seed(cfg.seed, static_cast<uint64_t>(ep)));
    env.reset(rng);
    bank.reset_episode(rng);
    env.render(obs.data());
    for (auto* p : policies) p->begin_episode(env, obs.data());

    int tick = 0;
    StepOutcome step;
    for (;;) {
      if (cfg.forced_scripted_action) {
        for (int idx : bank.agent_indices())
          actions[static_cast<size_t>(idx)] = *cfg.forced_scripted_action;
      } else {
        bank.act(env.config(), env.roster(), env.state(), tick, rng, actions);
      }
      for (int s = 0; s < n_learners; ++s)
        actions[static_cast<size_t>(s)] = policies[static_cast<size_t>(s)]->act(env, obs.data());

      step = env.step(actions);
      ++tick;
      if (step.terminal) break;
      env.render(obs.data());
    }

    reward_sum += step.reward;
    if (step.reward > 0) {
      ++wins;
      const int holder = step.next.ball_holder;
      if (holder < n_learners) ++scored[static_cast<size_t>(holder)];
    } else if (step.reward < 0) {
      ++losses;
    } else {
      ++draws;
    }
  }

  auto finish = [&](Metrics& m, int64_t own_scored) {
    m.episodes = cfg.episodes;
    m.wins = wins;
    m.losses = losses;
    m.draws = draws;
    m.mean_reward = reward_sum / cfg.episodes;
    m.scoring_rate = static_cast<double>(own_scored) / cfg.episodes;
    m.team_scoring_rate = static_cast<double>(wins) / cfg.episodes;
    m.loss_rate = static_cast<double>(losses) / cfg.episodes;
    m.draw_rate = static_cast<double>(draws) / cfg.episodes;
  };
  for (int s = 0; s < n_learners; ++s)
    finish(out.per_learner[static_cast<size_t>(s)], scored[static_cast<size_t>(s)]);
  finish(out.team, wins);  // team row: scoring_rate covers the whole team
  out.team.scoring_rate = out.team.team_scoring_rate;
  return out;
}

UnfamiliarOutput unfamiliar_eval(const EvaluationConfig& familiar_cfg,
                                 const Metrics& familiar_team,
                                 const std::vector<EvalPolicy*>& policies, UnfamiliarSide side) {
  EvaluationConfig cfg = familiar_cfg;
  if (side == UnfamiliarSide::Opponents) cfg.opponent_mode = ScheduleKind::Switching;
  else cfg.collaborator_mode = ScheduleKind::Switching;

  UnfamiliarOutput out;
  out.metrics = evaluate(cfg, policies);
  out.retention = out.metrics.team.mean_reward / familiar_team.mean_reward;
  return out;
}

std::string metrics_csv_header() {
  return "config_hash,scenario,opponent_mode,collaborator_mode,episodes,mean_reward,"
         "scoring_rate,draw_rate,seed,team_scoring_rate,loss_rate,agent";
}

std::string metrics_csv_row(uint64_t config_hash, const EvaluationConfig& cfg, const Metrics& m,
                            const std::string& agent_label) {
  std::ostringstream os;
  os << hex64(config_hash) << "," << to_string(cfg.scenario) << ","
     << to_string(cfg.opponent_mode) << "," << to_string(cfg.collaborator_mode) << ","
     << m.episodes << "," << fmt_float(m.mean_reward) << "," << fmt_float(m.scoring_rate) << ","
     << fmt_float(m.draw_rate) << "," << cfg.seed << "," << fmt_float(m.team_scoring_rate) << ","
     << fmt_float(m.loss_rate) << "," << agent_label;
  return os.str();
}

}  // namespace dpiqn
