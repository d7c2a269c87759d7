#include "dpiqn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "dpiqn/adam.hpp"
#include "dpiqn/checkpoint.hpp"
#include "dpiqn/env.hpp"
#include "dpiqn/gemm.hpp"
#include "dpiqn/model.hpp"
#include "dpiqn/replay.hpp"
#include "dpiqn/scripted.hpp"

namespace dpiqn {

using nlohmann::json;

double epsilon_at(int64_t env_step, const TrainSection& t) {
  DPIQN_CHECK(env_step >= 0, "negative timestep");
  const int64_t end = static_cast<int64_t>(t.epsilon_anneal_epochs) * t.epoch_len;
  if (end <= 0 || env_step >= end) return t.epsilon_final;
  return t.epsilon_start +
         (t.epsilon_final - t.epsilon_start) * static_cast<double>(env_step) / static_cast<double>(end);
}

double lr_at(int64_t epoch, const TrainSection& t) {
  DPIQN_CHECK(epoch >= 0, "negative epoch");
  double lr = t.lr;
  for (const auto& [e, v] : t.lr_drops)
    if (epoch >= e) lr = v;
  return lr;
}

namespace {

void quantize_obs(const float* src, uint8_t* dst) {
  for (int i = 0; i < kObsPixels; ++i) {
    const float v = std::clamp(src[i], 0.0f, 1.0f);
    dst[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
  }
}

struct Learner {
  int slot = 0;  // roster index (left team)
  ModelSpec spec;
  Model<float> model;
  std::vector<int> modeled;
  ParamSet params, target;
  Gradients grads;
  AdamState<float> opt;
  ReplayMemory replay;
  Rng act_rng, sample_rng;
  int64_t grad_steps = 0;

  std::vector<uint8_t> stack;  // history frames for acting, oldest first
  LstmState<float> rnn;
  int32_t cur_frame = -1;

  // epoch accumulators
  double lq_sum = 0, lpi_sum = 0, lambda_sum = 0;
  int64_t updates_in_epoch = 0;
  int episodes_in_epoch = 0;
  double first500_sum = 0;
  int first500_count = 0;

  std::vector<std::string> csv_rows;  // written incrementally

  Learner(int slot_, const ExperimentConfig& cfg)
      : slot(slot_),
        spec(cfg.model_spec(slot_)),
        model(spec),
        modeled(cfg.modeled_agents(slot_)),
        replay(cfg.train.replay_capacity) {
    params = model.init_params(derive_seed(cfg.seed, 30 + static_cast<uint64_t>(slot_)));
    target = sync_target(params);
    grads = params.zeros_like();
    opt = AdamState<float>::init(params);
    act_rng.seed(derive_seed(cfg.seed, 10 + static_cast<uint64_t>(slot_)));
    sample_rng.seed(derive_seed(cfg.seed, 20 + static_cast<uint64_t>(slot_)));
    stack.assign(static_cast<size_t>(spec.history) * kObsPixels, 0);
    rnn = model.zero_state(1);
  }

  void begin_episode(const uint8_t* first_obs) {
    for (int h = 0; h < spec.history; ++h)
      std::copy(first_obs, first_obs + kObsPixels,
                stack.begin() + static_cast<int64_t>(h) * kObsPixels);
    rnn = model.zero_state(1);
    cur_frame = replay.add_frame(first_obs);
  }

  void observe(const uint8_t* obs) {
    std::copy(stack.begin() + kObsPixels, stack.end(), stack.begin());
    std::copy(obs, obs + kObsPixels,
              stack.end() - static_cast<int64_t>(kObsPixels));
  }
};

int argmax_action(const Tensor<float>& q) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(q.dim(1)); ++j)
    if (q[j] > q[best]) best = j;
  return best;
}

Tensor<float> stack_input(const Learner& learner) {
  Tensor<float> in({1, learner.spec.history, kObsSize, kObsSize});
  constexpr float kInv = 1.0f / 255.0f;
  for (int64_t i = 0; i < in.numel(); ++i) in[i] = learner.stack[static_cast<size_t>(i)] * kInv;
  return in;
}

// The whole mutable state of a run lives here so checkpoints can capture it.
struct Runner {
  const ExperimentConfig& cfg;
  const TrainHooks* hooks;
  SoccerEnv env;
  Renderer& renderer() { return renderer_; }
  Renderer renderer_;
  ScriptedBank bank;
  Rng env_rng;
  std::vector<Learner> learners;

  int64_t env_steps = 0;
  int32_t episode_id = 0;
  int episode_tick = 0;
  double episode_reward = 0.0;
  int64_t total_epochs;

  std::vector<float> obs_f;
  std::vector<uint8_t> obs_u8;

  explicit Runner(const ExperimentConfig& c, const TrainHooks* h)
      : cfg(c),
        hooks(h),
        env(c.scenario, c.n_learners()),
        renderer_(env.config()),
        bank(env.roster(), c.train.opponent_mode, c.train.collaborator_mode),
        obs_f(kObsPixels),
        obs_u8(kObsPixels) {
    env_rng.seed(derive_seed(c.seed, 1));
    for (int s = 0; s < c.n_learners(); ++s) learners.emplace_back(s, c);
    total_epochs = std::max<int64_t>(1, c.train.total_timesteps / c.train.epoch_len);
  }

  void render_current() {
    env.render(obs_f.data());
    quantize_obs(obs_f.data(), obs_u8.data());
  }

  void start_episode() {
    env.reset(env_rng);
    bank.reset_episode(env_rng);
    episode_tick = 0;
    episode_reward = 0.0;
    render_current();
    for (auto& L : learners) L.begin_episode(obs_u8.data());
  }

  double fingerprint_epoch_norm(int64_t epoch) const {
    return std::min(1.0, static_cast<double>(epoch) / static_cast<double>(total_epochs));
  }

  Action choose_action(Learner& L, double eps, int64_t epoch) {
    const bool explore = uniform_real(L.act_rng) < eps;
    if (L.spec.recurrent()) {
      // the recurrent state advances on every frame, exploring or not
      Tensor<float> in({1, 1, kObsSize, kObsSize});
      constexpr float kInv = 1.0f / 255.0f;
      const uint8_t* cur = L.stack.data() + (static_cast<size_t>(L.spec.history) - 1) * kObsPixels;
      for (int i = 0; i < kObsPixels; ++i) in[i] = cur[i] * kInv;
      ForwardOptions opt;
      opt.need_policies = false;
      auto out = L.model.forward(L.params, in, nullptr, &L.rnn, opt, nullptr);
      L.rnn = out.state_out;
      if (explore) return static_cast<Action>(uniform_index(L.act_rng, kNumActions));
      return static_cast<Action>(argmax_action(out.q));
    }
    if (explore) return static_cast<Action>(uniform_index(L.act_rng, kNumActions));
    Tensor<float> in = stack_input(L);
    Tensor<float> extra({1, 2});
    const Tensor<float>* pe = nullptr;
    if (L.spec.fingerprint()) {
      extra[0] = static_cast<float>(eps);
      extra[1] = static_cast<float>(fingerprint_epoch_norm(epoch));
      pe = &extra;
    }
    ForwardOptions opt;
    opt.need_policies = false;
    auto out = L.model.forward(L.params, in, pe, nullptr, opt, nullptr);
    return static_cast<Action>(argmax_action(out.q));
  }

  void update(Learner& L, double lr) {
    const TrainSection& ts = cfg.train;
    const bool adaptive = ts.lambda_mode == "adaptive";
    double l_q = 0, l_pi = 0, lambda = 1.0;
    const bool heads = L.spec.has_heads();

    if (!L.spec.recurrent()) {
      StackedBatch b = L.replay.sample_stacked(ts.batch, L.spec.history, L.sample_rng);
      Tensor<float> extra, extra_next;
      const Tensor<float>* pe = nullptr;
      const Tensor<float>* pen = nullptr;
      if (L.spec.fingerprint()) {
        extra = Tensor<float>({ts.batch, 2});
        for (int i = 0; i < ts.batch; ++i) {
          extra[i * 2] = b.fp_eps[static_cast<size_t>(i)];
          extra[i * 2 + 1] = b.fp_epoch[static_cast<size_t>(i)];
        }
        extra_next = extra;
        pe = &extra;
        pen = &extra_next;
      }
      ForwardOptions topt;
      topt.need_policies = false;
      auto tout = L.model.forward(L.target, b.next_obs, pen, nullptr, topt, nullptr);
      auto y = td_targets(tout.q, b.rewards, b.terminals, ts.gamma);

      ForwardOptions oopt;
      oopt.need_policies = heads;
      oopt.need_cache = true;
      ModelCache<float> cache;
      auto out = L.model.forward(L.params, b.obs, pe, nullptr, oopt, &cache);

      l_q = q_loss_value(out.q, b.actions, y);
      std::vector<Tensor<float>> dlogits;
      if (heads) {
        l_pi = policy_inference_loss(out.policies, b.other_actions);
        lambda = adaptive ? adaptive_lambda(l_pi) : 1.0;
        dlogits = policy_loss_logit_grads(out.policies, b.other_actions, 1.0);
      }
      Tensor<float> dq = q_loss_grad(out.q, b.actions, y, lambda);
      L.grads.set_zero();
      L.model.backward(cache, L.params, dq, dlogits, L.grads);
    } else {
      SequenceBatch b = L.replay.sample_sequences(ts.batch, ts.seq_len, L.sample_rng);
      const int steps = ts.seq_len;
      ForwardOptions topt;
      topt.need_policies = false;
      auto touts = L.model.forward_sequence(L.target, b.next_obs, topt, nullptr);

      ForwardOptions oopt;
      oopt.need_policies = heads;
      oopt.need_cache = true;
      ModelSeqCache<float> cache;
      auto outs = L.model.forward_sequence(L.params, b.obs, oopt, &cache);

      double lpi_acc = 0;
      for (int t = 0; t < steps; ++t) {
        auto y = td_targets(touts[static_cast<size_t>(t)].q, b.rewards[static_cast<size_t>(t)],
                            b.terminals[static_cast<size_t>(t)], ts.gamma);
        l_q += q_loss_value(outs[static_cast<size_t>(t)].q, b.actions[static_cast<size_t>(t)], y) /
               steps;
        if (heads)
          lpi_acc += policy_inference_loss(outs[static_cast<size_t>(t)].policies,
                                           b.other_actions[static_cast<size_t>(t)]) /
                     steps;
      }
      if (heads) {
        l_pi = lpi_acc;
        lambda = adaptive ? adaptive_lambda(l_pi) : 1.0;
      }

      std::vector<Tensor<float>> dq_seq;
      std::vector<std::vector<Tensor<float>>> dl_seq;
      for (int t = 0; t < steps; ++t) {
        auto y = td_targets(touts[static_cast<size_t>(t)].q, b.rewards[static_cast<size_t>(t)],
                            b.terminals[static_cast<size_t>(t)], ts.gamma);
        dq_seq.push_back(q_loss_grad(outs[static_cast<size_t>(t)].q,
                                     b.actions[static_cast<size_t>(t)], y, lambda / steps));
        if (heads)
          dl_seq.push_back(policy_loss_logit_grads(outs[static_cast<size_t>(t)].policies,
                                                   b.other_actions[static_cast<size_t>(t)],
                                                   1.0 / steps));
      }
      L.grads.set_zero();
      L.model.backward_sequence(cache, L.params, dq_seq, dl_seq, L.grads);
    }

    adam_step(L.params, L.grads, L.opt, lr);
    ++L.grad_steps;

    L.lq_sum += l_q;
    L.lpi_sum += l_pi;
    L.lambda_sum += lambda;
    ++L.updates_in_epoch;

    if (hooks && hooks->losses && L.slot == 0)
      hooks->losses->push_back(make_breakdown(l_q, l_pi, lambda));

    if (cfg.train.target_sync_unit == "updates" && L.grad_steps % cfg.train.target_sync == 0) {
      L.target = sync_target(L.params);
      if (hooks && hooks->syncs && L.slot == 0) hooks->syncs->push_back(L.grad_steps);
    }
  }

  std::string epoch_row(Learner& L, int64_t epoch_done) {
    std::ostringstream os;
    const double mean_r =
        L.first500_count > 0 ? L.first500_sum / L.first500_count : 0.0;
    const double mlq = L.updates_in_epoch > 0 ? L.lq_sum / L.updates_in_epoch : 0.0;
    const double mlam = L.updates_in_epoch > 0 ? L.lambda_sum / L.updates_in_epoch : 1.0;
    os << (epoch_done + 1) << "," << env_steps << "," << fmt_float(mean_r) << ","
       << fmt_float(mlq) << ",";
    if (L.spec.has_heads())
      os << fmt_float(L.updates_in_epoch > 0 ? L.lpi_sum / L.updates_in_epoch : 0.0);
    os << "," << fmt_float(mlam) << "," << fmt_float(epsilon_at(env_steps, cfg.train)) << ","
       << fmt_float(lr_at(epoch_done, cfg.train));
    return os.str();
  }

  void reset_epoch_accumulators() {
    for (auto& L : learners) {
      L.lq_sum = L.lpi_sum = L.lambda_sum = 0;
      L.updates_in_epoch = 0;
      L.episodes_in_epoch = 0;
      L.first500_sum = 0;
      L.first500_count = 0;
    }
  }

  // ---- checkpointing ----

  json learner_extras(const Learner& L) const {
    json j;
    j["grad_steps"] = L.grad_steps;
    j["adam_step"] = L.opt.step;
    j["act_rng"] = rng_to_string(L.act_rng);
    j["sample_rng"] = rng_to_string(L.sample_rng);
    j["episodes_in_epoch"] = L.episodes_in_epoch;
    j["first500_sum"] = L.first500_sum;
    j["first500_count"] = L.first500_count;
    j["lq_sum"] = L.lq_sum;
    j["lpi_sum"] = L.lpi_sum;
    j["lambda_sum"] = L.lambda_sum;
    j["updates_in_epoch"] = L.updates_in_epoch;
    j["csv_rows"] = L.csv_rows.size();
    return j;
  }

  void save_learner_tensors(Checkpoint& ck, const Learner& L, const std::string& prefix) const {
    ck.put_params(prefix + "/online", L.params);
    ck.put_params(prefix + "/target", L.target);
    ck.put_params(prefix + "/adam_m", L.opt.m);
    ck.put_params(prefix + "/adam_v", L.opt.v);
    ck.put_u8(prefix + "/stack", {L.spec.history, kObsSize, kObsSize}, L.stack);
    ck.put_f32(prefix + "/rnn_h", L.rnn.h);
    ck.put_f32(prefix + "/rnn_c", L.rnn.c);

    // live replay contents, frames renumbered compactly in first-use order
    const ReplayMemory& mem = L.replay;
    const int n = mem.size();
    std::vector<int32_t> frame_ref(static_cast<size_t>(n)), next_ref(static_cast<size_t>(n)),
        episode(static_cast<size_t>(n));
    std::vector<uint8_t> action(static_cast<size_t>(n)), terminal(static_cast<size_t>(n)),
        others(static_cast<size_t>(n) * kMaxModeledAgents);
    std::vector<float> reward(static_cast<size_t>(n)), fp(static_cast<size_t>(n) * 2);
    std::map<int32_t, int32_t> remap;
    std::vector<uint8_t> frame_data;
    auto map_frame = [&](int32_t id) {
      auto it = remap.find(id);
      if (it != remap.end()) return it->second;
      const int32_t nid = static_cast<int32_t>(remap.size());
      remap[id] = nid;
      const uint8_t* f = mem.frame(id);
      frame_data.insert(frame_data.end(), f, f + kObsPixels);
      return nid;
    };
    for (int i = 0; i < n; ++i) {
      const Transition& t = mem.at_abs(mem.oldest_abs() + i);
      frame_ref[static_cast<size_t>(i)] = map_frame(t.frame_ref);
      next_ref[static_cast<size_t>(i)] = map_frame(t.next_frame_ref);
      action[static_cast<size_t>(i)] = t.action;
      terminal[static_cast<size_t>(i)] = t.terminal ? 1 : 0;
      episode[static_cast<size_t>(i)] = t.episode_id;
      reward[static_cast<size_t>(i)] = t.reward;
      fp[static_cast<size_t>(i) * 2] = t.fp_eps;
      fp[static_cast<size_t>(i) * 2 + 1] = t.fp_epoch;
      for (int k = 0; k < kMaxModeledAgents; ++k)
        others[static_cast<size_t>(i) * kMaxModeledAgents + k] =
            t.other_actions[static_cast<size_t>(k)];
    }
    ck.put_i32(prefix + "/replay_frame_ref", frame_ref);
    ck.put_i32(prefix + "/replay_next_ref", next_ref);
    ck.put_i32(prefix + "/replay_episode", episode);
    ck.put_u8(prefix + "/replay_action", {n}, action);
    ck.put_u8(prefix + "/replay_terminal", {n}, terminal);
    ck.put_u8(prefix + "/replay_others", {n, kMaxModeledAgents}, others);
    Tensor<float> rew_t({std::max(n, 1)});
    for (int i = 0; i < n; ++i) rew_t[i] = reward[static_cast<size_t>(i)];
    ck.put_f32(prefix + "/replay_reward", rew_t);
    Tensor<float> fp_t({std::max(n, 1), 2});
    for (int i = 0; i < n; ++i) {
      fp_t[i * 2] = fp[static_cast<size_t>(i) * 2];
      fp_t[i * 2 + 1] = fp[static_cast<size_t>(i) * 2 + 1];
    }
    ck.put_f32(prefix + "/replay_fp", fp_t);
    const int f_count = static_cast<int>(remap.size());
    ck.put_u8(prefix + "/replay_frames", {std::max(f_count, 1), kObsPixels},
              frame_data.empty() ? std::vector<uint8_t>(kObsPixels, 0) : frame_data);
    ck.put_u8(prefix + "/cur_frame", {kObsSize, kObsSize},
              std::vector<uint8_t>(mem.frame(L.cur_frame), mem.frame(L.cur_frame) + kObsPixels));
  }

  void write_checkpoint(const std::string& path) const {
    Checkpoint ck;
    json extras;
    extras["kind"] = "trainer";
    extras["config_hash"] = hex64(cfg.config_hash());
    extras["config"] = json::parse(cfg.to_json());
    extras["env_steps"] = env_steps;
    extras["episode_id"] = episode_id;
    extras["episode_tick"] = episode_tick;
    extras["episode_reward"] = episode_reward;
    extras["env_rng"] = rng_to_string(env_rng);

    json envj;
    json pos = json::array();
    for (const Cell& c : env.state().positions) pos.push_back({c.x, c.y});
    envj["positions"] = pos;
    envj["holder"] = env.state().ball_holder;
    envj["step_count"] = env.state().step_count;
    envj["terminal"] = env.state().terminal;
    extras["env"] = envj;

    json bankj = json::array();
    for (const ModeSchedule& s : bank.schedules())
      bankj.push_back({static_cast<int>(s.kind), static_cast<int>(s.mode), s.next_switch_at});
    extras["bank"] = bankj;

    json ls = json::array();
    for (const auto& L : learners) ls.push_back(learner_extras(L));
    extras["learners"] = ls;

    // model manifest for reload validation
    json models = json::array();
    for (const auto& L : learners) models.push_back(json::parse(model_spec_to_json(L.spec)));
    extras["models"] = models;

    ck.set_extras(extras.dump());
    for (size_t i = 0; i < learners.size(); ++i)
      save_learner_tensors(ck, learners[i], i == 0 ? "a" : "b");
    ck.save(path);
  }

  void restore_learner(Learner& L, const Checkpoint& ck, const std::string& prefix,
                       const json& extras) {
    L.params = ck.get_params(prefix + "/online");
    L.target = ck.get_params(prefix + "/target");
    L.opt.m = ck.get_params(prefix + "/adam_m");
    L.opt.v = ck.get_params(prefix + "/adam_v");
    L.opt.step = extras.at("adam_step").get<int64_t>();
    L.grad_steps = extras.at("grad_steps").get<int64_t>();
    L.act_rng = rng_from_string(extras.at("act_rng").get<std::string>());
    L.sample_rng = rng_from_string(extras.at("sample_rng").get<std::string>());
    L.episodes_in_epoch = extras.at("episodes_in_epoch").get<int>();
    L.first500_sum = extras.at("first500_sum").get<double>();
    L.first500_count = extras.at("first500_count").get<int>();
    L.lq_sum = extras.at("lq_sum").get<double>();
    L.lpi_sum = extras.at("lpi_sum").get<double>();
    L.lambda_sum = extras.at("lambda_sum").get<double>();
    L.updates_in_epoch = extras.at("updates_in_epoch").get<int64_t>();

    const auto& stack = ck.get(prefix + "/stack");
    L.stack.assign(stack.data.begin(), stack.data.end());
    L.rnn.h = ck.get_f32(prefix + "/rnn_h");
    L.rnn.c = ck.get_f32(prefix + "/rnn_c");

    // rebuild the replay ring; compact frame ids match insertion order
    L.replay = ReplayMemory(cfg.train.replay_capacity);
    const auto& frames = ck.get(prefix + "/replay_frames");
    const auto frame_ref = ck.get_i32(prefix + "/replay_frame_ref");
    const auto next_ref = ck.get_i32(prefix + "/replay_next_ref");
    const auto episode = ck.get_i32(prefix + "/replay_episode");
    const auto& action = ck.get(prefix + "/replay_action");
    const auto& terminal = ck.get(prefix + "/replay_terminal");
    const auto& others = ck.get(prefix + "/replay_others");
    const auto reward = ck.get_f32(prefix + "/replay_reward");
    const auto fp = ck.get_f32(prefix + "/replay_fp");
    const size_t n = frame_ref.size();
    int32_t added = 0;
    auto ensure_frames = [&](int32_t up_to) {
      while (added <= up_to) {
        L.replay.add_frame(frames.data.data() + static_cast<size_t>(added) * kObsPixels);
        ++added;
      }
    };
    for (size_t i = 0; i < n; ++i) {
      ensure_frames(std::max(frame_ref[i], next_ref[i]));
      Transition t;
      t.frame_ref = frame_ref[i];
      t.next_frame_ref = next_ref[i];
      t.action = action.data[i];
      t.terminal = terminal.data[i] != 0;
      t.episode_id = episode[i];
      t.reward = reward[static_cast<int64_t>(i)];
      t.fp_eps = fp[static_cast<int64_t>(i) * 2];
      t.fp_epoch = fp[static_cast<int64_t>(i) * 2 + 1];
      t.n_other = static_cast<uint8_t>(L.modeled.size());
      for (int k = 0; k < kMaxModeledAgents; ++k)
        t.other_actions[static_cast<size_t>(k)] = others.data[i * kMaxModeledAgents + k];
      L.replay.push(t);
    }
    const auto& cur = ck.get(prefix + "/cur_frame");
    L.cur_frame = L.replay.add_frame(cur.data.data());
  }

  void restore(const std::string& path) {
    Checkpoint ck = Checkpoint::load(path);
    json extras = json::parse(ck.extras());
    DPIQN_CHECK(extras.at("kind") == "trainer", path, " is not a trainer checkpoint");
    DPIQN_CHECK(extras.at("config_hash") == hex64(cfg.config_hash()),
                "checkpoint was produced by a different resolved config; cannot resume");
    env_steps = extras.at("env_steps").get<int64_t>();
    episode_id = extras.at("episode_id").get<int32_t>();
    episode_tick = extras.at("episode_tick").get<int>();
    episode_reward = extras.at("episode_reward").get<double>();
    env_rng = rng_from_string(extras.at("env_rng").get<std::string>());

    EnvState st;
    const json& envj = extras.at("env");
    for (const auto& p : envj.at("positions"))
      st.positions.push_back({p[0].get<int>(), p[1].get<int>()});
    st.ball_holder = envj.at("holder").get<int>();
    st.step_count = envj.at("step_count").get<int>();
    st.terminal = envj.at("terminal").get<bool>();
    env.set_state(st);

    auto& schedules = bank.schedules();
    const json& bankj = extras.at("bank");
    DPIQN_CHECK(bankj.size() == schedules.size(), "scripted roster changed; cannot resume");
    for (size_t i = 0; i < schedules.size(); ++i) {
      schedules[i].kind = static_cast<ScheduleKind>(bankj[i][0].get<int>());
      schedules[i].mode = static_cast<Mode>(bankj[i][1].get<int>());
      schedules[i].next_switch_at = bankj[i][2].get<int>();
    }

    const json& ls = extras.at("learners");
    DPIQN_CHECK(ls.size() == learners.size(), "learner count mismatch; cannot resume");
    for (size_t i = 0; i < learners.size(); ++i)
      restore_learner(learners[i], ck, i == 0 ? "a" : "b", ls[i]);
  }
};

std::string curve_path(const ExperimentConfig& cfg, int slot) {
  if (cfg.n_learners() == 1) return cfg.out_dir + "/curve.csv";
  return cfg.out_dir + (slot == 0 ? "/curve_a.csv" : "/curve_b.csv");
}

constexpr const char* kCurveHeader =
    "epoch,env_steps,mean_reward_first500,mean_L_Q,mean_L_PI,mean_lambda,epsilon,lr";

void flush_curve(const ExperimentConfig& cfg, const Learner& L) {
  std::ofstream f(curve_path(cfg, L.slot), std::ios::binary | std::ios::trunc);
  f << kCurveHeader << "\n";
  for (const auto& row : L.csv_rows) f << row << "\n";
}

}  // namespace

TrainResult run_training(const ExperimentConfig& cfg, const std::string& resume_from,
                         const TrainHooks* hooks) {
  DPIQN_CHECK(!cfg.out_dir.empty(), "config needs an out_dir");
  std::filesystem::create_directories(cfg.out_dir);
  set_blas_threads(cfg.threads);
  write_text_file(cfg.out_dir + "/config.json", cfg.to_json() + "\n");

  Runner run(cfg, hooks);
  const TrainSection& ts = cfg.train;

  if (!resume_from.empty()) {
    run.restore(resume_from);
    // keep only the rows the checkpoint knows about
    json extras = json::parse(Checkpoint::load(resume_from).extras());
    const json& ls = extras.at("learners");
    for (size_t i = 0; i < run.learners.size(); ++i) {
      const size_t keep = ls[i].at("csv_rows").get<size_t>();
      std::string text = read_text_file(curve_path(cfg, static_cast<int>(i)));
      std::istringstream is(text);
      std::string line;
      std::getline(is, line);  // header
      auto& rows = run.learners[i].csv_rows;
      rows.clear();
      while (std::getline(is, line) && rows.size() < keep) rows.push_back(line);
      DPIQN_CHECK(rows.size() == keep, "curve file shorter than the checkpoint expects");
    }
  } else {
    run.start_episode();
  }

  const int warmup_ff = std::max(ts.warmup, ts.batch * ts.history);
  const int warmup_rec = std::max(ts.warmup, ts.batch * ts.seq_len);

  std::vector<Action> actions(run.env.roster().size(), Action::Stand);
  while (run.env_steps < ts.total_timesteps) {
    const double eps = epsilon_at(run.env_steps, ts);
    const int64_t epoch = run.env_steps / ts.epoch_len;

    run.bank.act(run.env.config(), run.env.roster(), run.env.state(), run.episode_tick,
                 run.env_rng, actions);
    for (auto& L : run.learners)
      actions[static_cast<size_t>(L.slot)] = run.choose_action(L, eps, epoch);

    StepOutcome out = run.env.step(actions);
    ++run.env_steps;
    ++run.episode_tick;
    run.episode_reward += out.reward;

    run.render_current();
    const float r = std::clamp(out.reward, -1.0f, 1.0f);
    for (auto& L : run.learners) {
      const int32_t next_ref = L.replay.add_frame(run.obs_u8.data());
      Transition t;
      t.frame_ref = L.cur_frame;
      t.next_frame_ref = next_ref;
      t.action = static_cast<uint8_t>(actions[static_cast<size_t>(L.slot)]);
      t.n_other = static_cast<uint8_t>(L.modeled.size());
      for (size_t k = 0; k < L.modeled.size(); ++k)
        t.other_actions[k] = static_cast<uint8_t>(actions[static_cast<size_t>(L.modeled[k])]);
      t.reward = r;
      t.terminal = out.terminal;
      t.episode_id = run.episode_id;
      t.fp_eps = static_cast<float>(eps);
      t.fp_epoch = static_cast<float>(run.fingerprint_epoch_norm(epoch));
      L.replay.push(t);
      L.cur_frame = next_ref;
      L.observe(run.obs_u8.data());
    }

    if (out.terminal) {
      for (auto& L : run.learners) {
        ++L.episodes_in_epoch;
        if (L.episodes_in_epoch <= 500) {
          L.first500_sum += run.episode_reward;
          ++L.first500_count;
        }
      }
      ++run.episode_id;
      run.start_episode();
    }

    if (run.env_steps % ts.train_every == 0) {
      const double lr = lr_at(epoch, ts);
      for (auto& L : run.learners) {
        const int warmup = L.spec.recurrent() ? warmup_rec : warmup_ff;
        if (L.replay.size() >= warmup) run.update(L, lr);
      }
    }
    if (ts.target_sync_unit == "env_steps" && run.env_steps % ts.target_sync == 0) {
      for (auto& L : run.learners) {
        L.target = sync_target(L.params);
        if (hooks && hooks->syncs && L.slot == 0) hooks->syncs->push_back(L.grad_steps);
      }
    }

    if (run.env_steps % ts.epoch_len == 0) {
      for (auto& L : run.learners) {
        L.csv_rows.push_back(run.epoch_row(L, epoch));
        flush_curve(cfg, L);
      }
      run.reset_epoch_accumulators();
      const int64_t done = run.env_steps / ts.epoch_len;
      if (ts.checkpoint_every_epochs > 0 && done % ts.checkpoint_every_epochs == 0 &&
          run.env_steps < ts.total_timesteps) {
        char name[64];
        std::snprintf(name, sizeof(name), "/ckpt_epoch%04lld.bin",
                      static_cast<long long>(done));
        run.write_checkpoint(cfg.out_dir + name);
      }
    }
  }

  const std::string final_path = cfg.out_dir + "/ckpt_final.bin";
  run.write_checkpoint(final_path);

  TrainResult result;
  result.final_checkpoint = final_path;
  result.env_steps = run.env_steps;
  for (auto& L : run.learners) {
    flush_curve(cfg, L);
    result.curve_files.push_back(curve_path(cfg, L.slot));
    result.grad_steps.push_back(L.grad_steps);
    result.episodes.push_back(run.episode_id);
  }
  return result;
}

}  // namespace dpiqn
