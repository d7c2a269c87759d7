#include "dpiqn/verify.hpp"

#include <cmath>
#include <sstream>

#include "dpiqn/gradcheck.hpp"
#include "dpiqn/losses.hpp"
#include "dpiqn/model.hpp"
#include "dpiqn/replay.hpp"

namespace dpiqn {

StepOutcome brute_force_tick(const FieldConfig& cfg, const std::vector<AgentId>& roster,
                             const EnvState& state, const std::vector<Action>& actions) {
  DPIQN_CHECK(!state.terminal, "brute_force_tick on a terminal state");
  const int n = static_cast<int>(roster.size());

  auto target_of = [&](int k) {
    Cell c = state.positions[static_cast<size_t>(k)];
    switch (actions[static_cast<size_t>(k)]) {
      case Action::North: c.y -= 1; break;
      case Action::South: c.y += 1; break;
      case Action::West: c.x -= 1; break;
      case Action::East: c.x += 1; break;
      case Action::Stand: break;
    }
    return c;
  };

  auto listed = [](const std::vector<Cell>& cells, Cell c) {
    for (Cell e : cells)
      if (e.x == c.x && e.y == c.y) return true;
    return false;
  };

  StepOutcome out;
  out.next.positions.resize(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    const Cell cand = target_of(k);
    bool legal = cand.x >= 0 && cand.x < cfg.width && cand.y >= 0 && cand.y < cfg.height;
    if (legal && listed(cfg.border, cand)) legal = false;
    if (legal) {
      for (int j = 0; j < n && legal; ++j) {
        if (j == k) continue;
        if (cand == state.positions[static_cast<size_t>(j)]) legal = false;
        if (cand == target_of(j)) legal = false;
      }
    }
    out.next.positions[static_cast<size_t>(k)] =
        legal ? cand : state.positions[static_cast<size_t>(k)];
  }

  int holder = state.ball_holder;
  for (int k = 0; k < n; ++k) {
    if (k == holder) continue;
    if (target_of(k) == state.positions[static_cast<size_t>(holder)]) {
      holder = k;
      break;
    }
  }
  out.next.ball_holder = holder;
  out.next.step_count = state.step_count + 1;

  const Cell ball = out.next.positions[static_cast<size_t>(holder)];
  if (listed(cfg.goal_right, ball)) {
    out.reward = 1.0f;
    out.next.terminal = true;
  } else if (listed(cfg.goal_left, ball)) {
    out.reward = -1.0f;
    out.next.terminal = true;
  } else if (out.next.step_count >= cfg.max_steps) {
    out.next.terminal = true;
  }
  out.terminal = out.next.terminal;
  for (int k = 0; k < n; ++k)
    if (!roster[static_cast<size_t>(k)].controlled)
      out.other_actions.emplace_back(k, actions[static_cast<size_t>(k)]);
  return out;
}

EnvState random_state(const FieldConfig& cfg, const std::vector<AgentId>& roster, Rng& rng) {
  EnvState st;
  st.positions.resize(roster.size());
  for (size_t i = 0; i < roster.size(); ++i) {
    for (;;) {
      Cell c{uniform_index(rng, cfg.width), uniform_index(rng, cfg.height)};
      if (cfg.is_border(c)) continue;
      bool taken = false;
      for (size_t j = 0; j < i; ++j)
        if (st.positions[j] == c) taken = true;
      if (!taken) {
        st.positions[i] = c;
        break;
      }
    }
  }
  st.ball_holder = uniform_index(rng, static_cast<int>(roster.size()));
  st.step_count = uniform_index(rng, cfg.max_steps - 1);
  st.terminal = false;
  return st;
}

namespace {

std::string fmt_suite(bool pass, double worst, const std::string& extra = "") {
  std::ostringstream os;
  os << (pass ? "ok" : "FAILED") << " (max rel err " << worst << ")";
  if (!extra.empty()) os << " " << extra;
  return os.str();
}

// Tiny but complete assemblies for finite-difference checks.
ModelSpec fragment_spec(ModelKind kind, int heads) {
  ModelSpec s;
  s.kind = kind;
  s.n_heads = heads;
  s.input_h = 20;
  s.input_w = 20;
  s.history = s.recurrent() ? 1 : 4;
  s.convs = {{4, 5, 2}, {6, 3, 1}};
  s.embed_dim = 24;
  s.branch_dim = 16;
  s.lstm_hidden = 12;
  return s;
}

// Joint loss lambda*L^Q + L^PI evaluated at fixed targets; exercises the
// full assembled backward path including the lambda routing.
double fragment_check(ModelKind kind, int heads, double* worst, std::string* worst_name) {
  const ModelSpec spec = fragment_spec(kind, heads);
  Model<double> model(spec);
  NamedTensors<double> params = model.init_params(99);
  Rng rng(4242);

  const int batch = 2;
  const double lambda = 0.7, inv = 1.0;
  std::vector<uint8_t> taken = {1, 3};
  std::vector<double> y = {0.4, -0.2};
  std::vector<std::vector<uint8_t>> mu(static_cast<size_t>(heads),
                                       std::vector<uint8_t>{2, 0});

  Tensor<double> extra({batch, 2});
  for (int64_t i = 0; i < extra.numel(); ++i) extra[i] = uniform_real(rng);

  const int steps = spec.recurrent() ? 3 : 1;
  std::vector<Tensor<double>> obs_seq;
  for (int t = 0; t < steps; ++t) {
    Tensor<double> obs({batch, spec.in_channels(), spec.input_h, spec.input_w});
    for (int64_t i = 0; i < obs.numel(); ++i) obs[i] = uniform_real(rng);
    obs_seq.push_back(std::move(obs));
  }

  ForwardOptions opt;
  opt.need_policies = spec.has_heads();

  auto loss = [&]() {
    double l_q = 0, l_pi = 0;
    if (spec.recurrent()) {
      auto outs = model.forward_sequence(params, obs_seq, opt, nullptr);
      for (const auto& o : outs) {
        l_q += q_loss_value(o.q, taken, y) / steps;
        if (spec.has_heads()) l_pi += policy_inference_loss(o.policies, mu) / steps;
      }
    } else {
      auto o = model.forward(params, obs_seq[0], spec.fingerprint() ? &extra : nullptr, nullptr,
                             opt, nullptr);
      l_q = q_loss_value(o.q, taken, y);
      if (spec.has_heads()) l_pi = policy_inference_loss(o.policies, mu);
    }
    return lambda * l_q + l_pi * inv;
  };

  NamedTensors<double> grads = params.zeros_like();
  if (spec.recurrent()) {
    ModelSeqCache<double> cache;
    auto outs = model.forward_sequence(params, obs_seq, opt, &cache);
    std::vector<Tensor<double>> dq_seq;
    std::vector<std::vector<Tensor<double>>> dl_seq;
    for (const auto& o : outs) {
      dq_seq.push_back(q_loss_grad(o.q, taken, y, lambda / steps));
      if (spec.has_heads())
        dl_seq.push_back(policy_loss_logit_grads(o.policies, mu, 1.0 / steps));
    }
    model.backward_sequence(cache, params, dq_seq, dl_seq, grads);
  } else {
    ModelCache<double> cache;
    opt.need_cache = true;
    auto o = model.forward(params, obs_seq[0], spec.fingerprint() ? &extra : nullptr, nullptr, opt,
                           &cache);
    Tensor<double> dq = q_loss_grad(o.q, taken, y, lambda);
    std::vector<Tensor<double>> dl;
    if (spec.has_heads()) dl = policy_loss_logit_grads(o.policies, mu, 1.0);
    model.backward(cache, params, dq, dl, grads);
  }

  auto report = grad_check(params, loss, grads);
  if (report.worst > *worst) {
    *worst = report.worst;
    *worst_name = std::string(to_string(kind)) + "/" + report.worst_name;
  }
  return report.worst;
}

}  // namespace

SuiteResult verify_gradients(double tolerance) {
  double worst = 0.0;
  std::string worst_name = "none";

  fragment_check(ModelKind::DQN, 0, &worst, &worst_name);
  fragment_check(ModelKind::FPDQN, 0, &worst, &worst_name);
  fragment_check(ModelKind::DPIQN, 2, &worst, &worst_name);
  fragment_check(ModelKind::DRQN, 0, &worst, &worst_name);
  fragment_check(ModelKind::DRPIQN, 1, &worst, &worst_name);

  SuiteResult r;
  r.name = "gradient_checks";
  r.pass = worst <= tolerance;
  r.detail = fmt_suite(r.pass, worst, "worst at " + worst_name);
  return r;
}

SuiteResult verify_loss_identities() {
  SuiteResult r;
  r.name = "loss_identities";
  double worst = 0.0;
  Rng rng(515151);

  // one-hot reduction: H(mu)+KL(mu||pi) == -log pi(a_o)
  for (int it = 0; it < 1000; ++it) {
    Tensor<double> logits({1, 5});
    for (int j = 0; j < 5; ++j) logits[j] = 4.0 * (2.0 * uniform_real(rng) - 1.0);
    Tensor<double> pi = softmax_forward(logits);
    const uint8_t a = static_cast<uint8_t>(uniform_index(rng, 5));

    // direct evaluation of the entropy + divergence form
    double h_mu = 0.0, kl = 0.0;
    for (int j = 0; j < 5; ++j) {
      const double mu = j == a ? 1.0 : 0.0;
      if (mu > 0.0) {
        h_mu += -mu * std::log(mu);
        kl += mu * std::log(mu / pi[j]);
      }
    }
    const double direct = h_mu + kl;
    const double impl = policy_inference_loss(std::vector<Tensor<double>>{pi},
                                              {std::vector<uint8_t>{a}});
    worst = std::max(worst, std::fabs(direct - impl));
  }
  bool pass = worst <= 1e-9;

  // lambda anchors and the clamp
  pass = pass && adaptive_lambda(1.0) == 1.0;
  pass = pass && adaptive_lambda(0.25) == 2.0;
  pass = pass && std::isfinite(adaptive_lambda(0.0)) && adaptive_lambda(0.0) == kLambdaMax;
  pass = pass && std::isfinite(total_loss(0.5, 0.0, adaptive_lambda(0.0)));

  // uniform head and the two-head aggregate
  Tensor<double> uniform({1, 5}, 0.2);
  const double lnu = policy_inference_loss(std::vector<Tensor<double>>{uniform},
                                           {std::vector<uint8_t>{3}});
  pass = pass && std::fabs(lnu - std::log(5.0)) <= 1e-12;

  Tensor<double> perfect({1, 5}, 0.0);
  perfect[2] = 1.0;
  const std::vector<Tensor<double>> two_heads{perfect, uniform};
  const std::vector<std::vector<uint8_t>> two_mu{{2}, {0}};
  const double agg = policy_inference_loss(two_heads, two_mu);
  const double hand = (0.0 + std::log(5.0)) / 2.0;
  pass = pass && std::fabs(agg - hand) <= 1e-12;

  r.pass = pass;
  r.detail = fmt_suite(pass, worst);
  return r;
}

SuiteResult verify_env_oracle(int n_states, uint64_t seed) {
  SuiteResult r;
  r.name = "env_oracle_equivalence";
  const FieldConfig cfg = make_field(Scenario::OneVsOne);
  const auto roster = make_roster(Scenario::OneVsOne);
  Rng rng(seed);
  int mismatches = 0;
  for (int it = 0; it < n_states; ++it) {
    EnvState st = random_state(cfg, roster, rng);
    for (int a0 = 0; a0 < kNumActions; ++a0) {
      for (int a1 = 0; a1 < kNumActions; ++a1) {
        std::vector<Action> acts{static_cast<Action>(a0), static_cast<Action>(a1)};
        StepOutcome sim = resolve_tick(cfg, roster, st, acts);
        StepOutcome ref = brute_force_tick(cfg, roster, st, acts);
        bool same = sim.reward == ref.reward && sim.terminal == ref.terminal &&
                    sim.next.ball_holder == ref.next.ball_holder &&
                    sim.next.step_count == ref.next.step_count &&
                    sim.next.positions == ref.next.positions;
        if (!same) ++mismatches;
      }
    }
  }
  r.pass = mismatches == 0;
  std::ostringstream os;
  os << (r.pass ? "ok" : "FAILED") << " (" << n_states << " states x 25 joint actions, "
     << mismatches << " mismatches)";
  r.detail = os.str();
  return r;
}

SuiteResult verify_env_properties(int n_episodes, uint64_t seed) {
  SuiteResult r;
  r.name = "env_properties";
  const FieldConfig cfg = make_field(Scenario::OneVsOne);
  const auto roster = make_roster(Scenario::OneVsOne);
  Rng rng(seed);
  std::string failure;

  for (int ep = 0; ep < n_episodes && failure.empty(); ++ep) {
    EnvState st = reset_state(cfg, roster, rng);
    int ticks = 0;
    float last_reward = 0.0f;
    while (!st.terminal) {
      std::vector<Action> acts;
      for (size_t i = 0; i < roster.size(); ++i)
        acts.push_back(static_cast<Action>(uniform_index(rng, kNumActions)));
      StepOutcome out = resolve_tick(cfg, roster, st, acts);
      st = out.next;
      last_reward = out.reward;
      ++ticks;

      if (st.ball_holder < 0 || st.ball_holder >= static_cast<int>(roster.size())) {
        failure = "ball holder out of range";
        break;
      }
      for (size_t i = 0; i < roster.size() && failure.empty(); ++i) {
        Cell c = st.positions[i];
        if (!cfg.in_bounds(c) || cfg.is_border(c)) failure = "agent on an illegal cell";
        for (size_t j = i + 1; j < roster.size(); ++j)
          if (st.positions[i] == st.positions[j]) failure = "agents overlap";
      }
      if (ticks > cfg.max_steps) failure = "episode exceeded max_steps";
      if (!(last_reward == 0.0f || last_reward == 1.0f || last_reward == -1.0f))
        failure = "reward outside {-1,0,1}";
    }
    if (failure.empty() && st.step_count > cfg.max_steps) failure = "terminal after max_steps";
  }

  r.pass = failure.empty();
  r.detail = r.pass ? "ok (" + std::to_string(n_episodes) + " random-action episodes)"
                    : "FAILED: " + failure;
  return r;
}

SuiteResult verify_replay_uniformity(uint64_t seed) {
  SuiteResult r;
  r.name = "replay_uniformity";
  const int entries = 1000;
  const int64_t draws = 100000;

  ReplayMemory mem(entries);
  std::vector<uint8_t> frame(kObsPixels, 0);
  int prev = mem.add_frame(frame.data());
  for (int i = 0; i < entries; ++i) {
    int next = mem.add_frame(frame.data());
    Transition t;
    t.frame_ref = prev;
    t.next_frame_ref = next;
    t.action = static_cast<uint8_t>(i % kNumActions);
    t.reward = 0.0f;
    t.terminal = false;
    t.episode_id = 0;
    mem.push(t);
    prev = next;
  }

  Rng rng(seed);
  std::vector<int64_t> counts(static_cast<size_t>(entries), 0);
  for (int64_t d = 0; d < draws; ++d) {
    StackedBatch b = mem.sample_stacked(1, 1, rng);
    ++counts[static_cast<size_t>(b.anchors[0] - mem.oldest_abs())];
  }

  // chi-square statistic within 3 sigma of its expectation
  const double expect = static_cast<double>(draws) / entries;
  double chi2 = 0.0;
  for (int64_t c : counts) {
    const double diff = static_cast<double>(c) - expect;
    chi2 += diff * diff / expect;
  }
  const double df = entries - 1;
  const double bound = df + 3.0 * std::sqrt(2.0 * df);
  r.pass = chi2 <= bound;
  std::ostringstream os;
  os << (r.pass ? "ok" : "FAILED") << " (chi2 " << chi2 << " vs bound " << bound << ")";
  r.detail = os.str();
  return r;
}

std::vector<SuiteResult> run_verification() {
  return {verify_gradients(), verify_loss_identities(), verify_env_oracle(),
          verify_env_properties(), verify_replay_uniformity()};
}

}  // namespace dpiqn
