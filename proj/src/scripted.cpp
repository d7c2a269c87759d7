#include "dpiqn/scripted.hpp"

#include <algorithm>
#include <array>
#include <limits>

namespace dpiqn {

const char* to_string(Mode m) { return m == Mode::Offensive ? "offensive" : "defensive"; }

const char* to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::FixedHybrid: return "hybrid";
    case ScheduleKind::FixedOffensive: return "offensive";
    case ScheduleKind::FixedDefensive: return "defensive";
    case ScheduleKind::Switching: return "switching";
  }
  return "?";
}

bool schedule_kind_from_string(const std::string& s, ScheduleKind* out) {
  if (s == "hybrid") *out = ScheduleKind::FixedHybrid;
  else if (s == "offensive") *out = ScheduleKind::FixedOffensive;
  else if (s == "defensive") *out = ScheduleKind::FixedDefensive;
  else if (s == "switching") *out = ScheduleKind::Switching;
  else return false;
  return true;
}

namespace {
int draw_period(Rng& rng) {
  return kSwitchPeriodMin + uniform_index(rng, kSwitchPeriodMax - kSwitchPeriodMin + 1);
}
}  // namespace

ModeSchedule init_schedule(ScheduleKind kind, Rng& rng) {
  ModeSchedule s;
  s.kind = kind;
  switch (kind) {
    case ScheduleKind::FixedOffensive: s.mode = Mode::Offensive; break;
    case ScheduleKind::FixedDefensive: s.mode = Mode::Defensive; break;
    case ScheduleKind::FixedHybrid:
      s.mode = uniform_index(rng, 2) == 0 ? Mode::Offensive : Mode::Defensive;
      break;
    case ScheduleKind::Switching:
      s.mode = uniform_index(rng, 2) == 0 ? Mode::Offensive : Mode::Defensive;
      s.next_switch_at = draw_period(rng);
      break;
  }
  return s;
}

std::pair<Mode, ModeSchedule> advance_schedule(ModeSchedule schedule, int tick, Rng& rng) {
  if (schedule.kind == ScheduleKind::Switching && tick == schedule.next_switch_at) {
    schedule.mode = schedule.mode == Mode::Offensive ? Mode::Defensive : Mode::Offensive;
    schedule.next_switch_at = tick + draw_period(rng);
  }
  return {schedule.mode, schedule};
}

namespace {

struct RuleCtx {
  const FieldConfig& cfg;
  const std::vector<AgentId>& roster;
  const EnvState& state;
  int me;

  Cell pos(int i) const { return state.positions[static_cast<size_t>(i)]; }
  Team my_team() const { return roster[static_cast<size_t>(me)].team; }

  // A target cell an agent may sensibly intend: in bounds, not border, and
  // not another agent's cell — except the ball holder's cell, which is a
  // legitimate steal/pass intent.
  bool enterable(Cell c) const {
    if (!cfg.in_bounds(c) || cfg.is_border(c)) return false;
    for (size_t j = 0; j < roster.size(); ++j) {
      if (static_cast<int>(j) == me) continue;
      if (pos(static_cast<int>(j)) == c)
        return static_cast<int>(j) == state.ball_holder;
    }
    return true;
  }
};

int set_distance(Cell c, const std::vector<Cell>& targets) {
  int best = std::numeric_limits<int>::max();
  for (Cell t : targets) best = std::min(best, manhattan(c, t));
  return best;
}

Cell nearest_of(Cell from, const std::vector<Cell>& targets) {
  Cell best = targets.front();
  int bd = manhattan(from, best);
  for (Cell t : targets) {
    int d = manhattan(from, t);
    if (d < bd || (d == bd && (t.y < best.y || (t.y == best.y && t.x < best.x)))) {
      best = t;
      bd = d;
    }
  }
  return best;
}

constexpr std::array<Action, 4> kFallbackOrder = {Action::North, Action::South, Action::West,
                                                  Action::East};

// Move that shrinks the distance to the target set: the axis move toward the
// nearest target first, then any strictly progressing move in N,S,W,E order,
// then an equal-distance sidestep. The leading axis alternates with the tick
// parity; two deterministic agents chasing each other would otherwise mirror
// into permanent intent collisions under simultaneous resolution.
//
// A ball carrier additionally treats cells next to an opposing agent as lost
// ground (an adjacent opponent takes the ball on intent) and would rather
// give ground, or stand and concede the steal, than step into coverage.
Action approach(const RuleCtx& ctx, const std::vector<Cell>& targets, bool protect_ball = false) {
  const Cell me = ctx.pos(ctx.me);
  const int d0 = set_distance(me, targets);
  if (d0 == 0) return Action::Stand;
  const Cell goal = nearest_of(me, targets);

  auto risky = [&](Cell c) {
    if (!protect_ball) return false;
    if (ctx.cfg.is_goal(c)) return false;  // entering a goal ends the episode
    for (size_t j = 0; j < ctx.roster.size(); ++j) {
      if (static_cast<int>(j) == ctx.me) continue;
      if (ctx.roster[j].team != ctx.my_team() &&
          manhattan(ctx.pos(static_cast<int>(j)), c) <= 1)
        return true;
    }
    return false;
  };
  auto usable = [&](Action a) {
    Cell c = apply_action(me, a);
    return ctx.enterable(c) && !risky(c);
  };
  auto dist_after = [&](Action a) { return set_distance(apply_action(me, a), targets); };

  Action horiz = Action::Stand, vert = Action::Stand;
  if (goal.x != me.x) horiz = goal.x > me.x ? Action::East : Action::West;
  if (goal.y != me.y) vert = goal.y > me.y ? Action::South : Action::North;
  const bool horizontal_first = ctx.state.step_count % 2 == 0;
  const std::array<Action, 2> preferred =
      horizontal_first ? std::array<Action, 2>{horiz, vert} : std::array<Action, 2>{vert, horiz};

  for (Action a : preferred)
    if (a != Action::Stand && usable(a) && dist_after(a) < d0) return a;
  for (Action a : kFallbackOrder)
    if (usable(a) && dist_after(a) < d0) return a;
  for (Action a : kFallbackOrder)
    if (usable(a) && dist_after(a) == d0) return a;
  if (protect_ball) {
    // cornered: prefer the least-losing covered-free move over walking into
    // coverage, and stand (conceding a possible steal) over both
    Action best = Action::Stand;
    int best_d = std::numeric_limits<int>::max();
    for (Action a : kFallbackOrder) {
      if (!usable(a)) continue;
      const int d = dist_after(a);
      if (d < best_d) {
        best = a;
        best_d = d;
      }
    }
    return best;
  }
  return Action::Stand;
}

Action approach(const RuleCtx& ctx, Cell target, bool protect_ball = false) {
  return approach(ctx, std::vector<Cell>{target}, protect_ball);
}

// Defensive ball carrier: maximize distance to the nearest opposing agent;
// Stand wins ties. Never retreats into a goal.
Action retreat(const RuleCtx& ctx) {
  const Cell me = ctx.pos(ctx.me);
  std::vector<Cell> threats;
  for (size_t j = 0; j < ctx.roster.size(); ++j)
    if (ctx.roster[j].team != ctx.my_team()) threats.push_back(ctx.pos(static_cast<int>(j)));

  Action best = Action::Stand;
  int best_d = set_distance(me, threats);
  for (Action a : kFallbackOrder) {
    Cell c = apply_action(me, a);
    if (!ctx.enterable(c) || ctx.cfg.is_goal(c)) continue;
    int d = set_distance(c, threats);
    if (d > best_d) {
      best = a;
      best_d = d;
    }
  }
  return best;
}

// Cell in front of the goal's central rows, shifted to the holder's side.
Cell interpose_target(const FieldConfig& cfg, Team own, Cell holder) {
  const std::vector<Cell>& goal = own == Team::Left ? cfg.goal_left : cfg.goal_right;
  const int front_x = own == Team::Left ? 1 : cfg.width - 2;
  const int g0 = goal.front().y, g1 = goal.back().y;
  const int mid_low = g0 + (g1 - g0) / 2;
  const int mid_high = std::min(mid_low + 1, g1);
  return {front_x, holder.y <= mid_low ? mid_low : mid_high};
}

}  // namespace

Action rule_action(const FieldConfig& cfg, const std::vector<AgentId>& roster,
                   const EnvState& state, int agent, Mode mode) {
  DPIQN_CHECK(!state.terminal, "rule_action on a terminal state");
  RuleCtx ctx{cfg, roster, state, agent};
  const Team team = roster[static_cast<size_t>(agent)].team;
  const int holder = state.ball_holder;
  const Team holder_team = roster[static_cast<size_t>(holder)].team;

  if (holder == agent) {
    if (mode == Mode::Offensive) {
      const auto& targets = team == Team::Left ? cfg.goal_right : cfg.goal_left;
      return approach(ctx, targets, /*protect_ball=*/true);
    }
    return retreat(ctx);
  }

  if (holder_team == team) {
    // Obstruct the opponent nearest the ball carrier: head for the cell next
    // to it on the line toward the carrier.
    const Cell hc = ctx.pos(holder);
    int opp = -1;
    int bd = std::numeric_limits<int>::max();
    for (size_t j = 0; j < roster.size(); ++j) {
      if (roster[j].team == team) continue;
      int d = manhattan(ctx.pos(static_cast<int>(j)), hc);
      if (d < bd) {
        bd = d;
        opp = static_cast<int>(j);
      }
    }
    const Cell oc = ctx.pos(opp);
    const int dx = hc.x - oc.x, dy = hc.y - oc.y;
    Cell target = oc;
    if (std::abs(dx) >= std::abs(dy) && dx != 0) target.x += dx > 0 ? 1 : -1;
    else if (dy != 0) target.y += dy > 0 ? 1 : -1;
    return approach(ctx, target);
  }

  if (mode == Mode::Offensive) return approach(ctx, ctx.pos(holder));
  // Defensive without the ball: tackle a carrier that comes close, otherwise
  // hold the cell in front of the goal on the carrier's side.
  if (manhattan(ctx.pos(agent), ctx.pos(holder)) <= kTackleRadius)
    return approach(ctx, ctx.pos(holder));
  return approach(ctx, interpose_target(cfg, team, ctx.pos(holder)));
}

ScriptedBank::ScriptedBank(const std::vector<AgentId>& roster, ScheduleKind opponent_kind,
                           ScheduleKind collaborator_kind) {
  for (size_t i = 0; i < roster.size(); ++i) {
    if (roster[i].controlled) continue;
    agents_.push_back(static_cast<int>(i));
    kinds_.push_back(roster[i].team == Team::Right ? opponent_kind : collaborator_kind);
  }
  schedules_.resize(agents_.size());
}

void ScriptedBank::reset_episode(Rng& rng) {
  for (size_t k = 0; k < agents_.size(); ++k) schedules_[k] = init_schedule(kinds_[k], rng);
}

void ScriptedBank::act(const FieldConfig& cfg, const std::vector<AgentId>& roster,
                       const EnvState& state, int tick, Rng& rng, std::vector<Action>& actions) {
  for (size_t k = 0; k < agents_.size(); ++k) {
    auto [mode, next] = advance_schedule(schedules_[k], tick, rng);
    schedules_[k] = next;
    actions[static_cast<size_t>(agents_[k])] = rule_action(cfg, roster, state, agents_[k], mode);
  }
}

}  // namespace dpiqn
