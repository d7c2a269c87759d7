#pragma once

#include <utility>
#include <vector>

#include "dpiqn/env.hpp"

namespace dpiqn {

enum class Mode : uint8_t { Offensive, Defensive };
enum class ScheduleKind : uint8_t { FixedHybrid, FixedOffensive, FixedDefensive, Switching };

const char* to_string(Mode m);
const char* to_string(ScheduleKind k);
bool schedule_kind_from_string(const std::string& s, ScheduleKind* out);

struct ModeSchedule {
  ScheduleKind kind = ScheduleKind::FixedHybrid;
  Mode mode = Mode::Offensive;
  int next_switch_at = -1;  // decision tick of the next flip (Switching only)
};

constexpr int kSwitchPeriodMin = 4;
constexpr int kSwitchPeriodMax = 10;
constexpr int kTackleRadius = 2;  // defensive agents engage carriers this close

// Draws per-episode state: hybrid kinds sample the episode's mode, the
// switching kind also samples its first flip tick.
ModeSchedule init_schedule(ScheduleKind kind, Rng& rng);

// Mode effective at `tick` plus the updated schedule. Fixed kinds are
// unchanged; Switching flips the mode at next_switch_at and draws a fresh
// period uniform in [4,10].
std::pair<Mode, ModeSchedule> advance_schedule(ModeSchedule schedule, int tick, Rng& rng);

// Deterministic rule policy for a scripted agent.
Action rule_action(const FieldConfig& cfg, const std::vector<AgentId>& roster,
                   const EnvState& state, int agent, Mode mode);

// Per-episode bundle of schedules for every scripted agent.
class ScriptedBank {
 public:
  ScriptedBank(const std::vector<AgentId>& roster, ScheduleKind opponent_kind,
               ScheduleKind collaborator_kind);

  void reset_episode(Rng& rng);
  // Fills actions for scripted agents only; leaves other entries untouched.
  void act(const FieldConfig& cfg, const std::vector<AgentId>& roster, const EnvState& state,
           int tick, Rng& rng, std::vector<Action>& actions);

  const std::vector<ModeSchedule>& schedules() const { return schedules_; }
  std::vector<ModeSchedule>& schedules() { return schedules_; }
  const std::vector<int>& agent_indices() const { return agents_; }

 private:
  std::vector<int> agents_;  // roster indices of scripted agents
  std::vector<ScheduleKind> kinds_;
  std::vector<ModeSchedule> schedules_;
};

}  // namespace dpiqn
