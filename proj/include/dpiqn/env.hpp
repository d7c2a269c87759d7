#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dpiqn/common.hpp"

namespace dpiqn {

constexpr int kObsSize = 84;
constexpr int kObsPixels = kObsSize * kObsSize;
constexpr int kCellPixels = 32;
constexpr int kNumActions = 5;

enum class Scenario { OneVsOne, TwoVsTwoSmall, TwoVsTwoLarge };
enum class Team : uint8_t { Left, Right };
enum class Action : uint8_t { North, South, West, East, Stand };

const char* to_string(Scenario s);
const char* to_string(Action a);
bool scenario_from_string(const std::string& s, Scenario* out);

struct Cell {
  int x = 0, y = 0;
  bool operator==(const Cell& o) const { return x == o.x && y == o.y; }
  bool operator!=(const Cell& o) const { return !(*this == o); }
};

inline Cell apply_action(Cell c, Action a) {
  switch (a) {
    case Action::North: return {c.x, c.y - 1};
    case Action::South: return {c.x, c.y + 1};
    case Action::West: return {c.x - 1, c.y};
    case Action::East: return {c.x + 1, c.y};
    case Action::Stand: return c;
  }
  return c;
}

inline int manhattan(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

struct AgentId {
  Team team = Team::Left;
  int index = 0;
  bool controlled = false;
};

enum class CellClass : uint8_t { Field = 0, Border, GoalLeft, GoalRight };

struct FieldConfig {
  Scenario scenario = Scenario::OneVsOne;
  int width = 0, height = 0;
  int frame_skip = 1;
  int max_steps = 100;
  std::vector<Cell> goal_left, goal_right;
  std::vector<Cell> spawn_left, spawn_right;
  std::vector<Cell> border;
  std::vector<uint8_t> cell_class;  // width*height lookup

  bool in_bounds(Cell c) const { return c.x >= 0 && c.x < width && c.y >= 0 && c.y < height; }
  CellClass klass(Cell c) const {
    return static_cast<CellClass>(cell_class[static_cast<size_t>(c.y) * width + c.x]);
  }
  bool is_border(Cell c) const { return klass(c) == CellClass::Border; }
  bool is_goal(Cell c) const {
    CellClass k = klass(c);
    return k == CellClass::GoalLeft || k == CellClass::GoalRight;
  }
  // Cell centers, not pixel columns, decide the halves.
  bool left_half(Cell c) const { return 2 * c.x + 1 < width; }
};

FieldConfig make_field(Scenario scenario);

// Roster in fixed (team, index) order; the first `n_controlled` left-team
// agents are the learners.
std::vector<AgentId> make_roster(Scenario scenario, int n_controlled = 1);

struct EnvState {
  std::vector<Cell> positions;  // roster order
  int ball_holder = 0;
  int step_count = 0;
  bool terminal = false;
};

struct StepOutcome {
  EnvState next;
  float reward = 0.0f;  // left (controllable) team's perspective
  bool terminal = false;
  std::vector<std::pair<int, Action>> other_actions;  // roster index -> executed action
};

EnvState reset_state(const FieldConfig& cfg, const std::vector<AgentId>& roster, Rng& rng);

// Simultaneous-move resolution for one tick.
StepOutcome resolve_tick(const FieldConfig& cfg, const std::vector<AgentId>& roster,
                         const EnvState& state, const std::vector<Action>& actions);

// resolve_tick up to frame_skip times with actions held constant; reward is
// the clipped sum over ticks.
StepOutcome step(const FieldConfig& cfg, const std::vector<AgentId>& roster, const EnvState& state,
                 const std::vector<Action>& actions, int frame_skip);

// Rasterizes at 32x32 px per cell, then area-average downsamples to 84x84.
// Holds per-config scratch, reusable across calls.
class Renderer {
 public:
  explicit Renderer(const FieldConfig& cfg);
  void render(const std::vector<AgentId>& roster, const EnvState& state, float* out) const;

 private:
  struct Span {
    int begin = 0;
    std::vector<float> w;
  };
  const FieldConfig& cfg_;
  int raster_w_, raster_h_;
  std::vector<float> base_;              // static cell intensities
  mutable std::vector<float> raster_;    // raster scratch
  mutable std::vector<float> tmp_;       // separable resample scratch
  std::vector<Span> spans_x_, spans_y_;
  void fill_cell(float* raster, Cell c, float v) const;
};

// Convenience one-shot render (tests, CLI dumps).
void render(const FieldConfig& cfg, const std::vector<AgentId>& roster, const EnvState& state,
            float* out);

void write_pgm(const std::string& path, const float* pixels, int w = kObsSize, int h = kObsSize);

// Stateful wrapper used by the trainer and bindings.
class SoccerEnv {
 public:
  explicit SoccerEnv(Scenario scenario, int n_controlled = 1)
      : cfg_(make_field(scenario)), roster_(make_roster(scenario, n_controlled)), renderer_(cfg_) {}

  const FieldConfig& config() const { return cfg_; }
  const std::vector<AgentId>& roster() const { return roster_; }
  const EnvState& state() const { return state_; }
  void set_state(EnvState s) { state_ = std::move(s); }

  void reset(Rng& rng) { state_ = reset_state(cfg_, roster_, rng); }
  StepOutcome step(const std::vector<Action>& actions) {
    StepOutcome out = dpiqn::step(cfg_, roster_, state_, actions, cfg_.frame_skip);
    state_ = out.next;
    return out;
  }
  void render(float* out) const { renderer_.render(roster_, state_, out); }

 private:
  FieldConfig cfg_;
  std::vector<AgentId> roster_;
  EnvState state_;
  Renderer renderer_;
};

}  // namespace dpiqn
