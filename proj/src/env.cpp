#include "dpiqn/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace dpiqn {

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::OneVsOne: return "one_vs_one";
    case Scenario::TwoVsTwoSmall: return "two_vs_two_small";
    case Scenario::TwoVsTwoLarge: return "two_vs_two_large";
  }
  return "?";
}

const char* to_string(Action a) {
  switch (a) {
    case Action::North: return "N";
    case Action::South: return "S";
    case Action::West: return "W";
    case Action::East: return "E";
    case Action::Stand: return "stand";
  }
  return "?";
}

bool scenario_from_string(const std::string& s, Scenario* out) {
  if (s == "one_vs_one") *out = Scenario::OneVsOne;
  else if (s == "two_vs_two_small") *out = Scenario::TwoVsTwoSmall;
  else if (s == "two_vs_two_large") *out = Scenario::TwoVsTwoLarge;
  else return false;
  return true;
}

FieldConfig make_field(Scenario scenario) {
  FieldConfig cfg;
  cfg.scenario = scenario;
  switch (scenario) {
    case Scenario::OneVsOne:
      cfg.width = 9;
      cfg.height = 6;
      cfg.frame_skip = 1;
      break;
    case Scenario::TwoVsTwoSmall:
      cfg.width = 13;
      cfg.height = 10;
      cfg.frame_skip = 2;
      break;
    case Scenario::TwoVsTwoLarge:
      cfg.width = 21;
      cfg.height = 14;
      cfg.frame_skip = 2;
      break;
  }
  cfg.cell_class.assign(static_cast<size_t>(cfg.width) * cfg.height,
                        static_cast<uint8_t>(CellClass::Field));

  // Goals occupy the vertically centered half-minus-one rows of the extreme
  // columns; the rest of those columns is border zone.
  const int goal_h = cfg.height / 2 - 1;
  const int goal_y0 = (cfg.height - goal_h) / 2;
  auto set = [&](Cell c, CellClass k) {
    cfg.cell_class[static_cast<size_t>(c.y) * cfg.width + c.x] = static_cast<uint8_t>(k);
  };
  for (int y = 0; y < cfg.height; ++y) {
    const bool goal_row = y >= goal_y0 && y < goal_y0 + goal_h;
    Cell left{0, y}, right{cfg.width - 1, y};
    if (goal_row) {
      set(left, CellClass::GoalLeft);
      set(right, CellClass::GoalRight);
      cfg.goal_left.push_back(left);
      cfg.goal_right.push_back(right);
    } else {
      set(left, CellClass::Border);
      set(right, CellClass::Border);
      cfg.border.push_back(left);
      cfg.border.push_back(right);
    }
  }

  // Spawn zones: the interior columns of each half, skipping the extreme
  // columns and the field's middle column.
  const int mid = cfg.width / 2;
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 1; x < mid; ++x) cfg.spawn_left.push_back({x, y});
    for (int x = mid + 1; x < cfg.width - 1; ++x) cfg.spawn_right.push_back({x, y});
  }
  return cfg;
}

std::vector<AgentId> make_roster(Scenario scenario, int n_controlled) {
  const int per_team = scenario == Scenario::OneVsOne ? 1 : 2;
  DPIQN_CHECK(n_controlled >= 1 && n_controlled <= per_team, "invalid learner count ",
              n_controlled, " for ", to_string(scenario));
  std::vector<AgentId> roster;
  for (int i = 0; i < per_team; ++i)
    roster.push_back({Team::Left, i, i < n_controlled});
  for (int i = 0; i < per_team; ++i)
    roster.push_back({Team::Right, i, false});
  return roster;
}

EnvState reset_state(const FieldConfig& cfg, const std::vector<AgentId>& roster, Rng& rng) {
  EnvState st;
  st.positions.resize(roster.size());
  auto place = [&](const std::vector<Cell>& zone, size_t i) {
    for (;;) {
      Cell c = zone[static_cast<size_t>(uniform_index(rng, static_cast<int>(zone.size())))];
      bool taken = false;
      for (size_t j = 0; j < i; ++j)
        if (st.positions[j] == c) taken = true;
      if (!taken) {
        st.positions[i] = c;
        return;
      }
    }
  };
  for (size_t i = 0; i < roster.size(); ++i)
    place(roster[i].team == Team::Left ? cfg.spawn_left : cfg.spawn_right, i);
  st.ball_holder = uniform_index(rng, static_cast<int>(roster.size()));
  st.step_count = 0;
  st.terminal = false;
  return st;
}

StepOutcome resolve_tick(const FieldConfig& cfg, const std::vector<AgentId>& roster,
                         const EnvState& state, const std::vector<Action>& actions) {
  DPIQN_CHECK(!state.terminal, "resolve_tick on a terminal state");
  const size_t n = roster.size();
  DPIQN_CHECK(actions.size() == n, "actions for ", actions.size(), " agents, roster has ", n);

  std::vector<Cell> intended(n);
  for (size_t i = 0; i < n; ++i) intended[i] = apply_action(state.positions[i], actions[i]);

  // An agent moves only if its target is an in-bounds non-border cell that no
  // other agent currently occupies or simultaneously targets.
  std::vector<Cell> resolved(n);
  for (size_t i = 0; i < n; ++i) {
    bool ok = cfg.in_bounds(intended[i]) && !cfg.is_border(intended[i]);
    for (size_t j = 0; ok && j < n; ++j) {
      if (j == i) continue;
      if (intended[i] == state.positions[j] || intended[i] == intended[j]) ok = false;
    }
    resolved[i] = ok ? intended[i] : state.positions[i];
  }

  // Ball transfer: anyone who targeted the holder's cell takes the ball;
  // ties go to the lowest (team, index), which is roster order.
  const Cell holder_cell = state.positions[static_cast<size_t>(state.ball_holder)];
  int new_holder = state.ball_holder;
  for (size_t i = 0; i < n; ++i) {
    if (static_cast<int>(i) == state.ball_holder) continue;
    if (intended[i] == holder_cell) {
      new_holder = static_cast<int>(i);
      break;
    }
  }

  StepOutcome out;
  out.next.positions = std::move(resolved);
  out.next.ball_holder = new_holder;
  out.next.step_count = state.step_count + 1;

  const Cell ball_cell = out.next.positions[static_cast<size_t>(new_holder)];
  const CellClass k = cfg.klass(ball_cell);
  if (k == CellClass::GoalRight) {
    out.reward = 1.0f;
    out.next.terminal = true;
  } else if (k == CellClass::GoalLeft) {
    out.reward = -1.0f;
    out.next.terminal = true;
  } else if (out.next.step_count >= cfg.max_steps) {
    out.next.terminal = true;
  }
  out.terminal = out.next.terminal;

  for (size_t i = 0; i < n; ++i)
    if (!roster[i].controlled) out.other_actions.emplace_back(static_cast<int>(i), actions[i]);
  return out;
}

StepOutcome step(const FieldConfig& cfg, const std::vector<AgentId>& roster, const EnvState& state,
                 const std::vector<Action>& actions, int frame_skip) {
  DPIQN_CHECK(frame_skip >= 1, "frame_skip must be positive");
  StepOutcome out = resolve_tick(cfg, roster, state, actions);
  float total = out.reward;
  for (int t = 1; t < frame_skip && !out.terminal; ++t) {
    StepOutcome next = resolve_tick(cfg, roster, out.next, actions);
    total += next.reward;
    out.next = std::move(next.next);
    out.terminal = next.terminal;
  }
  out.reward = std::clamp(total, -1.0f, 1.0f);
  return out;
}

namespace {
// Intensity scheme; all roles stay separable after downsampling.
constexpr float kLeftHalf = 0.55f, kRightHalf = 0.65f;
constexpr float kBorder = 0.0f, kGoal = 0.85f;
constexpr float kLeftAgent0 = 0.25f, kRightAgent0 = 0.90f, kAgentIndexStep = 0.05f;
constexpr float kBallFrame = 0.10f;
constexpr int kFrameWidth = 3;
}  // namespace

Renderer::Renderer(const FieldConfig& cfg) : cfg_(cfg) {
  raster_w_ = cfg.width * kCellPixels;
  raster_h_ = cfg.height * kCellPixels;
  raster_.resize(static_cast<size_t>(raster_w_) * raster_h_);
  tmp_.resize(static_cast<size_t>(raster_h_) * kObsSize);

  base_.resize(static_cast<size_t>(cfg.width) * cfg.height);
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      Cell c{x, y};
      float v;
      switch (cfg.klass(c)) {
        case CellClass::Border: v = kBorder; break;
        case CellClass::GoalLeft:
        case CellClass::GoalRight: v = kGoal; break;
        default: v = cfg.left_half(c) ? kLeftHalf : kRightHalf;
      }
      base_[static_cast<size_t>(y) * cfg.width + x] = v;
    }
  }

  // Area-average weights for the separable box resample.
  auto build = [](int src, int dst) {
    std::vector<Span> spans(static_cast<size_t>(dst));
    const double scale = static_cast<double>(src) / dst;
    for (int i = 0; i < dst; ++i) {
      const double a = i * scale, b = (i + 1) * scale;
      int j0 = static_cast<int>(std::floor(a));
      int j1 = std::min(src, static_cast<int>(std::ceil(b)));
      spans[static_cast<size_t>(i)].begin = j0;
      for (int j = j0; j < j1; ++j) {
        double overlap = std::min<double>(j + 1, b) - std::max<double>(j, a);
        spans[static_cast<size_t>(i)].w.push_back(static_cast<float>(overlap / scale));
      }
    }
    return spans;
  };
  spans_x_ = build(raster_w_, kObsSize);
  spans_y_ = build(raster_h_, kObsSize);
}

void Renderer::fill_cell(float* raster, Cell c, float v) const {
  for (int py = 0; py < kCellPixels; ++py) {
    float* row = raster + (static_cast<size_t>(c.y) * kCellPixels + py) * raster_w_ +
                 static_cast<size_t>(c.x) * kCellPixels;
    std::fill(row, row + kCellPixels, v);
  }
}

void Renderer::render(const std::vector<AgentId>& roster, const EnvState& state,
                      float* out) const {
  float* raster = raster_.data();
  for (int cy = 0; cy < cfg_.height; ++cy) {
    // paint the first pixel row of the cell band, then replicate it
    float* first = raster + static_cast<size_t>(cy) * kCellPixels * raster_w_;
    for (int cx = 0; cx < cfg_.width; ++cx)
      std::fill(first + static_cast<size_t>(cx) * kCellPixels,
                first + static_cast<size_t>(cx + 1) * kCellPixels,
                base_[static_cast<size_t>(cy) * cfg_.width + cx]);
    for (int py = 1; py < kCellPixels; ++py)
      std::copy(first, first + raster_w_, first + static_cast<size_t>(py) * raster_w_);
  }

  for (size_t i = 0; i < roster.size(); ++i) {
    const float v = (roster[i].team == Team::Left ? kLeftAgent0 : kRightAgent0) +
                    kAgentIndexStep * roster[i].index;
    fill_cell(raster, state.positions[i], v);
  }

  // Possession frame: 3 px ring just inside the holder's cell.
  const Cell hc = state.positions[static_cast<size_t>(state.ball_holder)];
  const int x0 = hc.x * kCellPixels, y0 = hc.y * kCellPixels;
  for (int py = 0; py < kCellPixels; ++py) {
    float* row = raster + static_cast<size_t>(y0 + py) * raster_w_ + x0;
    if (py < kFrameWidth || py >= kCellPixels - kFrameWidth) {
      std::fill(row, row + kCellPixels, kBallFrame);
    } else {
      std::fill(row, row + kFrameWidth, kBallFrame);
      std::fill(row + kCellPixels - kFrameWidth, row + kCellPixels, kBallFrame);
    }
  }

  // Horizontal then vertical box filter.
  float* tmp = tmp_.data();
  for (int y = 0; y < raster_h_; ++y) {
    const float* src = raster + static_cast<size_t>(y) * raster_w_;
    float* dst = tmp + static_cast<size_t>(y) * kObsSize;
    for (int i = 0; i < kObsSize; ++i) {
      const Span& sp = spans_x_[static_cast<size_t>(i)];
      float acc = 0.0f;
      for (size_t j = 0; j < sp.w.size(); ++j) acc += sp.w[j] * src[sp.begin + static_cast<int>(j)];
      dst[i] = acc;
    }
  }
  for (int i = 0; i < kObsSize; ++i) {
    const Span& sp = spans_y_[static_cast<size_t>(i)];
    for (int x = 0; x < kObsSize; ++x) {
      float acc = 0.0f;
      for (size_t j = 0; j < sp.w.size(); ++j)
        acc += sp.w[j] * tmp[(sp.begin + static_cast<size_t>(j)) * kObsSize + x];
      out[static_cast<size_t>(i) * kObsSize + x] = acc;
    }
  }
}

void render(const FieldConfig& cfg, const std::vector<AgentId>& roster, const EnvState& state,
            float* out) {
  Renderer r(cfg);
  r.render(roster, state, out);
}

void write_pgm(const std::string& path, const float* pixels, int w, int h) {
  std::ofstream f(path, std::ios::binary);
  DPIQN_CHECK(f.good(), "cannot open ", path, " for writing");
  f << "P5\n" << w << " " << h << "\n255\n";
  for (int i = 0; i < w * h; ++i) {
    float v = std::clamp(pixels[i], 0.0f, 1.0f);
    f.put(static_cast<char>(std::lround(v * 255.0f)));
  }
}

}  // namespace dpiqn
