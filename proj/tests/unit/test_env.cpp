#include <doctest.h>

#include <fstream>
#include <sstream>

#include "dpiqn/env.hpp"
#include "dpiqn/verify.hpp"

using namespace dpiqn;

TEST_CASE("field geometry per scenario") {
  FieldConfig f1 = make_field(Scenario::OneVsOne);
  CHECK(f1.width == 9);
  CHECK(f1.height == 6);
  CHECK(f1.frame_skip == 1);
  CHECK(f1.max_steps == 100);

  FieldConfig f2 = make_field(Scenario::TwoVsTwoSmall);
  CHECK(f2.width == 13);
  CHECK(f2.height == 10);
  CHECK(f2.frame_skip == 2);

  FieldConfig f3 = make_field(Scenario::TwoVsTwoLarge);
  CHECK(f3.width == 21);
  CHECK(f3.height == 14);
  CHECK(f3.frame_skip == 2);

  // goals on the extremes, spawn zones disjoint from goals and borders
  for (const FieldConfig& f : {f1, f2, f3}) {
    CHECK(!f.goal_left.empty());
    for (Cell c : f.goal_left) CHECK(c.x == 0);
    for (Cell c : f.goal_right) CHECK(c.x == f.width - 1);
    for (Cell c : f.spawn_left) {
      CHECK(!f.is_border(c));
      CHECK(!f.is_goal(c));
      CHECK(f.left_half(c));
    }
    for (Cell c : f.spawn_right) {
      CHECK(!f.is_border(c));
      CHECK(!f.is_goal(c));
      CHECK(!f.left_half(c));
    }
    for (Cell c : f.border) CHECK((c.x == 0 || c.x == f.width - 1));
  }
}

TEST_CASE("reset places teams in their spawn zones and is seed-deterministic") {
  FieldConfig cfg = make_field(Scenario::OneVsOne);
  auto roster = make_roster(Scenario::OneVsOne);

  auto in_zone = [](const std::vector<Cell>& zone, Cell c) {
    for (Cell z : zone)
      if (z == c) return true;
    return false;
  };

  for (uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    EnvState st = reset_state(cfg, roster, rng);
    CHECK(in_zone(cfg.spawn_left, st.positions[0]));
    CHECK(in_zone(cfg.spawn_right, st.positions[1]));
    CHECK(st.step_count == 0);
    CHECK(!st.terminal);
  }

  Rng a(1234), b(1234);
  EnvState s1 = reset_state(cfg, roster, a);
  EnvState s2 = reset_state(cfg, roster, b);
  CHECK(s1.positions == s2.positions);
  CHECK(s1.ball_holder == s2.ball_holder);
}

TEST_CASE("initial ball possession is uniform across agents") {
  FieldConfig cfg = make_field(Scenario::OneVsOne);
  auto roster = make_roster(Scenario::OneVsOne);
  Rng rng(99);
  int counts[2] = {0, 0};
  const int n = 10000;
  for (int i = 0; i < n; ++i) counts[reset_state(cfg, roster, rng).ball_holder]++;
  // binomial(10000, 1/2): 3 sigma = 150
  CHECK(std::abs(counts[0] - n / 2) <= 150);
}

TEST_CASE("scoring through the right goal gives +1") {
  FieldConfig cfg = make_field(Scenario::OneVsOne);
  auto roster = make_roster(Scenario::OneVsOne);
  EnvState st;
  const Cell goal = cfg.goal_right.front();
  st.positions = {{goal.x - 1, goal.y}, {4, 5}};
  st.ball_holder = 0;
  st.step_count = 10;

  StepOutcome out = resolve_tick(cfg, roster, st, {Action::East, Action::Stand});
  CHECK(out.terminal);
  CHECK(out.reward == 1.0f);
  CHECK(out.next.positions[0] == goal);
}

TEST_CASE("own goal scores for the opposing side") {
  FieldConfig cfg = make_field(Scenario::OneVsOne);
  auto roster = make_roster(Scenario::OneVsOne);
  EnvState st;
  const Cell goal = cfg.goal_left.front();
  st.positions = {{goal.x + 1, goal.y}, {6, 4}};
  st.ball_holder = 0;
  st.step_count = 0;
  StepOutcome out = resolve_tick(cfg, roster, st, {Action::West, Action::Stand});
  CHECK(out.terminal);
  CHECK(out.reward == -1.0f);
}

TEST_CASE("out-of-bounds and border moves do not take place") {
  FieldConfig cfg = make_field(Scenario::OneVsOne);
  auto roster = make_roster(Scenario::OneVsOne);
  EnvState st;
  st.positions = {{3, 0}, {7, 4}};
  st.ball_holder = 1;
  st.step_count = 0;

  // top row, North is out of bounds
  StepOutcome out = resolve_tick(cfg, roster, st, {Action::North, Action::Stand});
  CHECK(out.next.positions[0] == Cell{3, 0});

  // border cell (corner column) is not enterable
  EnvState st2;
  st2.positions = {{1, 0}, {7, 4}};
  st2.ball_holder = 1;
  st2.step_count = 0;
  StepOutcome out2 = resolve_tick(cfg, roster, st2, {Action::West, Action::Stand});
  CHECK(out2.next.positions[0] == Cell{1, 0});
}

TEST_CASE("moving into the holder's cell steals the ball and blocks the move") {
  FieldConfig cfg = make_field(Scenario::OneVsOne);
  auto roster = make_roster(Scenario::OneVsOne);
  EnvState st;
  st.positions = {{4, 2}, {5, 2}};
  st.ball_holder = 0;
  st.step_count = 0;

  StepOutcome out = resolve_tick(cfg, roster, st, {Action::Stand, Action::West});
  CHECK(out.next.positions[1] == Cell{5, 2});  // stays
  CHECK(out.next.ball_holder == 1);            // but takes the ball
  CHECK(!out.terminal);
}

TEST_CASE("swap attempts block both agents; holder side transfers the ball") {
  FieldConfig cfg = make_field(Scenario::OneVsOne);
  auto roster = make_roster(Scenario::OneVsOne);
  EnvState st;
  st.positions = {{4, 2}, {5, 2}};
  st.ball_holder = 0;
  st.step_count = 0;
  StepOutcome out = resolve_tick(cfg, roster, st, {Action::East, Action::West});
  CHECK(out.next.positions[0] == Cell{4, 2});
  CHECK(out.next.positions[1] == Cell{5, 2});
  CHECK(out.next.ball_holder == 1);
}

TEST_CASE("multiple simultaneous stealers resolve to the lowest roster order") {
  FieldConfig cfg = make_field(Scenario::TwoVsTwoSmall);
  auto roster = make_roster(Scenario::TwoVsTwoSmall);
  EnvState st;
  st.positions = {{6, 4}, {6, 5}, {7, 4}, {6, 3}};
  st.ball_holder = 2;  // right team, index 0 holds at (7,4)
  st.step_count = 0;
  // left 0 at (6,4) moves East into holder; right 1 at ... also tries
  EnvState st2 = st;
  st2.positions = {{6, 4}, {6, 5}, {7, 4}, {7, 3}};
  StepOutcome out =
      resolve_tick(cfg, roster, st2, {Action::East, Action::Stand, Action::Stand, Action::South});
  CHECK(out.next.ball_holder == 0);  // lowest (team, index) among intenders
}

TEST_CASE("timeout ends the episode with zero reward") {
  FieldConfig cfg = make_field(Scenario::OneVsOne);
  auto roster = make_roster(Scenario::OneVsOne);
  EnvState st;
  st.positions = {{3, 3}, {6, 3}};
  st.ball_holder = 0;
  st.step_count = cfg.max_steps - 1;
  StepOutcome out = resolve_tick(cfg, roster, st, {Action::Stand, Action::Stand});
  CHECK(out.terminal);
  CHECK(out.reward == 0.0f);
  CHECK(out.next.step_count == cfg.max_steps);
}

TEST_CASE("stepping a terminal state is a contract violation") {
  FieldConfig cfg = make_field(Scenario::OneVsOne);
  auto roster = make_roster(Scenario::OneVsOne);
  EnvState st;
  st.positions = {{3, 3}, {6, 3}};
  st.ball_holder = 0;
  st.terminal = true;
  CHECK_THROWS_AS(resolve_tick(cfg, roster, st, {Action::Stand, Action::Stand}), ContractError);
}

TEST_CASE("frame skip: one tick equals resolve_tick; two ticks advance twice; early goal exits") {
  FieldConfig cfg = make_field(Scenario::OneVsOne);
  auto roster = make_roster(Scenario::OneVsOne);
  EnvState st;
  st.positions = {{3, 3}, {6, 3}};
  st.ball_holder = 0;
  st.step_count = 0;
  std::vector<Action> acts{Action::North, Action::South};

  StepOutcome one = step(cfg, roster, st, acts, 1);
  StepOutcome tick = resolve_tick(cfg, roster, st, acts);
  CHECK(one.next.positions == tick.next.positions);
  CHECK(one.next.step_count == tick.next.step_count);

  StepOutcome two = step(cfg, roster, st, acts, 2);
  StepOutcome manual = resolve_tick(cfg, roster, resolve_tick(cfg, roster, st, acts).next, acts);
  CHECK(two.next.step_count == 2);
  CHECK(two.next.positions == manual.next.positions);

  // goal on the first tick stops the skip
  EnvState near_goal;
  const Cell goal = cfg.goal_right.front();
  near_goal.positions = {{goal.x - 1, goal.y}, {4, 5}};
  near_goal.ball_holder = 0;
  near_goal.step_count = 0;
  StepOutcome g = step(cfg, roster, near_goal, {Action::East, Action::Stand}, 2);
  CHECK(g.terminal);
  CHECK(g.next.step_count == 1);
  CHECK(g.reward == 1.0f);
}

TEST_CASE("render produces a deterministic 84x84 observation sensitive to possession") {
  for (Scenario sc : {Scenario::OneVsOne, Scenario::TwoVsTwoLarge}) {
    FieldConfig cfg = make_field(sc);
    auto roster = make_roster(sc);
    Rng rng(5);
    EnvState st = reset_state(cfg, roster, rng);

    std::vector<float> a(kObsPixels), b(kObsPixels);
    render(cfg, roster, st, a.data());
    render(cfg, roster, st, b.data());
    CHECK(a == b);
    for (float v : a) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }

    EnvState st2 = st;
    st2.ball_holder = (st.ball_holder + 1) % static_cast<int>(roster.size());
    render(cfg, roster, st2, b.data());
    CHECK(a != b);
  }
}

TEST_CASE("environment matches the brute-force oracle on random states") {
  // quick slice of the acceptance-scale check
  SuiteResult r = verify_env_oracle(100, 7);
  CHECK(r.pass);
}

TEST_CASE("property suite over random-action episodes") {
  SuiteResult r = verify_env_properties(1500, 8);
  CHECK(r.pass);
}

TEST_CASE("permutation symmetry of resolution") {
  // swapping the two right-team agents (equal tie-break rank does not exist
  // across indices, so relabel symmetric positions instead): mirror test via
  // relabeling the two left agents of a 2v2 state along with their actions.
  FieldConfig cfg = make_field(Scenario::TwoVsTwoSmall);
  auto roster = make_roster(Scenario::TwoVsTwoSmall);
  Rng rng(21);
  for (int it = 0; it < 200; ++it) {
    EnvState st = random_state(cfg, roster, rng);
    // only exercise states where the ball holder is not a left agent, so the
    // tie-break order between left agents cannot matter
    if (st.ball_holder < 2) continue;
    std::vector<Action> acts;
    for (int i = 0; i < 4; ++i) acts.push_back(static_cast<Action>(uniform_index(rng, 5)));
    // skip action maps that make both left agents target the holder cell
    Cell hc = st.positions[static_cast<size_t>(st.ball_holder)];
    if (apply_action(st.positions[0], acts[0]) == hc &&
        apply_action(st.positions[1], acts[1]) == hc)
      continue;

    EnvState swapped = st;
    std::swap(swapped.positions[0], swapped.positions[1]);
    std::vector<Action> swapped_acts = acts;
    std::swap(swapped_acts[0], swapped_acts[1]);

    StepOutcome a = resolve_tick(cfg, roster, st, acts);
    StepOutcome b = resolve_tick(cfg, roster, swapped, swapped_acts);
    CHECK(a.next.positions[0] == b.next.positions[1]);
    CHECK(a.next.positions[1] == b.next.positions[0]);
    CHECK(a.next.positions[2] == b.next.positions[2]);
    CHECK(a.reward == b.reward);
    CHECK(a.terminal == b.terminal);
  }
}

TEST_CASE("pgm dump writes a valid header") {
  FieldConfig cfg = make_field(Scenario::OneVsOne);
  auto roster = make_roster(Scenario::OneVsOne);
  Rng rng(3);
  EnvState st = reset_state(cfg, roster, rng);
  std::vector<float> obs(kObsPixels);
  render(cfg, roster, st, obs.data());
  const std::string path = "test_obs.pgm";
  write_pgm(path, obs.data());
  std::string text = [&] {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
  }();
  CHECK(text.substr(0, 3) == "P5\n");
  CHECK(text.size() > static_cast<size_t>(kObsPixels));
}
