#pragma once

#include <string>
#include <vector>

#include "dpiqn/env.hpp"

namespace dpiqn {

// Independent brute-force tick resolver used as the oracle for
// resolve_tick. Written against the movement rules directly; shares no
// helper code with the simulator.
StepOutcome brute_force_tick(const FieldConfig& cfg, const std::vector<AgentId>& roster,
                             const EnvState& state, const std::vector<Action>& actions);

// Uniformly random non-terminal state (positions distinct, off-border).
EnvState random_state(const FieldConfig& cfg, const std::vector<AgentId>& roster, Rng& rng);

struct SuiteResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

SuiteResult verify_gradients(double tolerance = 1e-4);
SuiteResult verify_loss_identities();
SuiteResult verify_env_oracle(int n_states = 1000, uint64_t seed = 2024);
SuiteResult verify_env_properties(int n_episodes = 10000, uint64_t seed = 2025);
SuiteResult verify_replay_uniformity(uint64_t seed = 2026);

// The full property battery behind the `verify` subcommand.
std::vector<SuiteResult> run_verification();

}  // namespace dpiqn
