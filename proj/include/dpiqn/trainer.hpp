#pragma once

#include <string>
#include <vector>

#include "dpiqn/config.hpp"
#include "dpiqn/losses.hpp"

namespace dpiqn {

// Linear anneal from epsilon_start at step 0 to epsilon_final at the end of
// epoch `epsilon_anneal_epochs`, constant afterwards.
double epsilon_at(int64_t env_step, const TrainSection& t);

// Piecewise-constant learning rate; drops apply from their epoch onwards.
double lr_at(int64_t epoch, const TrainSection& t);

struct TrainHooks {
  // per-update loss records for learner A
  std::vector<LossBreakdown>* losses = nullptr;
  // gradient-step index at every target sync of learner A
  std::vector<int64_t>* syncs = nullptr;
};

struct TrainResult {
  std::vector<std::string> curve_files;
  std::string final_checkpoint;
  int64_t env_steps = 0;
  std::vector<int64_t> grad_steps;
  std::vector<int64_t> episodes;
};

// Runs the training loop (one learner, or two when the config declares
// learner_b) and writes curves, checkpoints, and the resolved config into
// cfg.out_dir. `resume_from` continues a checkpointed run bit-for-bit.
TrainResult run_training(const ExperimentConfig& cfg, const std::string& resume_from = "",
                         const TrainHooks* hooks = nullptr);

}  // namespace dpiqn
