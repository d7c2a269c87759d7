#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dpiqn/env.hpp"
#include "dpiqn/tensor.hpp"

namespace dpiqn {

constexpr int kMaxModeledAgents = 3;

struct Transition {
  int32_t frame_ref = -1;
  int32_t next_frame_ref = -1;
  uint8_t action = 0;
  uint8_t n_other = 0;
  std::array<uint8_t, kMaxModeledAgents> other_actions{};  // mu_o per modeled agent
  float reward = 0.0f;                                     // already clipped to [-1,1]
  bool terminal = false;
  int32_t episode_id = -1;
  float fp_eps = 0.0f, fp_epoch = 0.0f;  // collection-time fingerprint (FPDQN)
};

// Frames are stored once and shared between the transitions that reference
// them; slots are reclaimed when the last reference goes away.
class FrameStore {
 public:
  int add(const uint8_t* frame);  // refcount starts at 0; push() takes refs
  void addref(int id);
  void release(int id);
  const uint8_t* get(int id) const { return data_.data() + static_cast<size_t>(id) * kObsPixels; }
  int allocated_slots() const { return static_cast<int>(refs_.size()); }
  int live_slots() const { return allocated_slots() - static_cast<int>(free_.size()); }

 private:
  std::vector<uint8_t> data_;
  std::vector<int32_t> refs_;
  std::vector<int32_t> free_;
};

struct StackedBatch {
  int batch = 0, history = 0;
  Tensor<float> obs, next_obs;  // (B, history, 84, 84), intensities in [0,1]
  std::vector<uint8_t> actions;
  std::vector<float> rewards;
  std::vector<uint8_t> terminals;
  std::vector<std::vector<uint8_t>> other_actions;  // [head][B]
  std::vector<float> fp_eps, fp_epoch;              // collection-time fingerprints
  std::vector<int64_t> anchors;                     // absolute indices sampled
};

struct SequenceBatch {
  int batch = 0, seq_len = 0;
  std::vector<Tensor<float>> obs, next_obs;            // per step (B, 1, 84, 84)
  std::vector<std::vector<uint8_t>> actions;           // [step][B]
  std::vector<std::vector<float>> rewards;             // [step][B]
  std::vector<std::vector<uint8_t>> terminals;         // [step][B]
  std::vector<std::vector<std::vector<uint8_t>>> other_actions;  // [step][head][B]
};

// Ring buffer with FIFO eviction and a deduplicated frame store.
class ReplayMemory {
 public:
  explicit ReplayMemory(int capacity);

  int capacity() const { return capacity_; }
  int size() const;
  int64_t total_pushed() const { return total_pushed_; }
  int64_t oldest_abs() const { return total_pushed_ - size(); }

  int add_frame(const uint8_t* frame) { return frames_.add(frame); }
  const uint8_t* frame(int id) const { return frames_.get(id); }
  const FrameStore& frame_store() const { return frames_; }

  void push(const Transition& t);
  const Transition& at_abs(int64_t idx) const;

  // Uniform over live anchors; 12-frame windows are right-aligned at the
  // anchor and padded by repeating the episode's first live frame.
  StackedBatch sample_stacked(int batch, int history, Rng& rng) const;

  // Uniform over contiguous same-episode runs; no padding.
  SequenceBatch sample_sequences(int batch, int seq_len, Rng& rng) const;

 private:
  int capacity_;
  std::vector<Transition> ring_;
  int64_t total_pushed_ = 0;
  FrameStore frames_;

  void collect_window(int64_t anchor, int history, int32_t* ids) const;
};

}  // namespace dpiqn
