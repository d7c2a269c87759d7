#include "dpiqn/replay.hpp"

#include <algorithm>
#include <cstring>

namespace dpiqn {

int FrameStore::add(const uint8_t* frame) {
  int id;
  if (!free_.empty()) {
    id = free_.back();
    free_.pop_back();
  } else {
    id = static_cast<int>(refs_.size());
    refs_.push_back(0);
    data_.resize(data_.size() + kObsPixels);
  }
  std::memcpy(data_.data() + static_cast<size_t>(id) * kObsPixels, frame, kObsPixels);
  refs_[static_cast<size_t>(id)] = 0;
  return id;
}

void FrameStore::addref(int id) { ++refs_[static_cast<size_t>(id)]; }

void FrameStore::release(int id) {
  int32_t& rc = refs_[static_cast<size_t>(id)];
  DPIQN_CHECK(rc > 0, "frame ", id, " released below zero");
  if (--rc == 0) free_.push_back(id);
}

ReplayMemory::ReplayMemory(int capacity) : capacity_(capacity) {
  DPIQN_CHECK(capacity >= 1, "replay capacity must be positive");
  ring_.resize(static_cast<size_t>(capacity));
}

int ReplayMemory::size() const {
  return static_cast<int>(std::min<int64_t>(total_pushed_, capacity_));
}

void ReplayMemory::push(const Transition& t) {
  DPIQN_CHECK(t.reward >= -1.0f && t.reward <= 1.0f, "reward must be clipped to [-1,1], got ",
              t.reward);
  DPIQN_CHECK(t.n_other <= kMaxModeledAgents, "too many modeled agents");
  const size_t slot = static_cast<size_t>(total_pushed_ % capacity_);
  if (total_pushed_ >= capacity_) {
    const Transition& old = ring_[slot];
    frames_.release(old.frame_ref);
    frames_.release(old.next_frame_ref);
  }
  frames_.addref(t.frame_ref);
  frames_.addref(t.next_frame_ref);
  ring_[slot] = t;
  ++total_pushed_;
}

const Transition& ReplayMemory::at_abs(int64_t idx) const {
  DPIQN_CHECK(idx >= oldest_abs() && idx < total_pushed_, "replay index ", idx, " out of window [",
              oldest_abs(), ",", total_pushed_, ")");
  return ring_[static_cast<size_t>(idx % capacity_)];
}

void ReplayMemory::collect_window(int64_t anchor, int history, int32_t* ids) const {
  const Transition& a = at_abs(anchor);
  ids[history - 1] = a.frame_ref;
  int64_t cur = anchor;
  for (int k = history - 2; k >= 0; --k) {
    const int64_t prev = cur - 1;
    if (prev >= oldest_abs() && at_abs(prev).episode_id == a.episode_id) {
      cur = prev;
      ids[k] = at_abs(cur).frame_ref;
    } else {
      // pad by repeating the episode's first live frame
      for (int j = k; j >= 0; --j) ids[j] = ids[k + 1];
      break;
    }
  }
}

StackedBatch ReplayMemory::sample_stacked(int batch, int history, Rng& rng) const {
  DPIQN_CHECK(size() >= history, "replay holds ", size(), " transitions, need ", history);
  StackedBatch out;
  out.batch = batch;
  out.history = history;
  out.obs = Tensor<float>({batch, history, kObsSize, kObsSize});
  out.next_obs = Tensor<float>({batch, history, kObsSize, kObsSize});
  out.actions.resize(static_cast<size_t>(batch));
  out.rewards.resize(static_cast<size_t>(batch));
  out.terminals.resize(static_cast<size_t>(batch));
  out.fp_eps.resize(static_cast<size_t>(batch));
  out.fp_epoch.resize(static_cast<size_t>(batch));
  out.anchors.resize(static_cast<size_t>(batch));

  const int n_other = at_abs(total_pushed_ - 1).n_other;
  out.other_actions.assign(static_cast<size_t>(n_other),
                           std::vector<uint8_t>(static_cast<size_t>(batch)));

  std::vector<int32_t> ids(static_cast<size_t>(history));
  constexpr float kInv = 1.0f / 255.0f;
  for (int b = 0; b < batch; ++b) {
    const int64_t anchor = oldest_abs() + uniform_index(rng, size());
    out.anchors[static_cast<size_t>(b)] = anchor;
    const Transition& t = at_abs(anchor);
    collect_window(anchor, history, ids.data());

    auto write = [&](Tensor<float>& dst, int channel, int32_t id) {
      const uint8_t* src = frames_.get(id);
      float* d = dst.ptr() + (static_cast<int64_t>(b) * history + channel) * kObsPixels;
      for (int i = 0; i < kObsPixels; ++i) d[i] = src[i] * kInv;
    };
    for (int h = 0; h < history; ++h) write(out.obs, h, ids[static_cast<size_t>(h)]);
    // next-state window is the same window shifted one step forward
    for (int h = 0; h + 1 < history; ++h) write(out.next_obs, h, ids[static_cast<size_t>(h + 1)]);
    write(out.next_obs, history - 1, t.next_frame_ref);

    out.actions[static_cast<size_t>(b)] = t.action;
    out.rewards[static_cast<size_t>(b)] = t.reward;
    out.terminals[static_cast<size_t>(b)] = t.terminal ? 1 : 0;
    out.fp_eps[static_cast<size_t>(b)] = t.fp_eps;
    out.fp_epoch[static_cast<size_t>(b)] = t.fp_epoch;
    for (int h = 0; h < n_other; ++h)
      out.other_actions[static_cast<size_t>(h)][static_cast<size_t>(b)] =
          t.other_actions[static_cast<size_t>(h)];
  }
  return out;
}

SequenceBatch ReplayMemory::sample_sequences(int batch, int seq_len, Rng& rng) const {
  DPIQN_CHECK(size() >= seq_len, "replay holds ", size(), " transitions, need ", seq_len);
  SequenceBatch out;
  out.batch = batch;
  out.seq_len = seq_len;
  const int n_other = at_abs(total_pushed_ - 1).n_other;
  for (int t = 0; t < seq_len; ++t) {
    out.obs.emplace_back(std::vector<int64_t>{batch, 1, kObsSize, kObsSize});
    out.next_obs.emplace_back(std::vector<int64_t>{batch, 1, kObsSize, kObsSize});
    out.actions.emplace_back(static_cast<size_t>(batch));
    out.rewards.emplace_back(static_cast<size_t>(batch));
    out.terminals.emplace_back(static_cast<size_t>(batch));
    out.other_actions.emplace_back(static_cast<size_t>(n_other),
                                   std::vector<uint8_t>(static_cast<size_t>(batch)));
  }

  const int64_t lo = oldest_abs(), hi = total_pushed_ - seq_len;  // inclusive start range
  DPIQN_CHECK(hi >= lo, "no room for a length-", seq_len, " run");
  auto valid = [&](int64_t s) {
    return at_abs(s).episode_id == at_abs(s + seq_len - 1).episode_id;
  };

  constexpr float kInv = 1.0f / 255.0f;
  for (int b = 0; b < batch; ++b) {
    int64_t start = -1;
    for (int tries = 0; tries < 10000; ++tries) {
      int64_t s = lo + uniform_index(rng, static_cast<int>(hi - lo + 1));
      if (valid(s)) {
        start = s;
        break;
      }
    }
    if (start < 0) {
      // exhaustive fallback from a random offset, deterministic under rng
      const int64_t base = lo + uniform_index(rng, static_cast<int>(hi - lo + 1));
      for (int64_t k = 0; k <= hi - lo; ++k) {
        int64_t s = lo + (base - lo + k) % (hi - lo + 1);
        if (valid(s)) {
          start = s;
          break;
        }
      }
    }
    DPIQN_CHECK(start >= 0, "replay holds no episode segment of length ", seq_len);

    for (int t = 0; t < seq_len; ++t) {
      const Transition& tr = at_abs(start + t);
      const uint8_t* cur = frames_.get(tr.frame_ref);
      const uint8_t* nxt = frames_.get(tr.next_frame_ref);
      float* od = out.obs[static_cast<size_t>(t)].ptr() + static_cast<int64_t>(b) * kObsPixels;
      float* nd = out.next_obs[static_cast<size_t>(t)].ptr() + static_cast<int64_t>(b) * kObsPixels;
      for (int i = 0; i < kObsPixels; ++i) {
        od[i] = cur[i] * kInv;
        nd[i] = nxt[i] * kInv;
      }
      out.actions[static_cast<size_t>(t)][static_cast<size_t>(b)] = tr.action;
      out.rewards[static_cast<size_t>(t)][static_cast<size_t>(b)] = tr.reward;
      out.terminals[static_cast<size_t>(t)][static_cast<size_t>(b)] = tr.terminal ? 1 : 0;
      for (int h = 0; h < n_other; ++h)
        out.other_actions[static_cast<size_t>(t)][static_cast<size_t>(h)][static_cast<size_t>(b)] =
            tr.other_actions[static_cast<size_t>(h)];
    }
  }
  return out;
}

}  // namespace dpiqn
