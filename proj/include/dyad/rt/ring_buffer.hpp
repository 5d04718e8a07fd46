#pragma once

#include <cstdint>
#include <mutex>
#include <vector>

#include "dyad/rt/frame.hpp"

namespace dyad::rt {

// Fixed-capacity FIFO of the most recent frames. Pushes are serialized,
// snapshots are consistent (a snapshot is always some contiguous run of the
// accepted stream), and both critical sections are bounded: push copies one
// frame, snapshot copies `capacity` frames.
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity = st::kWin)
      : capacity_(capacity), frames_(capacity) {}

  enum class Push { accepted, rejected_out_of_order };

  // Frames must arrive with strictly increasing sequence numbers; late or
  // duplicate frames are rejected and counted.
  Push push(const FrameMessage& f) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (has_last_ && f.seq <= last_seq_) {
      ++rejected_;
      return Push::rejected_out_of_order;
    }
    last_seq_ = f.seq;
    has_last_ = true;
    frames_[head_] = f;
    head_ = (head_ + 1) % capacity_;
    if (fill_ < capacity_) ++fill_;
    return Push::accepted;
  }

  // Copies the last `capacity` frames in arrival order; false while the
  // buffer has not filled yet ("insufficient data").
  bool snapshot(std::vector<FrameMessage>& out) const {
    std::lock_guard<std::mutex> lock(mutex_);
    if (fill_ < capacity_) return false;
    out.resize(capacity_);
    for (std::size_t i = 0; i < capacity_; ++i)
      out[i] = frames_[(head_ + i) % capacity_];
    return true;
  }

  // Snapshot directly into a win x 8 float block (model input layout).
  bool snapshot_features(float* x, std::uint64_t& last_seq,
                         std::uint64_t& last_t_us) const {
    std::lock_guard<std::mutex> lock(mutex_);
    if (fill_ < capacity_) return false;
    for (std::size_t i = 0; i < capacity_; ++i) {
      const FrameMessage& f = frames_[(head_ + i) % capacity_];
      for (std::size_t j = 0; j < st::kFeatures; ++j) x[i * st::kFeatures + j] = f.v[j];
    }
    const FrameMessage& newest = frames_[(head_ + capacity_ - 1) % capacity_];
    last_seq = newest.seq;
    last_t_us = newest.t_us;
    return true;
  }

  std::size_t capacity() const { return capacity_; }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return fill_;
  }

  std::uint64_t rejected() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return rejected_;
  }

 private:
  const std::size_t capacity_;
  mutable std::mutex mutex_;
  std::vector<FrameMessage> frames_;
  std::size_t head_ = 0;  // next write slot
  std::size_t fill_ = 0;
  std::uint64_t last_seq_ = 0;
  bool has_last_ = false;
  std::uint64_t rejected_ = 0;
};

}  // namespace dyad::rt
