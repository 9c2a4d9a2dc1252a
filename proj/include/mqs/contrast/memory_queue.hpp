#pragma once

#include <deque>
#include <vector>

#include "mqs/common/error.hpp"
#include "mqs/nn/tensor.hpp"

namespace mqs::contrast {

// Fixed-capacity FIFO bank of detached sentence representations (the simple
// negatives). Entries are plain values, so nothing stored here can ever
// carry a gradient.
template <typename T>
class MemoryQueue {
 public:
  MemoryQueue(std::size_t capacity, Eigen::Index dim) : capacity_(capacity), dim_(dim) {
    MQS_CHECK(capacity_ >= 1, ConfigError, "MemoryQueue: capacity must be >= 1");
    MQS_CHECK(dim_ >= 1, StructuralError, "MemoryQueue: dim must be >= 1");
  }

  std::size_t capacity() const { return capacity_; }
  Eigen::Index dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }

  // Oldest -> newest.
  const std::deque<nn::Mat<T>>& entries() const { return entries_; }

  // Appends a batch newest-last, evicting the oldest entries beyond capacity.
  void enqueue(const std::vector<nn::Mat<T>>& batch) {
    MQS_CHECK(batch.size() <= capacity_, UsageError,
              "MemoryQueue: batch larger than queue capacity");
    for (const auto& r : batch) {
      MQS_CHECK(r.rows() == 1 && r.cols() == dim_, StructuralError,
                "MemoryQueue: representation must be 1 x dim");
      entries_.push_back(r);
    }
    while (entries_.size() > capacity_) entries_.pop_front();
  }

  // Dense snapshot, oldest first; 0 x dim when empty.
  nn::Mat<T> as_matrix() const {
    nn::Mat<T> m(static_cast<Eigen::Index>(entries_.size()), dim_);
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      m.row(static_cast<Eigen::Index>(i)) = entries_[i].row(0);
    }
    return m;
  }

  static MemoryQueue from_matrix(std::size_t capacity, const nn::Mat<T>& m) {
    MQS_CHECK(static_cast<std::size_t>(m.rows()) <= capacity, StructuralError,
              "MemoryQueue: snapshot larger than capacity");
    MemoryQueue q(capacity, m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) q.entries_.push_back(m.row(i));
    return q;
  }

 private:
  std::size_t capacity_;
  Eigen::Index dim_;
  std::deque<nn::Mat<T>> entries_;
};

template <typename T>
void step_queue(MemoryQueue<T>& queue, const std::vector<nn::Mat<T>>& batch_reps) {
  queue.enqueue(batch_reps);
}

}  // namespace mqs::contrast
