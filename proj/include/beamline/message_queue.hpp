#pragma once

// Bounded per-subscriber outbox. A producer never blocks: when the consumer
// falls `limit` messages behind, the queue closes and reports the overflow.

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <string>

namespace beamline {

class MessageQueue {
 public:
  enum class Push { Queued, Overflow, Closed };

  explicit MessageQueue(std::size_t limit) : limit_(limit) {}

  /// Overflow is reported once, by the push that closed the queue.
  Push push(std::string message) {
    std::lock_guard lock(mu_);
    if (closed_) return Push::Closed;
    if (queue_.size() >= limit_) {
      closed_ = true;
      overflowed_ = true;
      cv_.notify_all();
      return Push::Overflow;
    }
    queue_.push_back(std::move(message));
    cv_.notify_all();
    return Push::Queued;
  }

  /// Next message, or nullopt after `timeout` or once closed. A closed queue
  /// drops whatever it still holds.
  std::optional<std::string> pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return closed_ || !queue_.empty(); });
    if (closed_ || queue_.empty()) return std::nullopt;
    std::string m = std::move(queue_.front());
    queue_.pop_front();
    return m;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    cv_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }
  bool overflowed() const {
    std::lock_guard lock(mu_);
    return overflowed_;
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return queue_.size();
  }

 private:
  const std::size_t limit_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> queue_;
  bool closed_ = false;
  bool overflowed_ = false;
};

}  // namespace beamline
