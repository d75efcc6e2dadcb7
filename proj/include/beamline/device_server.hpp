#pragma once

// Owns the one Beamline of a process and serializes every command, clock tick
// and inspection onto a single loop thread. Transports submit commands and
// wait on the returned future.

#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <thread>

#include "beamline/beamline.hpp"

namespace beamline {

enum class ClockDrive {
  Wall,    // simulated time follows the wall clock (times the scale factor)
  Manual,  // simulated time moves only through advance_sim(); for tests
};

class DeviceServer {
 public:
  /// Throws ConfigError for an invalid config.
  explicit DeviceServer(BeamlineConfig cfg, ClockDrive drive = ClockDrive::Wall);
  ~DeviceServer();
  DeviceServer(const DeviceServer&) = delete;
  DeviceServer& operator=(const DeviceServer&) = delete;

  /// Process-wide instance. The first call builds it from `cfg`; later calls
  /// return the same instance and ignore their argument.
  static DeviceServer& init_once(const BeamlineConfig& cfg);
  /// The process-wide instance, or nullptr before init_once().
  static DeviceServer* instance() noexcept;

  std::future<Reply> submit(Command command);
  /// submit() and wait. After shutdown() every call fails with E_INTERNAL.
  Reply call(Command command);

  /// Runs `fn` on the loop thread between commands and returns its result.
  template <typename F>
  auto inspect(F&& fn) -> decltype(fn(std::declval<const Beamline&>()));

  /// Manual drive only: advances simulated time by dt seconds.
  void advance_sim(double dt);

  const BeamlineConfig& initial_config() const noexcept { return initial_cfg_; }
  void shutdown();

 private:
  using Task = std::function<void(Beamline&)>;
  void post(Task task);
  void run();

  const BeamlineConfig initial_cfg_;
  const ClockDrive drive_;
  Beamline beamline_;
  sim::SimClock clock_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Task> tasks_;
  bool stopping_ = false;
  std::thread loop_;
};

template <typename F>
auto DeviceServer::inspect(F&& fn) -> decltype(fn(std::declval<const Beamline&>())) {
  using R = decltype(fn(std::declval<const Beamline&>()));
  auto promise = std::make_shared<std::promise<R>>();
  auto future = promise->get_future();
  post([promise, &fn](Beamline& bl) {
    try {
      if constexpr (std::is_void_v<R>) {
        fn(std::as_const(bl));
        promise->set_value();
      } else {
        promise->set_value(fn(std::as_const(bl)));
      }
    } catch (...) {
      promise->set_exception(std::current_exception());
    }
  });
  return future.get();
}

}  // namespace beamline
