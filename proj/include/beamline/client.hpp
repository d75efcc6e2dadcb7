#pragma once

// Client side of the line protocol: one-shot dynamic calls, attached static
// sessions, and a thread-safe multiplexed session that reconnects on its own.
// Transport failures throw Error(E_CONN); server-side errors come back as
// error Responses.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "beamline/protocol.hpp"

namespace beamline::client {

using Duration = std::chrono::milliseconds;
inline constexpr Duration kDefaultTimeout{30000};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 5025;
};

/// Connect, send one request, read one response, close.
protocol::Response call_dynamic(const Endpoint& endpoint, const protocol::Request& request,
                                Duration timeout = kDefaultTimeout);

class LineSocket;

/// A static session: one connection, attached on open, ids strictly rising.
class Session {
 public:
  /// Connects and attaches. Throws Error(E_CONN), or Error with the server's
  /// code if the attach is refused.
  static Session open(const Endpoint& endpoint, Duration timeout = kDefaultTimeout);

  Session(Session&&) noexcept;
  Session& operator=(Session&&) noexcept;
  ~Session();

  /// Sends with the next id.
  protocol::Response call(const std::string& op, std::optional<Json> args = std::nullopt);
  /// Sends the request as given; the server answers E_PROTO if its id does
  /// not exceed the previous one.
  protocol::Response call(const protocol::Request& request);

  void close() noexcept;
  bool is_open() const noexcept;
  std::uint64_t last_id() const noexcept { return next_id_ - 1; }
  const Json& attach_result() const noexcept { return attach_result_; }

 private:
  Session(std::unique_ptr<LineSocket> socket, Duration timeout);

  std::unique_ptr<LineSocket> socket_;
  Duration timeout_;
  std::uint64_t next_id_ = 1;
  bool broken_ = false;
  Json attach_result_;
};

/// Many threads sharing one static session. Requests are pipelined and
/// matched to responses by id. While the upstream is down, calls fail fast
/// with E_CONN and a background thread reconnects with capped backoff.
class MultiplexedSession {
 public:
  explicit MultiplexedSession(Endpoint endpoint, Duration timeout = kDefaultTimeout);
  ~MultiplexedSession();
  MultiplexedSession(const MultiplexedSession&) = delete;
  MultiplexedSession& operator=(const MultiplexedSession&) = delete;

  protocol::Response call(const std::string& op, std::optional<Json> args = std::nullopt);

  bool connected() const noexcept { return connected_.load(); }
  /// Blocks until connected or the timeout elapses.
  bool wait_connected(Duration timeout) const;
  std::uint64_t connects() const noexcept { return connects_.load(); }
  const Endpoint& endpoint() const noexcept { return endpoint_; }

 private:
  void run();
  void fail_pending(const std::string& why);

  const Endpoint endpoint_;
  const Duration timeout_;

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::mutex write_mu_;
  std::shared_ptr<LineSocket> socket_;
  std::map<std::uint64_t, std::promise<protocol::Response>> pending_;
  std::uint64_t next_id_ = 1;
  std::atomic<bool> connected_{false};
  std::atomic<bool> stopping_{false};
  std::atomic<std::uint64_t> connects_{0};
  std::thread thread_;
};

}  // namespace beamline::client
