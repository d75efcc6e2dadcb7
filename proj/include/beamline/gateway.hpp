#pragma once

// HTTP/WebSocket bridge in front of a device server. Holds no beamline state:
// every REST call becomes one wire op over a shared static session, and a
// poller turns scan progress and state changes into WebSocket messages.
//
// WebSocket /ws messages, one JSON object each:
//   {"type":"snapshot","data":{...}}            on connect, then on change (>= 250 ms apart)
//   {"type":"scan_point","scan_id":N,"data":{...}}   every point, in order
//   {"type":"scan_status","data":{...}}          whenever a scan changes state

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "beamline/client.hpp"

namespace beamline::gateway {

struct GatewayOptions {
  std::string bind = "127.0.0.1";
  std::uint16_t port = 8080;  // 0 picks an ephemeral port
  client::Endpoint upstream;
  /// Console assets served at "/". Without one a small built-in page is used.
  std::optional<std::filesystem::path> static_dir;
  std::chrono::milliseconds poll_interval{50};
  std::chrono::milliseconds snapshot_interval{250};
  std::size_t ws_queue_limit = 64;
  std::chrono::milliseconds upstream_timeout{30000};
};

class Gateway {
 public:
  /// Binds immediately. Throws Error(E_IO).
  explicit Gateway(GatewayOptions options);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  void start();
  void stop();

  std::uint16_t port() const noexcept;
  std::size_t subscriber_count() const;
  /// Subscribers dropped because their message buffer overflowed.
  std::uint64_t overflow_drops() const noexcept;
  bool upstream_connected() const noexcept;
  /// True once the poller has read the upstream scan state for the first
  /// time; scans started after this are streamed from their first point.
  bool ready() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace beamline::gateway
