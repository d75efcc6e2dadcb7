#pragma once

// TCP listener for the line protocol. Each connection gets its own thread.
// The first request decides the session mode: "attach" opens a static session
// that stays up until the client leaves; anything else is a dynamic call that
// is answered once, after which the server closes the connection.

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

#include "beamline/device_server.hpp"

namespace beamline {

class TcpServer {
 public:
  /// Binds immediately; port 0 picks an ephemeral port. Throws Error(E_IO).
  TcpServer(DeviceServer& device, const std::string& bind, std::uint16_t port);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  void start();
  /// Closes the listener and every live connection, then joins all threads.
  void stop();

  std::uint16_t port() const noexcept;
  std::uint64_t accept_count() const noexcept;
  std::uint64_t active_connections() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace beamline
