#include "beamline/tcp_server.hpp"

#include <sys/socket.h>

#include <boost/asio.hpp>
#include <list>
#include <mutex>
#include <thread>

#include "beamline/protocol.hpp"

namespace beamline {

namespace asio = boost::asio;
using asio::ip::tcp;
namespace proto = protocol;

namespace {

enum class ReadStatus { Line, Closed, TooLong };

ReadStatus read_line(tcp::socket& sock, std::string& buffer, std::string& line) {
  boost::system::error_code ec;
  const std::size_t n = asio::read_until(sock, asio::dynamic_buffer(buffer, proto::kMaxLineBytes + 1), '\n', ec);
  if (ec == asio::error::not_found) return ReadStatus::TooLong;
  if (ec) return ReadStatus::Closed;
  line.assign(buffer, 0, n);
  buffer.erase(0, n);
  return ReadStatus::Line;
}

bool write_line(tcp::socket& sock, const std::string& line) {
  boost::system::error_code ec;
  asio::write(sock, asio::buffer(line), ec);
  return !ec;
}

}  // namespace

struct TcpServer::Impl {
  struct Worker {
    std::thread thread;
    std::shared_ptr<tcp::socket> socket;
    std::shared_ptr<std::atomic<bool>> finished;
  };

  DeviceServer& device;
  asio::io_context io;
  tcp::acceptor acceptor{io};
  std::thread accept_thread;
  std::atomic<std::uint64_t> accepts{0};
  std::atomic<std::uint64_t> active{0};
  std::mutex workers_mu;
  std::list<Worker> workers;
  bool stopped = false;
  bool stop_called = false;
  std::uint16_t bound_port = 0;

  explicit Impl(DeviceServer& d) : device(d) {}

  void accept_next() {
    acceptor.async_accept([this](boost::system::error_code ec, tcp::socket sock) {
      if (ec) {
        if (ec != asio::error::operation_aborted && acceptor.is_open()) accept_next();
        return;
      }
      accepts.fetch_add(1);
      spawn(std::move(sock));
      accept_next();
    });
  }

  void spawn(tcp::socket sock) {
    sock.set_option(tcp::no_delay(true));
    auto shared = std::make_shared<tcp::socket>(std::move(sock));
    auto finished = std::make_shared<std::atomic<bool>>(false);
    std::lock_guard lock(workers_mu);
    reap_locked();
    if (stopped) return;
    active.fetch_add(1);
    std::thread t([this, shared, finished] {
      serve(*shared);
      boost::system::error_code ignored;
      shared->shutdown(tcp::socket::shutdown_both, ignored);
      active.fetch_sub(1);
      finished->store(true);
    });
    workers.push_back(Worker{std::move(t), shared, finished});
  }

  void reap_locked() {
    for (auto it = workers.begin(); it != workers.end();) {
      if (it->finished->load()) {
        it->thread.join();
        it = workers.erase(it);
      } else {
        ++it;
      }
    }
  }

  proto::Response execute(const proto::Request& req) {
    Command command;
    try {
      command = proto::to_command(req);
    } catch (const proto::ParseError& e) {
      return proto::Response::failure(e.id(), e.code(), e.what());
    }
    const bool is_ping = std::holds_alternative<cmd::Ping>(command);
    Reply reply = device.call(std::move(command));
    if (is_ping && reply.ok) reply.result["connections"] = accepts.load();
    return proto::Response::from_reply(req.id, reply);
  }

  void serve(tcp::socket& sock) {
    std::string buffer;
    std::string line;

    switch (read_line(sock, buffer, line)) {
      case ReadStatus::Closed:
        return;
      case ReadStatus::TooLong:
        write_line(sock, proto::encode_response(proto::Response::failure(0, ErrorCode::Parse, "line exceeds 64 KiB")));
        return;
      case ReadStatus::Line:
        break;
    }

    proto::Request first;
    try {
      first = proto::decode_request(line);
    } catch (const proto::ParseError& e) {
      write_line(sock, proto::encode_response(proto::Response::failure(e.id(), ErrorCode::Parse, e.what())));
      return;
    }
    if (first.id == 0) {
      write_line(sock, proto::encode_response(proto::Response::failure(0, ErrorCode::Proto, "request id 0 is reserved")));
      return;
    }
    if (first.op != proto::kAttachOp) {
      write_line(sock, proto::encode_response(execute(first)));
      return;
    }

    // Static session.
    const std::string name = device.initial_config().name;
    if (!write_line(sock, proto::encode_response(proto::Response::success(
                              first.id, Json{{"session", "static"}, {"server", name}})))) {
      return;
    }
    std::uint64_t last_id = first.id;
    for (;;) {
      const ReadStatus status = read_line(sock, buffer, line);
      if (status == ReadStatus::Closed) return;
      if (status == ReadStatus::TooLong) {
        write_line(sock, proto::encode_response(proto::Response::failure(0, ErrorCode::Parse, "line exceeds 64 KiB")));
        return;
      }

      proto::Response response;
      try {
        const proto::Request req = proto::decode_request(line);
        if (req.id <= last_id) {
          response = proto::Response::failure(req.id, ErrorCode::Proto,
                                              "request id must exceed " + std::to_string(last_id));
        } else if (req.op == proto::kAttachOp) {
          last_id = req.id;
          response = proto::Response::failure(req.id, ErrorCode::Proto, "session is already attached");
        } else {
          last_id = req.id;
          response = execute(req);
        }
      } catch (const proto::ParseError& e) {
        response = proto::Response::failure(e.id(), ErrorCode::Parse, e.what());
      }
      if (!write_line(sock, proto::encode_response(response))) return;
    }
  }
};

TcpServer::TcpServer(DeviceServer& device, const std::string& bind, std::uint16_t port)
    : impl_(std::make_unique<Impl>(device)) {
  try {
    const tcp::endpoint ep(asio::ip::make_address(bind), port);
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(tcp::acceptor::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen(asio::socket_base::max_listen_connections);
    impl_->bound_port = impl_->acceptor.local_endpoint().port();
  } catch (const boost::system::system_error& e) {
    throw Error(ErrorCode::Io, "cannot listen on " + bind + ":" + std::to_string(port) + ": " + e.what());
  }
}

TcpServer::~TcpServer() { stop(); }

void TcpServer::start() {
  if (impl_->accept_thread.joinable()) return;
  impl_->accept_next();
  impl_->accept_thread = std::thread([this] { impl_->io.run(); });
}

void TcpServer::stop() {
  if (!impl_ || impl_->stop_called) return;
  impl_->stop_called = true;
  asio::post(impl_->io, [this] {
    boost::system::error_code ignored;
    impl_->acceptor.close(ignored);
  });
  if (impl_->accept_thread.joinable()) {
    impl_->accept_thread.join();
  } else {
    impl_->io.run();
  }
  impl_->io.stop();

  std::list<Impl::Worker> workers;
  {
    std::lock_guard lock(impl_->workers_mu);
    impl_->stopped = true;
    workers.swap(impl_->workers);
  }
  // Wake readers blocked in recv; the worker owns the socket object itself.
  for (auto& w : workers) ::shutdown(w.socket->native_handle(), SHUT_RDWR);
  for (auto& w : workers) w.thread.join();
}

std::uint16_t TcpServer::port() const noexcept { return impl_->bound_port; }

std::uint64_t TcpServer::accept_count() const noexcept { return impl_->accepts.load(); }
std::uint64_t TcpServer::active_connections() const noexcept { return impl_->active.load(); }

}  // namespace beamline
