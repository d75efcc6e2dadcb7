#include "beamline/client.hpp"

#include <sys/socket.h>

#include <boost/asio.hpp>

namespace beamline::client {

namespace asio = boost::asio;
using asio::ip::tcp;
namespace proto = protocol;

namespace {

[[noreturn]] void conn_error(const std::string& what) { throw Error(ErrorCode::Conn, what); }

}  // namespace

/// Blocking line I/O with per-operation timeouts, built on async operations
/// driven by run_for so a dead peer cannot hang the caller.
class LineSocket {
 public:
  void connect(const Endpoint& ep, Duration timeout) {
    boost::system::error_code ec;
    tcp::resolver resolver(io_);
    const auto results = resolver.resolve(ep.host, std::to_string(ep.port), ec);
    if (ec) conn_error("cannot resolve '" + ep.host + "': " + ec.message());
    asio::async_connect(sock_, results, [&](boost::system::error_code e, const tcp::endpoint&) { ec = e; });
    if (!run(timeout)) conn_error("connect to " + ep.host + ":" + std::to_string(ep.port) + " timed out");
    if (ec) conn_error("connect to " + ep.host + ":" + std::to_string(ep.port) + " failed: " + ec.message());
    sock_.set_option(tcp::no_delay(true), ec);
  }

  void write(const std::string& line, Duration timeout) {
    boost::system::error_code ec;
    asio::async_write(sock_, asio::buffer(line), [&](boost::system::error_code e, std::size_t) { ec = e; });
    if (!run(timeout)) conn_error("write timed out");
    if (ec) conn_error("write failed: " + ec.message());
  }

  std::string read_line(Duration timeout) {
    boost::system::error_code ec;
    std::size_t n = 0;
    asio::async_read_until(sock_, asio::dynamic_buffer(buf_, proto::kMaxLineBytes + 1), '\n',
                           [&](boost::system::error_code e, std::size_t len) {
                             ec = e;
                             n = len;
                           });
    if (!run(timeout)) conn_error("no response within " + std::to_string(timeout.count()) + " ms");
    if (ec == asio::error::eof) conn_error("connection closed by server");
    if (ec) conn_error("read failed: " + ec.message());
    std::string line = buf_.substr(0, n);
    buf_.erase(0, n);
    return line;
  }

  /// Blocking read for a dedicated reader thread; unblocked by shutdown().
  std::string read_line_blocking() {
    boost::system::error_code ec;
    const std::size_t n = asio::read_until(sock_, asio::dynamic_buffer(buf_, proto::kMaxLineBytes + 1), '\n', ec);
    if (ec) conn_error("read failed: " + ec.message());
    std::string line = buf_.substr(0, n);
    buf_.erase(0, n);
    return line;
  }

  void write_blocking(const std::string& line) {
    boost::system::error_code ec;
    asio::write(sock_, asio::buffer(line), ec);
    if (ec) conn_error("write failed: " + ec.message());
  }

  void shutdown() noexcept {
    if (sock_.is_open()) ::shutdown(sock_.native_handle(), SHUT_RDWR);
  }

  void close() noexcept {
    boost::system::error_code ignored;
    sock_.close(ignored);
  }

  bool is_open() const noexcept { return sock_.is_open(); }

 private:
  bool run(Duration timeout) {
    io_.restart();
    io_.run_for(timeout);
    if (io_.stopped()) return true;
    close();
    io_.restart();
    io_.run();
    return false;
  }

  asio::io_context io_;
  tcp::socket sock_{io_};
  std::string buf_;
};

namespace {

proto::Response exchange(LineSocket& sock, const proto::Request& request, Duration timeout) {
  sock.write(proto::encode_request(request), timeout);
  return proto::decode_response(sock.read_line(timeout));
}

}  // namespace

proto::Response call_dynamic(const Endpoint& endpoint, const proto::Request& request, Duration timeout) {
  LineSocket sock;
  sock.connect(endpoint, timeout);
  proto::Response response = exchange(sock, request, timeout);
  sock.close();
  return response;
}

// --- Session -------------------------------------------------------------------

Session::Session(std::unique_ptr<LineSocket> socket, Duration timeout)
    : socket_(std::move(socket)), timeout_(timeout) {}
Session::Session(Session&&) noexcept = default;
Session& Session::operator=(Session&&) noexcept = default;
Session::~Session() { close(); }

Session Session::open(const Endpoint& endpoint, Duration timeout) {
  auto sock = std::make_unique<LineSocket>();
  sock->connect(endpoint, timeout);
  Session session(std::move(sock), timeout);
  const proto::Response r = session.call(std::string(proto::kAttachOp));
  if (!r.ok()) {
    const auto code = error_code_from_string(r.error().code).value_or(ErrorCode::Proto);
    throw Error(code, "attach refused: " + r.error().message);
  }
  session.attach_result_ = r.result();
  return session;
}

proto::Response Session::call(const std::string& op, std::optional<Json> args) {
  return call(proto::Request{next_id_, op, std::move(args)});
}

proto::Response Session::call(const proto::Request& request) {
  if (!socket_ || !socket_->is_open()) conn_error("session is closed");
  if (broken_) conn_error("session is broken");
  if (request.id >= next_id_) next_id_ = request.id + 1;
  try {
    return exchange(*socket_, request, timeout_);
  } catch (const Error&) {
    broken_ = true;
    socket_->close();
    throw;
  }
}

void Session::close() noexcept {
  if (socket_) socket_->close();
}

bool Session::is_open() const noexcept { return socket_ && socket_->is_open() && !broken_; }

// --- MultiplexedSession ----------------------------------------------------------

MultiplexedSession::MultiplexedSession(Endpoint endpoint, Duration timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {
  thread_ = std::thread([this] { run(); });
}

MultiplexedSession::~MultiplexedSession() {
  stopping_ = true;
  {
    std::lock_guard lock(mu_);
    if (socket_) socket_->shutdown();
  }
  cv_.notify_all();
  thread_.join();
}

bool MultiplexedSession::wait_connected(Duration timeout) const {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] { return connected_.load() || stopping_.load(); }) && connected_.load();
}

proto::Response MultiplexedSession::call(const std::string& op, std::optional<Json> args) {
  // Give a (re)connect in flight a moment before reporting the upstream down.
  if (!connected_) wait_connected(std::min(timeout_, Duration{1000}));
  std::shared_ptr<LineSocket> sock;
  std::future<proto::Response> future;
  std::uint64_t id = 0;
  {
    std::lock_guard wlock(write_mu_);
    {
      std::lock_guard lock(mu_);
      if (!connected_ || !socket_) conn_error("upstream " + endpoint_.host + ":" + std::to_string(endpoint_.port) + " unavailable");
      sock = socket_;
      id = next_id_++;
      future = pending_[id].get_future();
    }
    try {
      sock->write_blocking(proto::encode_request(proto::Request{id, op, std::move(args)}));
    } catch (const Error&) {
      sock->shutdown();
      std::lock_guard lock(mu_);
      pending_.erase(id);
      throw;
    }
  }
  if (future.wait_for(timeout_) != std::future_status::ready) {
    std::lock_guard lock(mu_);
    pending_.erase(id);
    conn_error("upstream did not answer within " + std::to_string(timeout_.count()) + " ms");
  }
  return future.get();
}

void MultiplexedSession::fail_pending(const std::string& why) {
  std::map<std::uint64_t, std::promise<proto::Response>> pending;
  {
    std::lock_guard lock(mu_);
    pending.swap(pending_);
  }
  for (auto& [id, promise] : pending) promise.set_value(proto::Response::failure(id, ErrorCode::Conn, why));
}

void MultiplexedSession::run() {
  Duration backoff{50};
  const Duration max_backoff{2000};
  const Duration connect_timeout = std::min(timeout_, Duration{1000});
  while (!stopping_) {
    auto sock = std::make_shared<LineSocket>();
    try {
      sock->connect(endpoint_, connect_timeout);
      sock->write(proto::encode_request(proto::Request{1, std::string(proto::kAttachOp), std::nullopt}),
                  connect_timeout);
      const proto::Response r = proto::decode_response(sock->read_line(connect_timeout));
      if (!r.ok()) conn_error("attach refused: " + r.error().message);
    } catch (const Error&) {
      std::unique_lock lock(mu_);
      cv_.wait_for(lock, backoff, [&] { return stopping_.load(); });
      backoff = std::min(backoff * 2, max_backoff);
      continue;
    }

    {
      std::lock_guard lock(mu_);
      socket_ = sock;
      next_id_ = 2;
      connected_ = true;
      connects_.fetch_add(1);
      if (stopping_) sock->shutdown();
    }
    cv_.notify_all();
    backoff = Duration{50};

    std::string why = "upstream connection lost";
    try {
      for (;;) {
        proto::Response r = proto::decode_response(sock->read_line_blocking());
        std::lock_guard lock(mu_);
        auto it = pending_.find(r.id);
        if (it != pending_.end()) {
          it->second.set_value(std::move(r));
          pending_.erase(it);
        }
      }
    } catch (const Error& e) {
      why = e.what();
    }

    {
      std::lock_guard wlock(write_mu_);
      std::lock_guard lock(mu_);
      connected_ = false;
      socket_.reset();
    }
    sock->close();
    fail_pending(why);
  }
}

}  // namespace beamline::client
