#include "beamline/gateway.hpp"

#include <sys/socket.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <list>
#include <mutex>
#include <sstream>
#include <thread>

#include "beamline/message_queue.hpp"
#include "beamline/routes.hpp"

namespace beamline::gateway {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using asio::ip::tcp;

namespace {

constexpr std::string_view kBuiltinIndex = R"html(<!doctype html>
<html>
<head>
<meta charset="utf-8">
<title>Beamline</title>
<style>
body { font-family: sans-serif; margin: 2em; }
table { border-collapse: collapse; }
td, th { border: 1px solid #ccc; padding: 4px 8px; text-align: left; }
#banner { color: #b00; }
</style>
</head>
<body>
<h1>Beamline</h1>
<p id="banner"></p>
<p>Energy: <span id="energy">-</span> eV &middot; Scan: <span id="scan">-</span></p>
<table><thead><tr><th>Name</th><th>Kind</th><th>State</th><th>Position / reading</th></tr></thead>
<tbody id="units"></tbody></table>
<script>
function render(s) {
  document.getElementById('energy').textContent = s.energy_ev === null ? '-' : s.energy_ev.toFixed(3);
  document.getElementById('scan').textContent = s.scan.state + ' ' + s.scan.index + '/' + s.scan.total;
  const rows = s.units.map(u => {
    const state = u.fault ? 'FAULT(' + u.fault + ')' : u.state;
    const value = u.kind === 'motor' ? u.position : u.reading;
    return '<tr><td>' + u.name + '</td><td>' + u.kind + '</td><td>' + state + '</td><td>' +
           (value === null ? '-' : value) + '</td></tr>';
  });
  document.getElementById('units').innerHTML = rows.join('');
}
function connect() {
  const ws = new WebSocket((location.protocol === 'https:' ? 'wss://' : 'ws://') + location.host + '/ws');
  ws.onopen = () => { document.getElementById('banner').textContent = ''; };
  ws.onmessage = ev => { const m = JSON.parse(ev.data); if (m.type === 'snapshot' && m.data) render(m.data); };
  ws.onclose = () => { document.getElementById('banner').textContent = 'disconnected'; setTimeout(connect, 1000); };
}
connect();
</script>
</body>
</html>
)html";

std::string_view content_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript; charset=utf-8";
  if (ext == ".css") return "text/css; charset=utf-8";
  if (ext == ".json" || ext == ".map") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  if (ext == ".woff2") return "font/woff2";
  return "application/octet-stream";
}

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

Response make_response(const Request& req, http::status status, std::string body, std::string_view type) {
  Response res{status, req.version()};
  res.set(http::field::server, "beamline-gateway");
  res.set(http::field::content_type, std::string(type));
  res.set(http::field::cache_control, "no-store");
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

Response json_response(const Request& req, int status, const Json& body) {
  return make_response(req, static_cast<http::status>(status), body.dump(-1, ' ', false, Json::error_handler_t::replace),
                       "application/json");
}

Response error_response(const Request& req, int status, std::string_view code, const std::string& message) {
  return json_response(req, status, Json{{"code", code}, {"message", message}});
}

/// Fields that change on every read and carry no operator-visible state.
Json stable_view(Json snapshot) {
  if (snapshot.is_object()) {
    snapshot.erase("uptime_s");
    snapshot.erase("sim_time_s");
  }
  return snapshot;
}

}  // namespace

struct Gateway::Impl {
  struct Subscriber {
    explicit Subscriber(std::size_t limit) : outbox(limit) {}
    MessageQueue outbox;
    tcp::socket::native_handle_type fd = -1;
  };

  struct Worker {
    std::thread thread;
    std::shared_ptr<tcp::socket> socket;
    std::shared_ptr<std::atomic<bool>> finished;
  };

  GatewayOptions opts;
  client::MultiplexedSession upstream;

  asio::io_context io;
  tcp::acceptor acceptor{io};
  std::uint16_t bound_port = 0;
  std::thread accept_thread;
  std::thread poll_thread;

  std::mutex workers_mu;
  std::list<Worker> workers;
  bool stopped = false;
  bool stop_called = false;

  mutable std::mutex subs_mu;
  std::list<std::shared_ptr<Subscriber>> subscribers;
  std::atomic<std::uint64_t> overflow_drops{0};

  std::mutex poll_mu;
  std::condition_variable poll_cv;
  bool poll_stop = false;
  Json last_snapshot;  // guarded by subs_mu

  explicit Impl(GatewayOptions o) : opts(std::move(o)), upstream(opts.upstream, opts.upstream_timeout) {}

  // --- broadcast --------------------------------------------------------------

  void broadcast(const std::string& message) {
    std::lock_guard lock(subs_mu);
    for (auto& sub : subscribers) push(*sub, message);
  }

  void push(Subscriber& sub, const std::string& message) {
    if (sub.outbox.push(message) != MessageQueue::Push::Overflow) return;
    // Slow consumer: drop it. The socket shutdown also unblocks its writer.
    overflow_drops.fetch_add(1);
    ::shutdown(sub.fd, SHUT_RDWR);
  }

  // --- poller -----------------------------------------------------------------

  bool poll_wait(std::chrono::milliseconds d) {
    std::unique_lock lock(poll_mu);
    return !poll_cv.wait_for(lock, d, [&] { return poll_stop; });
  }

  void poll_loop() {
    std::optional<std::uint64_t> scan_id;
    std::size_t next_index = 0;
    std::string last_state;
    std::deque<Json> backlog;
    auto next_snapshot = std::chrono::steady_clock::now();
    constexpr std::size_t kPointsPerTick = 32;

    while (poll_wait(opts.poll_interval)) {
      if (!upstream.connected()) continue;
      try {
        if (backlog.empty()) {
          const auto r = upstream.call("scan_points", Json{{"since", next_index}});
          if (r.ok()) {
            const Json& res = r.result();
            const auto id = res["scan_id"].get<std::uint64_t>();
            const Json& status = res["status"];
            const std::string state = status["state"].get<std::string>();
            if (!scan_id) {
              // First contact: earlier points stay available over REST only.
              scan_id = id;
              next_index = res["points"].size();
              last_state = state;
              baseline = true;
            } else {
              if (id != *scan_id) {
                scan_id = id;
                next_index = 0;
                last_state.clear();
                const auto again = upstream.call("scan_points", Json{{"since", 0}});
                if (!again.ok()) continue;
                for (const auto& p : again.result()["points"]) backlog.push_back(p);
                pending_status_ = again.result()["status"];
              } else {
                for (const auto& p : res["points"]) backlog.push_back(p);
                pending_status_ = status;
              }
            }
          }
        }

        std::size_t sent = 0;
        while (!backlog.empty() && sent < kPointsPerTick) {
          Json msg{{"type", "scan_point"}, {"scan_id", *scan_id}, {"data", std::move(backlog.front())}};
          backlog.pop_front();
          broadcast(msg.dump());
          ++next_index;
          ++sent;
        }
        if (backlog.empty() && !pending_status_.is_null()) {
          const std::string state = pending_status_["state"].get<std::string>();
          if (state != last_state) {
            broadcast(Json{{"type", "scan_status"}, {"data", pending_status_}}.dump());
            last_state = state;
          }
          pending_status_ = Json();
        }

        if (std::chrono::steady_clock::now() >= next_snapshot) {
          next_snapshot = std::chrono::steady_clock::now() + opts.snapshot_interval;
          const auto r = upstream.call("snapshot");
          if (r.ok()) {
            bool changed = false;
            {
              std::lock_guard lock(subs_mu);
              changed = stable_view(r.result()) != stable_view(last_snapshot);
              last_snapshot = r.result();
            }
            if (changed) broadcast(Json{{"type", "snapshot"}, {"data", r.result()}}.dump());
          }
        }
      } catch (const std::exception&) {
        // Upstream trouble; the session reconnects by itself.
      }
    }
  }

  Json pending_status_;
  std::atomic<bool> baseline{false};

  // --- HTTP -------------------------------------------------------------------

  Response handle_api(const Request& req) {
    const std::string method(req.method_string());
    const std::string target(req.target());
    std::optional<RouteMatch> m;
    try {
      m = match_route(method, target, req.body());
    } catch (const Error& e) {
      return error_response(req, 400, to_string(e.code()), e.what());
    }
    if (!m) {
      if (path_known(target)) return error_response(req, 405, "E_PARSE", "method not allowed");
      return error_response(req, 404, "E_PARSE", "no route for " + method + " " + target);
    }

    protocol::Response r;
    try {
      const bool wait = m->args.contains("wait") && m->args["wait"] == true;
      if (wait) {
        // Waiting calls get their own connection so they do not hold up the
        // shared session for everyone else.
        r = client::call_dynamic(opts.upstream, protocol::Request{1, m->op, m->args}, opts.upstream_timeout);
      } else {
        r = upstream.call(m->op, m->args);
      }
    } catch (const Error& e) {
      return error_response(req, http_status(to_string(e.code())), to_string(e.code()), e.what());
    }
    if (!r.ok()) return error_response(req, http_status(r.error().code), r.error().code, r.error().message);
    if (m->unwrap_units) return json_response(req, 200, r.result().value("units", Json::array()));
    return json_response(req, 200, r.result());
  }

  Response handle_static(const Request& req) {
    if (req.method() != http::verb::get && req.method() != http::verb::head) {
      return error_response(req, 405, "E_PARSE", "method not allowed");
    }
    std::string path(req.target());
    path = path.substr(0, path.find('?'));
    if (!opts.static_dir) {
      if (path == "/" || path == "/index.html") {
        return make_response(req, http::status::ok, std::string(kBuiltinIndex), "text/html; charset=utf-8");
      }
      return error_response(req, 404, "E_PARSE", "not found");
    }
    if (path.find("..") != std::string::npos) return error_response(req, 400, "E_PARSE", "bad path");
    if (path.empty() || path.back() == '/') path += "index.html";
    const std::filesystem::path file = *opts.static_dir / path.substr(1);
    std::ifstream in(file, std::ios::binary);
    if (!in) return error_response(req, 404, "E_PARSE", "not found");
    std::ostringstream ss;
    ss << in.rdbuf();
    return make_response(req, http::status::ok, ss.str(), content_type(file));
  }

  Response handle(const Request& req) {
    if (req.method() == http::verb::options) {
      Response res = make_response(req, http::status::no_content, "", "text/plain");
      res.set(http::field::access_control_allow_methods, "GET, POST, DELETE, OPTIONS");
      res.set(http::field::access_control_allow_headers, "Content-Type");
      return res;
    }
    if (req.target().starts_with("/api/")) return handle_api(req);
    return handle_static(req);
  }

  void serve_ws(tcp::socket& sock, const Request& req) {
    websocket::stream<tcp::socket&> ws(sock);
    beast::error_code ec;
    ws.accept(req, ec);
    if (ec) return;
    ws.text(true);

    Json first;
    try {
      const auto r = upstream.call("snapshot");
      if (r.ok()) first = r.result();
    } catch (const Error&) {
    }
    if (first.is_null()) {
      std::lock_guard lock(subs_mu);
      first = last_snapshot;
    }

    auto sub = std::make_shared<Subscriber>(opts.ws_queue_limit);
    sub->fd = sock.native_handle();
    sub->outbox.push(Json{{"type", "snapshot"}, {"data", first}}.dump());
    {
      std::lock_guard lock(subs_mu);
      subscribers.push_back(sub);
    }

    // Reads and writes share this thread; incoming frames (close, ping, or
    // anything else, which is ignored) are handled whenever bytes are waiting.
    beast::flat_buffer inbound;
    for (;;) {
      const std::optional<std::string> message = sub->outbox.pop(std::chrono::milliseconds(100));
      if (sub->outbox.closed()) break;
      if (message) {
        ws.write(asio::buffer(*message), ec);
        if (ec) break;
      }
      if (sock.available(ec) > 0 && !ec) {
        ws.read(inbound, ec);
        inbound.clear();
        if (ec) break;
      }
      if (ec) break;
    }

    {
      std::lock_guard lock(subs_mu);
      subscribers.remove(sub);
    }
    sub->outbox.close();
  }

  void serve(tcp::socket& sock) {
    beast::flat_buffer buffer;
    for (;;) {
      Request req;
      beast::error_code ec;
      http::read(sock, buffer, req, ec);
      if (ec) return;
      if (websocket::is_upgrade(req)) {
        if (req.target() == "/ws") serve_ws(sock, req);
        return;
      }
      Response res = handle(req);
      http::write(sock, res, ec);
      if (ec || !res.keep_alive()) return;
    }
  }

  // --- listener ---------------------------------------------------------------

  void accept_next() {
    acceptor.async_accept([this](boost::system::error_code ec, tcp::socket sock) {
      if (ec) {
        if (ec != asio::error::operation_aborted && acceptor.is_open()) accept_next();
        return;
      }
      spawn(std::move(sock));
      accept_next();
    });
  }

  void spawn(tcp::socket sock) {
    auto shared = std::make_shared<tcp::socket>(std::move(sock));
    auto finished = std::make_shared<std::atomic<bool>>(false);
    std::lock_guard lock(workers_mu);
    for (auto it = workers.begin(); it != workers.end();) {
      if (it->finished->load()) {
        it->thread.join();
        it = workers.erase(it);
      } else {
        ++it;
      }
    }
    if (stopped) return;
    std::thread t([this, shared, finished] {
      try {
        serve(*shared);
      } catch (const std::exception&) {
      }
      boost::system::error_code ignored;
      shared->shutdown(tcp::socket::shutdown_both, ignored);
      finished->store(true);
    });
    workers.push_back(Worker{std::move(t), shared, finished});
  }
};

Gateway::Gateway(GatewayOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
  try {
    const tcp::endpoint ep(asio::ip::make_address(impl_->opts.bind), impl_->opts.port);
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(tcp::acceptor::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen(asio::socket_base::max_listen_connections);
    impl_->bound_port = impl_->acceptor.local_endpoint().port();
  } catch (const boost::system::system_error& e) {
    throw Error(ErrorCode::Io, "cannot listen on " + impl_->opts.bind + ":" + std::to_string(impl_->opts.port) +
                                   ": " + e.what());
  }
}

Gateway::~Gateway() { stop(); }

void Gateway::start() {
  if (impl_->accept_thread.joinable()) return;
  impl_->accept_next();
  impl_->accept_thread = std::thread([this] { impl_->io.run(); });
  impl_->poll_thread = std::thread([this] { impl_->poll_loop(); });
}

void Gateway::stop() {
  if (!impl_ || impl_->stop_called) return;
  impl_->stop_called = true;

  {
    std::lock_guard lock(impl_->poll_mu);
    impl_->poll_stop = true;
  }
  impl_->poll_cv.notify_all();
  if (impl_->poll_thread.joinable()) impl_->poll_thread.join();

  asio::post(impl_->io, [this] {
    boost::system::error_code ignored;
    impl_->acceptor.close(ignored);
  });
  if (impl_->accept_thread.joinable()) {
    impl_->accept_thread.join();
  } else {
    impl_->io.run();
  }

  {
    std::lock_guard lock(impl_->subs_mu);
    for (auto& sub : impl_->subscribers) sub->outbox.close();
  }
  std::list<Impl::Worker> workers;
  {
    std::lock_guard lock(impl_->workers_mu);
    impl_->stopped = true;
    workers.swap(impl_->workers);
  }
  for (auto& w : workers) ::shutdown(w.socket->native_handle(), SHUT_RDWR);
  for (auto& w : workers) w.thread.join();
}

std::uint16_t Gateway::port() const noexcept { return impl_->bound_port; }

std::size_t Gateway::subscriber_count() const {
  std::lock_guard lock(impl_->subs_mu);
  return impl_->subscribers.size();
}

std::uint64_t Gateway::overflow_drops() const noexcept { return impl_->overflow_drops.load(); }

bool Gateway::upstream_connected() const noexcept { return impl_->upstream.connected(); }

bool Gateway::ready() const noexcept { return impl_->baseline.load(); }

}  // namespace beamline::gateway
