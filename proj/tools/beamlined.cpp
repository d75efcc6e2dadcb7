// Device server daemon: TCP control port plus, unless disabled, the HTTP/WS
// gateway talking to that port over the wire protocol.

#include <csignal>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "beamline/config.hpp"
#include "beamline/device_server.hpp"
#include "beamline/gateway.hpp"
#include "beamline/tcp_server.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Beamline device server", "beamlined"};
  std::string config_path;
  std::optional<std::string> bind;
  std::optional<std::uint16_t> tcp_port;
  std::optional<std::uint16_t> http_port;
  std::optional<double> clock_factor;
  std::string static_dir;
  bool no_gateway = false;
  app.add_option("-c,--config", config_path, "Beamline config (JSON, comments allowed)")->check(CLI::ExistingFile);
  app.add_option("--bind", bind, "Listen address for both ports");
  app.add_option("--port", tcp_port, "TCP control port (0 = ephemeral)");
  app.add_option("--http-port", http_port, "Gateway HTTP port (0 = ephemeral)");
  app.add_option("--clock-factor", clock_factor, "Run the simulation clock scaled by this factor");
  app.add_option("--static-dir", static_dir, "Console assets served at /")->check(CLI::ExistingDirectory);
  app.add_flag("--no-gateway", no_gateway, "Do not start the HTTP/WS gateway");
  CLI11_PARSE(app, argc, argv);

  // Block the stop signals before any thread starts so only sigwait sees them.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
  std::signal(SIGPIPE, SIG_IGN);

  try {
    beamline::BeamlineConfig cfg = config_path.empty() ? beamline::default_config() : beamline::load_config(config_path);
    if (bind) cfg.server.bind = *bind;
    if (tcp_port) cfg.server.tcp_port = *tcp_port;
    if (http_port) cfg.server.http_port = *http_port;
    if (clock_factor) {
      cfg.clock.mode = beamline::sim::ClockMode::Scaled;
      cfg.clock.factor = *clock_factor;
    }
    beamline::validate(cfg);

    beamline::DeviceServer& device = beamline::DeviceServer::init_once(cfg);
    beamline::TcpServer tcp(device, cfg.server.bind, cfg.server.tcp_port);
    tcp.start();

    std::optional<beamline::gateway::Gateway> gw;
    if (!no_gateway) {
      beamline::gateway::GatewayOptions opts;
      opts.bind = cfg.server.bind;
      opts.port = cfg.server.http_port;
      opts.upstream = {cfg.server.bind == "0.0.0.0" ? "127.0.0.1" : cfg.server.bind, tcp.port()};
      if (!static_dir.empty()) opts.static_dir = static_dir;
      gw.emplace(opts);
      gw->start();
    }

    std::cout << "beamlined " << cfg.name << " tcp=" << tcp.port();
    if (gw) std::cout << " http=" << gw->port();
    std::cout << std::endl;

    int sig = 0;
    sigwait(&stop_signals, &sig);

    if (gw) gw->stop();
    tcp.stop();
    device.shutdown();
  } catch (const beamline::ConfigError& e) {
    std::cerr << "invalid config:\n";
    for (const auto& d : e.diagnostics()) std::cerr << "  " << d << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "beamlined: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
