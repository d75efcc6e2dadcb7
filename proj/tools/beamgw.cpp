// Standalone HTTP/WS gateway in front of a running device server.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "beamline/gateway.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Beamline HTTP/WebSocket gateway", "beamgw"};
  beamline::gateway::GatewayOptions opts;
  std::string static_dir;
  app.add_option("--bind", opts.bind)->capture_default_str();
  app.add_option("--port", opts.port, "HTTP port (0 = ephemeral)")->capture_default_str();
  app.add_option("--upstream-host", opts.upstream.host)->capture_default_str();
  app.add_option("--upstream-port", opts.upstream.port)->capture_default_str();
  app.add_option("--static-dir", static_dir, "Console assets served at /")->check(CLI::ExistingDirectory);
  CLI11_PARSE(app, argc, argv);
  if (!static_dir.empty()) opts.static_dir = static_dir;

  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
  std::signal(SIGPIPE, SIG_IGN);

  try {
    beamline::gateway::Gateway gw(opts);
    gw.start();
    std::cout << "beamgw http=" << gw.port() << " upstream=" << opts.upstream.host << ':' << opts.upstream.port
              << std::endl;
    int sig = 0;
    sigwait(&stop_signals, &sig);
    gw.stop();
  } catch (const std::exception& e) {
    std::cerr << "beamgw: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
