// Thin binding layer. JSON crosses the boundary as text; the Python package
// turns it into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "beamline/client.hpp"
#include "beamline/config.hpp"
#include "beamline/device_server.hpp"
#include "beamline/kinematics.hpp"
#include "beamline/protocol.hpp"
#include "beamline/tcp_server.hpp"

namespace py = pybind11;
namespace kin = beamline::kinematics;
namespace proto = beamline::protocol;
using beamline::Json;

namespace {

std::optional<Json> parse_args(const std::optional<std::string>& text) {
  if (!text) return std::nullopt;
  return Json::parse(*text);
}

py::dict solution_dict(const kin::OpticsSolution& s) {
  py::dict d;
  d["energy_ev"] = s.energy;
  d["alpha_deg"] = s.alpha_deg;
  d["beta_deg"] = s.beta_deg;
  d["mirror_deg"] = s.mirror_grazing_deg;
  d["grating_exit_deg"] = s.grating_exit_grazing_deg;
  return d;
}

std::string response_text(const proto::Response& r) {
  std::string line = proto::encode_response(r);
  line.pop_back();
  return line;
}

/// Device server plus TCP listener owned by the Python object.
class EmbeddedServer {
 public:
  EmbeddedServer(const std::optional<std::string>& config_path, double clock_factor, std::uint16_t port) {
    beamline::BeamlineConfig cfg = config_path ? beamline::load_config(*config_path) : beamline::default_config();
    if (clock_factor > 0) {
      cfg.clock.mode = beamline::sim::ClockMode::Scaled;
      cfg.clock.factor = clock_factor;
    }
    device_ = std::make_unique<beamline::DeviceServer>(std::move(cfg));
    tcp_ = std::make_unique<beamline::TcpServer>(*device_, "127.0.0.1", port);
    tcp_->start();
  }
  ~EmbeddedServer() { stop(); }

  std::uint16_t port() const { return port_cache_ ? port_cache_ : tcp_->port(); }
  std::uint64_t accept_count() const { return tcp_ ? tcp_->accept_count() : 0; }

  void stop() {
    if (!tcp_) return;
    port_cache_ = tcp_->port();
    tcp_->stop();
    device_->shutdown();
    tcp_.reset();
    device_.reset();
  }

 private:
  std::unique_ptr<beamline::DeviceServer> device_;
  std::unique_ptr<beamline::TcpServer> tcp_;
  std::uint16_t port_cache_ = 0;
};

}  // namespace

PYBIND11_MODULE(_beamline, m) {
  static py::exception<beamline::Error> error_type(m, "BeamlineError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const beamline::Error& e) {
      py::tuple args = py::make_tuple(std::string(beamline::to_string(e.code())), e.what());
      PyErr_SetObject(error_type.ptr(), args.ptr());
    } catch (const kin::KinematicsError& e) {
      PyErr_SetString(PyExc_ValueError, (std::string(kin::to_string(e.failure())) + ": " + e.what()).c_str());
    } catch (const Json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  py::class_<kin::MonoConfig>(m, "MonoConfig")
      .def(py::init<>())
      .def_readwrite("line_density", &kin::MonoConfig::line_density)
      .def_readwrite("order", &kin::MonoConfig::order)
      .def_readwrite("fixed_focus_ratio", &kin::MonoConfig::fixed_focus_ratio)
      .def_readwrite("energy_min", &kin::MonoConfig::energy_min)
      .def_readwrite("energy_max", &kin::MonoConfig::energy_max)
      .def_readwrite("hc", &kin::MonoConfig::hc)
      .def("validate", &kin::MonoConfig::validate);

  m.def("solve", [](const kin::MonoConfig& cfg, double e) { return solution_dict(kin::solve_diffraction(cfg, e)); },
        py::arg("cfg"), py::arg("energy_ev"));
  m.def("energy_from_beta", &kin::energy_from_beta, py::arg("cfg"), py::arg("beta_deg"));
  m.def(
      "fit_table",
      [](const kin::MonoConfig& cfg, double lo, double hi, std::size_t n) {
        const auto fits = kin::build_fit_table(cfg, lo, hi, n);
        auto one = [](const kin::CubicFit& f) {
          py::dict d;
          d["coefficients"] = f.coefficients;
          d["e_lo"] = f.e_lo;
          d["e_hi"] = f.e_hi;
          d["max_residual_deg"] = f.max_residual_deg;
          return d;
        };
        const auto report = kin::fit_error_report(cfg, fits, 1000);
        py::dict d;
        d["mirror"] = one(fits.mirror);
        d["grating"] = one(fits.grating);
        d["mirror_max_dev_deg"] = report.mirror.max_dev_deg;
        d["grating_max_dev_deg"] = report.grating.max_dev_deg;
        return d;
      },
      py::arg("cfg"), py::arg("e_lo"), py::arg("e_hi"), py::arg("n"));

  m.def(
      "encode_request",
      [](std::uint64_t id, const std::string& op, const std::optional<std::string>& args) {
        return proto::encode_request(proto::Request{id, op, parse_args(args)});
      },
      py::arg("id"), py::arg("op"), py::arg("args_json") = py::none());
  m.def(
      "decode_request",
      [](const std::string& line) {
        const auto r = proto::decode_request(line);
        return py::make_tuple(r.id, r.op, r.args ? py::object(py::str(r.args->dump())) : py::object(py::none()));
      },
      py::arg("line"));
  m.def(
      "roundtrip_response", [](const std::string& line) { return response_text(proto::decode_response(line)); },
      py::arg("line"));

  m.def(
      "call_dynamic",
      [](const std::string& host, std::uint16_t port, const std::string& op, const std::optional<std::string>& args) {
        py::gil_scoped_release release;
        return response_text(beamline::client::call_dynamic({host, port}, proto::Request{1, op, parse_args(args)}));
      },
      py::arg("host"), py::arg("port"), py::arg("op"), py::arg("args_json") = py::none());

  py::class_<beamline::client::Session>(m, "Session")
      .def(py::init([](const std::string& host, std::uint16_t port) {
             py::gil_scoped_release release;
             return beamline::client::Session::open({host, port});
           }),
           py::arg("host"), py::arg("port"))
      .def(
          "call",
          [](beamline::client::Session& s, const std::string& op, const std::optional<std::string>& args) {
            py::gil_scoped_release release;
            return response_text(s.call(op, parse_args(args)));
          },
          py::arg("op"), py::arg("args_json") = py::none())
      .def("close", &beamline::client::Session::close)
      .def_property_readonly("is_open", &beamline::client::Session::is_open);

  py::class_<EmbeddedServer>(m, "Server")
      .def(py::init<const std::optional<std::string>&, double, std::uint16_t>(), py::arg("config_path") = py::none(),
           py::arg("clock_factor") = 0.0, py::arg("port") = 0)
      .def_property_readonly("port", &EmbeddedServer::port)
      .def_property_readonly("accept_count", &EmbeddedServer::accept_count)
      .def("stop", &EmbeddedServer::stop, py::call_guard<py::gil_scoped_release>());
}
