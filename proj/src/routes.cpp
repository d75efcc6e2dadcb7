#include "beamline/routes.hpp"

#include <charconv>

namespace beamline::gateway {

namespace {

struct Target {
  std::vector<std::string> segments;
  std::vector<std::pair<std::string, std::string>> query;
};

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string percent_decode(std::string_view s, bool plus_is_space = false) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      const int hi = hex_value(s[i + 1]);
      const int lo = hex_value(s[i + 2]);
      if (hi >= 0 && lo >= 0) {
        out += static_cast<char>(hi * 16 + lo);
        i += 2;
        continue;
      }
    }
    out += plus_is_space && s[i] == '+' ? ' ' : s[i];
  }
  return out;
}

Target split_target(std::string_view target) {
  Target t;
  const auto q = target.find('?');
  std::string_view path = target.substr(0, q);
  std::string_view query = q == std::string_view::npos ? std::string_view{} : target.substr(q + 1);

  while (!path.empty()) {
    const auto slash = path.find('/');
    const std::string_view seg = path.substr(0, slash);
    if (!seg.empty()) t.segments.push_back(percent_decode(seg));
    path = slash == std::string_view::npos ? std::string_view{} : path.substr(slash + 1);
  }
  while (!query.empty()) {
    const auto amp = query.find('&');
    const std::string_view pair = query.substr(0, amp);
    if (!pair.empty()) {
      const auto eq = pair.find('=');
      t.query.emplace_back(percent_decode(pair.substr(0, eq), true),
                           eq == std::string_view::npos ? std::string{} : percent_decode(pair.substr(eq + 1), true));
    }
    query = amp == std::string_view::npos ? std::string_view{} : query.substr(amp + 1);
  }
  return t;
}

std::vector<std::string_view> split_pattern(std::string_view pattern) {
  std::vector<std::string_view> out;
  while (!pattern.empty()) {
    const auto slash = pattern.find('/');
    const std::string_view seg = pattern.substr(0, slash);
    if (!seg.empty()) out.push_back(seg);
    pattern = slash == std::string_view::npos ? std::string_view{} : pattern.substr(slash + 1);
  }
  return out;
}

/// Matches path segments against a pattern, capturing "{name}".
bool path_matches(const std::vector<std::string>& segs, std::string_view pattern, std::optional<std::string>& name) {
  const auto pat = split_pattern(pattern);
  if (pat.size() != segs.size()) return false;
  std::optional<std::string> captured;
  for (std::size_t i = 0; i < pat.size(); ++i) {
    if (pat[i] == "{name}") {
      captured = segs[i];
    } else if (pat[i] != segs[i]) {
      return false;
    }
  }
  name = std::move(captured);
  return true;
}

Json query_value(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::Parse, "query parameter '" + key + "' must be a non-negative integer");
  }
  return v;
}

}  // namespace

const std::vector<RouteInfo>& route_table() {
  static const std::vector<RouteInfo> table{
      {"GET", "/api/ping", "ping"},
      {"GET", "/api/units", "list_units"},
      {"GET", "/api/units/{name}", "unit_state"},
      {"POST", "/api/units/{name}/move", "move_abs"},
      {"POST", "/api/units/{name}/move_rel", "move_rel"},
      {"POST", "/api/units/{name}/stop", "stop"},
      {"POST", "/api/units/{name}/fault", "inject_fault"},
      {"DELETE", "/api/units/{name}/fault", "clear_fault"},
      {"POST", "/api/energy", "set_energy"},
      {"GET", "/api/energy", "get_energy"},
      {"POST", "/api/calc", "calc_positions"},
      {"POST", "/api/fit", "build_fit"},
      {"GET", "/api/fit", "fit_report"},
      {"POST", "/api/mono/params", "set_mono_param"},
      {"POST", "/api/detector/read", "read_detector"},
      {"POST", "/api/scan", "start_scan"},
      {"DELETE", "/api/scan", "abort_scan"},
      {"GET", "/api/scan", "scan_status"},
      {"GET", "/api/scan/points", "scan_points"},
      {"GET", "/api/status", "snapshot"},
  };
  return table;
}

std::optional<RouteMatch> match_route(std::string_view method, std::string_view target, std::string_view body) {
  const Target t = split_target(target);
  for (const auto& route : route_table()) {
    if (route.method != method) continue;
    std::optional<std::string> name;
    if (!path_matches(t.segments, route.pattern, name)) continue;

    RouteMatch m;
    m.op = std::string(route.op);
    m.unwrap_units = route.op == "list_units";
    if (body.find_first_not_of(" \t\r\n") != std::string_view::npos) {
      Json parsed = Json::parse(body.begin(), body.end(), nullptr, false);
      if (parsed.is_discarded() || !parsed.is_object()) {
        throw Error(ErrorCode::Parse, "request body must be a JSON object");
      }
      m.args = std::move(parsed);
    }
    for (const auto& [key, value] : t.query) m.args[key] = query_value(key, value);
    if (name) m.args["unit"] = *name;
    return m;
  }
  return std::nullopt;
}

bool path_known(std::string_view target) {
  const Target t = split_target(target);
  for (const auto& route : route_table()) {
    std::optional<std::string> name;
    if (path_matches(t.segments, route.pattern, name)) return true;
  }
  return false;
}

int http_status(std::string_view code) {
  if (code == "E_NO_UNIT") return 404;
  if (code == "E_BUSY" || code == "E_FAULT" || code == "E_STALE_FIT" || code == "E_NO_SCAN") return 409;
  if (code == "E_RANGE" || code == "E_PARSE" || code == "E_LIMIT" || code == "E_PROTO") return 400;
  if (code == "E_UNSOLVABLE") return 422;
  if (code == "E_CONN") return 502;
  return 500;
}

}  // namespace beamline::gateway
