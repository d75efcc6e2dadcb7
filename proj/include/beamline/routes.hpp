#pragma once

// REST surface of the gateway. Each route maps onto exactly one wire op; path
// parameters and query values are merged into the JSON body to form the
// op's arguments.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "beamline/errors.hpp"
#include "beamline/json.hpp"

namespace beamline::gateway {

struct RouteInfo {
  std::string_view method;
  std::string_view pattern;  // "{name}" marks the unit path parameter
  std::string_view op;
};

/// Every route, in documentation order.
const std::vector<RouteInfo>& route_table();

struct RouteMatch {
  std::string op;
  Json args = Json::object();
  /// GET /api/units answers with the bare array rather than {"units": [...]}.
  bool unwrap_units = false;
};

/// nullopt when no route matches (404). Throws Error(E_PARSE) for a body that
/// is not a JSON object or a malformed query value.
std::optional<RouteMatch> match_route(std::string_view method, std::string_view target, std::string_view body);

/// True when the method/path pair exists with some other method (405).
bool path_known(std::string_view target);

/// HTTP status for a wire error code string.
int http_status(std::string_view code);

}  // namespace beamline::gateway
