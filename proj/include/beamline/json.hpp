#pragma once

#include <json.hpp>

namespace beamline {

/// Insertion-ordered JSON; wire output keeps the documented key order.
using Json = nlohmann::ordered_json;

}  // namespace beamline
