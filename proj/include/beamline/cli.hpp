#pragma once

// beamctl: operator client for the device server.

#include <iosfwd>
#include <string>
#include <vector>

#include "beamline/json.hpp"

namespace beamline::cli {

/// args excludes the program name. Exit codes: 0 success, 1 server-reported
/// error (code printed to err), 2 usage or connection error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Fixed-column unit table (NAME KIND STATE POSITION/READING), rows sorted by
/// name. A faulted unit shows FAULT(code) in the STATE column.
std::string render_table(const Json& snapshot);

}  // namespace beamline::cli
