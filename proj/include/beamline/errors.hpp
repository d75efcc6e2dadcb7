#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace beamline {

/// Wire-level error vocabulary. Every failure that crosses a module boundary
/// is reduced to one of these codes before it reaches a client.
enum class ErrorCode {
  NoUnit,
  Limit,
  Busy,
  Fault,
  Range,
  Unsolvable,
  StaleFit,
  NoScan,
  Parse,
  Proto,
  Conn,
  Io,
  Internal,
};

/// "E_NO_UNIT", "E_LIMIT", ...
std::string_view to_string(ErrorCode code) noexcept;
std::optional<ErrorCode> error_code_from_string(std::string_view text) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace beamline
