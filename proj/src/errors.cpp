#include "beamline/errors.hpp"

#include <array>
#include <utility>

namespace beamline {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 13> kNames{{
    {ErrorCode::NoUnit, "E_NO_UNIT"},
    {ErrorCode::Limit, "E_LIMIT"},
    {ErrorCode::Busy, "E_BUSY"},
    {ErrorCode::Fault, "E_FAULT"},
    {ErrorCode::Range, "E_RANGE"},
    {ErrorCode::Unsolvable, "E_UNSOLVABLE"},
    {ErrorCode::StaleFit, "E_STALE_FIT"},
    {ErrorCode::NoScan, "E_NO_SCAN"},
    {ErrorCode::Parse, "E_PARSE"},
    {ErrorCode::Proto, "E_PROTO"},
    {ErrorCode::Conn, "E_CONN"},
    {ErrorCode::Io, "E_IO"},
    {ErrorCode::Internal, "E_INTERNAL"},
}};

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "E_INTERNAL";
}

std::optional<ErrorCode> error_code_from_string(std::string_view text) noexcept {
  for (const auto& [c, name] : kNames) {
    if (name == text) return c;
  }
  return std::nullopt;
}

}  // namespace beamline
