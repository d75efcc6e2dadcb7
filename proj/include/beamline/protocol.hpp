#pragma once

// Line-delimited JSON wire format. One object per LF-terminated line:
//   request   {"id":<u64>,"op":"<name>","args":{...}}         (args optional)
//   response  {"id":<u64>,"ok":true,"result":{...}}
//             {"id":<u64>,"ok":false,"error":{"code":"E_*","message":"..."}}
// Keys are written in exactly that order. Id 0 is reserved for errors the
// server raises before it could read a request id.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "beamline/command.hpp"
#include "beamline/errors.hpp"
#include "beamline/json.hpp"

namespace beamline::protocol {

inline constexpr std::size_t kMaxLineBytes = 64 * 1024;
inline constexpr std::string_view kAttachOp = "attach";

struct Request {
  std::uint64_t id = 0;
  std::string op;
  std::optional<Json> args;  // an object when present

  bool operator==(const Request&) const = default;
};

struct ErrorBody {
  std::string code;
  std::string message;

  bool operator==(const ErrorBody&) const = default;
};

struct Response {
  std::uint64_t id = 0;
  std::variant<Json, ErrorBody> body;

  bool ok() const noexcept { return body.index() == 0; }
  const Json& result() const { return std::get<Json>(body); }
  const ErrorBody& error() const { return std::get<ErrorBody>(body); }

  static Response success(std::uint64_t id, Json result) { return Response{id, std::move(result)}; }
  static Response failure(std::uint64_t id, ErrorCode code, std::string message) {
    return Response{id, ErrorBody{std::string(to_string(code)), std::move(message)}};
  }
  static Response from_reply(std::uint64_t id, const Reply& reply);

  bool operator==(const Response&) const = default;
};

/// E_PARSE, remembering the request id when it could be read (else 0).
class ParseError : public Error {
 public:
  ParseError(std::uint64_t id, const std::string& what) : Error(ErrorCode::Parse, what), id_(id) {}
  std::uint64_t id() const noexcept { return id_; }

 private:
  std::uint64_t id_;
};

/// Canonical line, including the trailing LF.
std::string encode_request(const Request& request);
std::string encode_response(const Response& response);

/// Accepts one line with or without its LF. Throws ParseError only.
Request decode_request(std::string_view line);
Response decode_response(std::string_view line);

/// Turns a request into a typed command; throws ParseError carrying the id.
Command to_command(const Request& request);

}  // namespace beamline::protocol
