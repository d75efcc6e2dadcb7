#include "beamline/protocol.hpp"

namespace beamline::protocol {

namespace {

std::string dump_line(const Json& j) {
  std::string out = j.dump(-1, ' ', false, Json::error_handler_t::replace);
  out += '\n';
  return out;
}

Json parse_line(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.size() > kMaxLineBytes) throw ParseError(0, "line exceeds 64 KiB");
  if (line.find('\n') != std::string_view::npos) throw ParseError(0, "embedded line feed");
  Json j = Json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded()) throw ParseError(0, "malformed JSON");
  if (!j.is_object()) throw ParseError(0, "message must be a JSON object");
  return j;
}

std::uint64_t read_id(const Json& j) {
  auto it = j.find("id");
  if (it == j.end()) throw ParseError(0, "missing 'id'");
  if (!it->is_number_unsigned()) throw ParseError(0, "'id' must be an unsigned integer");
  return it->get<std::uint64_t>();
}

}  // namespace

Response Response::from_reply(std::uint64_t id, const Reply& reply) {
  if (reply.ok) return success(id, reply.result);
  return failure(id, reply.code, reply.message);
}

std::string encode_request(const Request& r) {
  Json j{{"id", r.id}, {"op", r.op}};
  if (r.args) j["args"] = *r.args;
  return dump_line(j);
}

std::string encode_response(const Response& r) {
  Json j{{"id", r.id}, {"ok", r.ok()}};
  if (r.ok()) {
    j["result"] = r.result();
  } else {
    j["error"] = Json{{"code", r.error().code}, {"message", r.error().message}};
  }
  return dump_line(j);
}

Request decode_request(std::string_view line) {
  const Json j = parse_line(line);
  Request r;
  r.id = read_id(j);

  auto op = j.find("op");
  if (op == j.end() || !op->is_string()) throw ParseError(r.id, "'op' must be a string");
  r.op = op->get<std::string>();
  if (r.op.empty()) throw ParseError(r.id, "'op' must not be empty");

  auto args = j.find("args");
  if (args != j.end() && !args->is_null()) {
    if (!args->is_object()) throw ParseError(r.id, "'args' must be an object");
    r.args = *args;
  }
  return r;
}

Response decode_response(std::string_view line) {
  const Json j = parse_line(line);
  const std::uint64_t id = read_id(j);
  auto ok = j.find("ok");
  if (ok == j.end() || !ok->is_boolean()) throw ParseError(id, "'ok' must be a boolean");

  const bool has_result = j.contains("result");
  const bool has_error = j.contains("error");
  if (ok->get<bool>()) {
    if (!has_result || has_error) throw ParseError(id, "ok response needs 'result' only");
    const Json& result = j["result"];
    if (!result.is_object()) throw ParseError(id, "'result' must be an object");
    return Response::success(id, result);
  }
  if (!has_error || has_result) throw ParseError(id, "error response needs 'error' only");
  const Json& err = j["error"];
  if (!err.is_object() || !err.contains("code") || !err["code"].is_string() || !err.contains("message") ||
      !err["message"].is_string()) {
    throw ParseError(id, "'error' must carry string 'code' and 'message'");
  }
  return Response{id, ErrorBody{err["code"].get<std::string>(), err["message"].get<std::string>()}};
}

Command to_command(const Request& request) {
  try {
    return decode_command(request.op, request.args ? *request.args : Json());
  } catch (const Error& e) {
    throw ParseError(request.id, e.what());
  }
}

}  // namespace beamline::protocol
