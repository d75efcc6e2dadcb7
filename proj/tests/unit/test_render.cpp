#include <doctest.h>

#include <thread>

#include "beamline/beamline.hpp"
#include "beamline/cli.hpp"
#include "beamline/message_queue.hpp"

using namespace beamline;
using beamline::cli::render_table;

namespace {

const std::string kHeader = "NAME             KIND      STATE                    POSITION/READING\n";

}  // namespace

TEST_SUITE("render") {

TEST_CASE("empty unit list renders the header only") {
  CHECK(render_table(Json{{"units", Json::array()}}) == kHeader);
  CHECK(render_table(Json::object()) == kHeader);
}

TEST_CASE("rows are sorted by name and faults show their code") {
  const Json snap{{"units",
                   {{{"name", "zeta"}, {"kind", "motor"}, {"state", "moving"}, {"position", 12}, {"fault", nullptr}},
                    {{"name", "alpha"}, {"kind", "motor"}, {"state", "fault"}, {"position", -3}, {"fault", "stall"}},
                    {{"name", "det"}, {"kind", "detector"}, {"state", "ok"}, {"reading", nullptr}, {"fault", nullptr}}}}};
  const std::string text = render_table(snap);
  CHECK(text == kHeader +
                    "alpha            motor     FAULT(stall)             -3\n"
                    "det              detector  OK                       -\n"
                    "zeta             motor     MOVING                   12\n");
}

TEST_CASE("rendering a live snapshot is deterministic") {
  Beamline bl(default_config());
  bl.dispatch(cmd::InjectFault{"grating_enc", "dirty", {}}, [](Reply) {});
  const Json snap = bl.snapshot();
  const std::string a = render_table(snap);
  CHECK(a == render_table(snap));
  CHECK(a.find("FAULT(dirty)") != std::string::npos);
  CHECK(a.rfind(kHeader, 0) == 0);
  std::size_t lines = 0;
  for (char ch : a) lines += ch == '\n';
  CHECK(lines == 6);
}

}

TEST_SUITE("message_queue") {

TEST_CASE("overflow is reported once and closes the queue") {
  MessageQueue q(2);
  CHECK(q.push("a") == MessageQueue::Push::Queued);
  CHECK(q.push("b") == MessageQueue::Push::Queued);
  CHECK(q.push("c") == MessageQueue::Push::Overflow);
  CHECK(q.push("d") == MessageQueue::Push::Closed);
  CHECK(q.overflowed());
  CHECK_FALSE(q.pop(std::chrono::milliseconds(1)).has_value());
}

TEST_CASE("pop delivers in order and wakes on push") {
  MessageQueue q(8);
  q.push("1");
  q.push("2");
  CHECK(q.pop(std::chrono::milliseconds(0)) == "1");
  CHECK(q.pop(std::chrono::milliseconds(0)) == "2");
  CHECK_FALSE(q.pop(std::chrono::milliseconds(1)).has_value());
  std::thread producer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    q.push("late");
  });
  CHECK(q.pop(std::chrono::milliseconds(5000)) == "late");
  producer.join();
  q.close();
  CHECK(q.push("x") == MessageQueue::Push::Closed);
  CHECK_FALSE(q.overflowed());
}

}
