#include "beamline/device_server.hpp"

#include <chrono>

namespace beamline {

namespace {

std::mutex g_instance_mu;
std::unique_ptr<DeviceServer> g_instance;

}  // namespace

DeviceServer::DeviceServer(BeamlineConfig cfg, ClockDrive drive)
    : initial_cfg_(cfg), drive_(drive), beamline_(std::move(cfg)),
      clock_(initial_cfg_.clock.mode, initial_cfg_.clock.factor) {
  loop_ = std::thread([this] { run(); });
}

DeviceServer::~DeviceServer() { shutdown(); }

DeviceServer& DeviceServer::init_once(const BeamlineConfig& cfg) {
  std::lock_guard lock(g_instance_mu);
  if (!g_instance) g_instance = std::make_unique<DeviceServer>(cfg);
  return *g_instance;
}

DeviceServer* DeviceServer::instance() noexcept {
  std::lock_guard lock(g_instance_mu);
  return g_instance.get();
}

void DeviceServer::post(Task task) {
  {
    std::lock_guard lock(mu_);
    if (stopping_) throw Error(ErrorCode::Internal, "device server is shut down");
    tasks_.push_back(std::move(task));
  }
  cv_.notify_one();
}

std::future<Reply> DeviceServer::submit(Command command) {
  auto promise = std::make_shared<std::promise<Reply>>();
  auto future = promise->get_future();
  try {
    post([promise, command = std::move(command)](Beamline& bl) {
      // Deferred replies may arrive on a later tick; the shared promise keeps
      // the channel alive until then. A second delivery is ignored.
      auto delivered = std::make_shared<bool>(false);
      bl.dispatch(command, [promise, delivered](Reply r) {
        if (*delivered) return;
        *delivered = true;
        promise->set_value(std::move(r));
      });
    });
  } catch (const Error& e) {
    promise->set_value(Reply::failure(e.code(), e.what()));
  }
  return future;
}

Reply DeviceServer::call(Command command) { return submit(std::move(command)).get(); }

void DeviceServer::advance_sim(double dt) {
  if (drive_ != ClockDrive::Manual) throw Error(ErrorCode::Internal, "advance_sim needs a manual clock");
  inspect([](const Beamline&) {});  // flush pending commands first
  std::promise<void> done;
  post([&done, dt](Beamline& bl) {
    bl.advance(dt);
    done.set_value();
  });
  done.get_future().get();
}

void DeviceServer::shutdown() {
  {
    std::lock_guard lock(mu_);
    if (stopping_) {
      if (!loop_.joinable()) return;
    }
    stopping_ = true;
  }
  cv_.notify_one();
  if (loop_.joinable() && loop_.get_id() != std::this_thread::get_id()) loop_.join();
}

void DeviceServer::run() {
  using Clock = std::chrono::steady_clock;
  const auto tick = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(initial_cfg_.clock.tick_s));
  auto last = Clock::now();
  auto next_tick = last + tick;

  for (;;) {
    std::deque<Task> batch;
    bool stop = false;
    {
      std::unique_lock lock(mu_);
      cv_.wait_until(lock, next_tick, [&] { return stopping_ || !tasks_.empty(); });
      batch.swap(tasks_);
      stop = stopping_;
    }

    const auto now = Clock::now();
    if (drive_ == ClockDrive::Wall) {
      const double sim_dt = clock_.to_sim(std::chrono::duration<double>(now - last).count());
      beamline_.advance(sim_dt);
      clock_.advance(sim_dt);
    }
    last = now;
    if (now >= next_tick) next_tick = now + tick;

    for (auto& task : batch) task(beamline_);
    if (stop) break;
  }

  // Anyone still waiting on a deferred reply gets an answer rather than a hang.
  beamline_.fail_pending(Reply::failure(ErrorCode::Internal, "device server shut down"));
}

}  // namespace beamline
