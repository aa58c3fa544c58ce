#include <httplib.h>

#include <sys/resource.h>
#include <sys/syscall.h>
#include <unistd.h>

#include <algorithm>

#include "gaze/error.hpp"
#include "gaze/runtime.hpp"

namespace gaze {

struct StreamServer::Impl {
  httplib::Server server;
  std::atomic<bool> stopping{false};
};

namespace {

constexpr auto kPollInterval = std::chrono::milliseconds(100);
constexpr std::size_t kWriteSlice = 16 * 1024;

std::string part_header(std::size_t length) {
  return "--" + std::string(kStreamBoundary) + "\r\nContent-Type: image/x-portable-pixmap\r\nContent-Length: " +
         std::to_string(length) + "\r\n\r\n";
}

}  // namespace

StreamServer::StreamServer(std::shared_ptr<LatestFrameSlot> slot)
    : slot_(std::move(slot)), impl_(std::make_unique<Impl>()) {
  if (!slot_) throw Error(ErrorCode::InvalidArgument, "stream server needs a frame slot");
  auto& svr = impl_->server;
  // Without SO_REUSEPORT a second server on a busy port fails to bind.
  svr.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });
  Impl* impl = impl_.get();
  auto slot_ref = slot_;

  svr.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });

  svr.Get("/frame", [slot_ref](const httplib::Request&, httplib::Response& res) {
    const auto snap = slot_ref->latest();
    if (!snap.ppm) {
      res.status = 503;
      res.set_content("NoFrameYet", "text/plain");
      return;
    }
    res.set_content(*snap.ppm, "image/x-portable-pixmap");
  });

  svr.Get("/stream", [slot_ref, impl](const httplib::Request&, httplib::Response& res) {
    auto last = std::make_shared<std::uint64_t>(0);
    res.set_content_provider(
        "multipart/x-mixed-replace; boundary=" + std::string(kStreamBoundary),
        [slot_ref, impl, last](std::size_t, httplib::DataSink& sink) {
          if (impl->stopping || slot_ref->closed()) {
            sink.done();
            return true;
          }
          // Always the newest frame; anything published in between is skipped.
          const auto snap = slot_ref->wait_newer(*last, kPollInterval);
          if (!snap.ppm || snap.sequence == *last) return sink.is_writable();
          *last = snap.sequence;
          const auto header = part_header(snap.ppm->size());
          // Small slices so stop() does not wait for a slow reader to drain a whole frame.
          const auto send = [&](const char* p, std::size_t n) {
            for (std::size_t off = 0; off < n; off += kWriteSlice) {
              if (impl->stopping) return false;
              if (!sink.write(p + off, std::min(kWriteSlice, n - off))) return false;
            }
            return true;
          };
          return send(header.data(), header.size()) && send(snap.ppm->data(), snap.ppm->size()) && send("\r\n", 2);
        });
  });
}

StreamServer::~StreamServer() { stop(); }

void StreamServer::start(const std::string& host, int port) {
  if (thread_.joinable()) throw Error(ErrorCode::InvalidArgument, "server already started");
  auto& svr = impl_->server;
  impl_->stopping = false;
  if (port == 0) {
    port_ = svr.bind_to_any_port(host);
    if (port_ <= 0) throw Error(ErrorCode::BindFailure, "cannot bind " + host);
  } else {
    if (!svr.bind_to_port(host, port)) {
      throw Error(ErrorCode::BindFailure, "cannot bind " + host + ":" + std::to_string(port));
    }
    port_ = port;
  }
  thread_ = std::thread([&svr] {
    // Worker threads inherit this niceness, so serving yields the CPU to the pipeline.
    setpriority(PRIO_PROCESS, static_cast<id_t>(syscall(SYS_gettid)), 10);
    svr.listen_after_bind();
  });
  svr.wait_until_ready();
}

void StreamServer::stop() {
  if (!thread_.joinable()) return;
  impl_->stopping = true;
  impl_->server.stop();
  thread_.join();
}

bool StreamServer::running() const { return thread_.joinable() && impl_->server.is_running(); }

}  // namespace gaze
