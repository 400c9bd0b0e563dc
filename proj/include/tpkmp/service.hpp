#pragma once

#include <filesystem>
#include <memory>
#include <string>

namespace tpkmp {

struct ServiceOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  std::filesystem::path data_dir = "tpkmp_data";
  int threads = 2;
};

/// HTTP + WebSocket front end over Session.
///
///   POST /scenarios                  scenario JSON -> {"id", "config_hash"}
///   GET  /scenarios/{id}
///   POST /models/train               {"scenario_id"} -> {"id"}
///   GET  /models/{id}                model JSON
///   POST /sessions                   {"model_id", "frames"?, "cfg"?, "options"?, "speed"?} -> {"id"}
///   GET  /sessions/{id}              status
///   POST /sessions/{id}/start|pause|reset
///   POST /sessions/{id}/events       one session event
///   GET  /sessions/{id}/trace?from=k
///   GET  /sessions/{id}/log          replayable event log
///   WS   /sessions/{id}/live         state stream out, events in
///
/// Each session owns one simulation thread; handlers only enqueue events for it.
class Service {
 public:
  explicit Service(ServiceOptions opt);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and starts serving; throws std::system_error when the port is taken.
  void start();
  void stop();
  /// Blocks until stop() is called from another thread or a signal arrives.
  void wait();
  unsigned short port() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace tpkmp
