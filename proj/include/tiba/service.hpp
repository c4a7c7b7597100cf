#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tiba/sim.hpp"

namespace tiba::service {

inline constexpr unsigned short kDefaultPort = 8473;

/// Port from TIBA_SIM_PORT, or `fallback` when unset. Throws ConfigError for
/// a value that is not a port number.
unsigned short port_from_env(unsigned short fallback = kDefaultPort);

struct TeleopMsg {
  TeleopInput input;
};
struct RelayMsg {
  std::string name;
  bool on = false;
};
struct ModeMsg {
  NavMode mode = NavMode::kTeleop;
};
using ClientMessage = std::variant<TeleopMsg, RelayMsg, ModeMsg>;

/// Throws MalformedFrame for anything that is not a known command object.
ClientMessage parse_client_message(std::string_view text);
std::string encode_client_message(const ClientMessage& msg);

/// One text message per record type: pose, scan, thermal, vss, then one per event.
std::vector<std::string> encode_telemetry(const TelemetrySnapshot& snap);

/// WebSocket endpoint on its own I/O thread. Every connected client receives
/// every broadcast; slow clients drop the oldest queued messages.
class TelemetryServer {
 public:
  using MessageHandler = std::function<void(const ClientMessage&)>;
  using DisconnectHandler = std::function<void()>;

  /// Port 0 binds an ephemeral port; see port().
  TelemetryServer(const std::string& address, unsigned short port, MessageHandler on_message,
                  DisconnectHandler on_disconnect = {});
  ~TelemetryServer();
  TelemetryServer(const TelemetryServer&) = delete;
  TelemetryServer& operator=(const TelemetryServer&) = delete;

  unsigned short port() const;
  std::size_t client_count() const;
  void broadcast(std::vector<std::string> messages);
  void stop();

  struct Impl;

 private:
  std::shared_ptr<Impl> impl_;
};

/// Routes client commands into the simulation inbox.
TelemetryServer::MessageHandler simulation_handler(Simulation& sim);

/// Steps `sim` paced to wall time (scaled by `speed`) and broadcasts telemetry
/// snapshots until the run finishes or `stop` is set.
void serve_run(Simulation& sim, TelemetryServer& server, double speed = 1.0,
               const std::atomic<bool>* stop = nullptr);

/// Streams the telemetry content of a recorded log at its original pace.
void serve_replay(const RunLog& log, TelemetryServer& server, double speed = 1.0,
                  const std::atomic<bool>* stop = nullptr);

}  // namespace tiba::service
