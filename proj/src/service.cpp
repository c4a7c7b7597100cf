#include "tiba/service.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <cstdlib>
#include <deque>
#include <json.hpp>
#include <mutex>
#include <set>
#include <thread>

#include "tiba/error.hpp"

namespace tiba::service {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

unsigned short port_from_env(unsigned short fallback) {
  const char* env = std::getenv("TIBA_SIM_PORT");
  if (env == nullptr || *env == '\0') return fallback;
  try {
    std::size_t used = 0;
    const long v = std::stol(env, &used);
    if (used != std::string_view(env).size() || v < 0 || v > 65535) throw std::out_of_range("port");
    return static_cast<unsigned short>(v);
  } catch (const std::exception&) {
    throw ConfigError(std::string("TIBA_SIM_PORT is not a port number: ") + env);
  }
}

// ---------------------------------------------------------------------------
// Wire format

ClientMessage parse_client_message(std::string_view text) {
  try {
    const json j = json::parse(text);
    const auto type = j.at("type").get<std::string>();
    if (type == "teleop") {
      TeleopMsg m;
      m.input.axis_forward = j.value("forward", 0.0);
      m.input.axis_turn = j.value("turn", 0.0);
      m.input.deadman = j.value("deadman", false);
      m.input.gain_step = parse_gain_step(j.value("gain_step", std::string("none")));
      return m;
    }
    if (type == "relay") return RelayMsg{j.at("name").get<std::string>(), j.at("on").get<bool>()};
    if (type == "mode") return ModeMsg{parse_nav_mode(j.at("mode").get<std::string>())};
    throw MalformedFrame("unknown command type: " + type);
  } catch (const json::exception& e) {
    throw MalformedFrame(std::string("bad command: ") + e.what());
  } catch (const ConfigError& e) {
    throw MalformedFrame(std::string("bad command: ") + e.what());
  }
}

std::string encode_client_message(const ClientMessage& msg) {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, TeleopMsg>) {
          return json{{"type", "teleop"},
                      {"forward", m.input.axis_forward},
                      {"turn", m.input.axis_turn},
                      {"deadman", m.input.deadman},
                      {"gain_step", to_string(m.input.gain_step)}}
              .dump();
        } else if constexpr (std::is_same_v<T, RelayMsg>) {
          return json{{"type", "relay"}, {"name", m.name}, {"on", m.on}}.dump();
        } else {
          return json{{"type", "mode"}, {"mode", to_string(m.mode)}}.dump();
        }
      },
      msg);
}

namespace {

json vss_json(double t, const VssState& v) {
  json relays = json::object();
  for (const auto& [name, on] : v.relays) relays[name] = on;
  return {{"type", "vss"},
          {"t", t},
          {"battery_voltage", v.battery_voltage},
          {"soc", v.state_of_charge},
          {"bus48_current", v.bus48_current},
          {"bus12_current", v.bus12_current},
          {"relays", relays},
          {"internal_temp", v.internal_temp},
          {"internal_humidity", v.internal_humidity},
          {"energy_used_wh", v.energy_used_wh}};
}

json scan_json(double t, const LidarScan& s) {
  return {{"type", "scan"},
          {"t", t},
          {"angle_min", s.angle_min},
          {"angle_increment", s.angle_increment()},
          {"max_range", s.max_range},
          {"ranges", s.ranges}};
}

json thermal_json(double t, const ThermalRec& r) {
  return {{"type", "thermal"}, {"t", t},         {"width", r.width},
          {"height", r.height}, {"min", r.min_c}, {"max", r.max_c},
          {"data", base64_encode(r.pixels)}};
}

json event_json(double t, const EventRec& e) {
  return {{"type", "event"}, {"t", t}, {"name", e.name}, {"detail", e.detail}};
}

json pose_json(double t, const Pose2D& p, const Twist& actual, std::string_view mode) {
  return {{"type", "pose"}, {"t", t},          {"x", p.x},          {"y", p.y},
          {"theta", p.theta}, {"v", actual.v}, {"omega", actual.omega}, {"mode", mode}};
}

}  // namespace

std::vector<std::string> encode_telemetry(const TelemetrySnapshot& s) {
  std::vector<std::string> out;
  out.push_back(pose_json(s.t, s.pose, s.actual, to_string(s.mode)).dump());
  if (s.scan) out.push_back(scan_json(s.t, *s.scan).dump());
  if (s.thermal) out.push_back(thermal_json(s.t, *s.thermal).dump());
  out.push_back(vss_json(s.t, s.vss).dump());
  for (const auto& e : s.events) out.push_back(event_json(s.t, e).dump());
  return out;
}

// ---------------------------------------------------------------------------
// Server

class Session;

struct TelemetryServer::Impl {
  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::set<std::shared_ptr<Session>> sessions;  // touched only on the I/O thread
  std::atomic<std::size_t> clients{0};
  MessageHandler on_message;
  DisconnectHandler on_disconnect;
  std::thread io_thread;
  std::atomic<bool> stopped{false};

  void accept();
};

class Session : public std::enable_shared_from_this<Session> {
 public:
  static constexpr std::size_t kMaxQueued = 256;

  Session(tcp::socket socket, TelemetryServer::Impl& srv) : ws_(std::move(socket)), srv_(srv) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->srv_.sessions.insert(self);
      ++self->srv_.clients;
      self->read();
    });
  }

  void send(std::shared_ptr<const std::string> msg) {
    if (queue_.size() >= kMaxQueued) queue_.pop_front();
    queue_.push_back(std::move(msg));
    if (!writing_) write();
  }

  void close() {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->drop();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      try {
        if (self->srv_.on_message) self->srv_.on_message(parse_client_message(text));
      } catch (const Error& e) {
        json err = event_json(0.0, {"rejected", e.what()});
        self->send(std::make_shared<const std::string>(err.dump()));
      }
      self->read();
    });
  }

  void write() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->queue_.pop_front();
      if (ec) {
        self->writing_ = false;
        self->drop();
        return;
      }
      if (self->queue_.empty()) {
        self->writing_ = false;
      } else {
        self->write();
      }
    });
  }

  void drop() {
    if (srv_.sessions.erase(shared_from_this()) > 0) {
      --srv_.clients;
      if (srv_.on_disconnect) srv_.on_disconnect();
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  TelemetryServer::Impl& srv_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool writing_ = false;
};

void TelemetryServer::Impl::accept() {
  acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::make_shared<Session>(std::move(socket), *this)->start();
    accept();
  });
}

TelemetryServer::TelemetryServer(const std::string& address, unsigned short port, MessageHandler on_message,
                                 DisconnectHandler on_disconnect)
    : impl_(std::make_shared<Impl>()) {
  impl_->on_message = std::move(on_message);
  impl_->on_disconnect = std::move(on_disconnect);
  try {
    const tcp::endpoint ep(net::ip::make_address(address), port);
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(net::socket_base::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen(net::socket_base::max_listen_connections);
  } catch (const boost::system::system_error& e) {
    throw ConfigError("cannot listen on " + address + ":" + std::to_string(port) + ": " + e.what());
  }
  impl_->accept();
  impl_->io_thread = std::thread([impl = impl_.get()] { impl->ioc.run(); });
}

TelemetryServer::~TelemetryServer() { stop(); }

unsigned short TelemetryServer::port() const { return impl_->acceptor.local_endpoint().port(); }

std::size_t TelemetryServer::client_count() const { return impl_->clients.load(); }

void TelemetryServer::broadcast(std::vector<std::string> messages) {
  if (impl_->stopped) return;
  net::post(impl_->ioc, [impl = impl_.get(), messages = std::move(messages)]() {
    for (const auto& m : messages) {
      auto shared = std::make_shared<const std::string>(m);
      for (const auto& s : impl->sessions) s->send(shared);
    }
  });
}

void TelemetryServer::stop() {
  if (impl_->stopped.exchange(true)) return;
  net::post(impl_->ioc, [impl = impl_.get()] {
    beast::error_code ec;
    impl->acceptor.close(ec);
    for (const auto& s : impl->sessions) s->close();
    impl->sessions.clear();
    impl->clients = 0;
  });
  // Give the close handlers a moment, then tear the loop down.
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  impl_->ioc.stop();
  if (impl_->io_thread.joinable()) impl_->io_thread.join();
}

// ---------------------------------------------------------------------------
// Drivers

TelemetryServer::MessageHandler simulation_handler(Simulation& sim) {
  return [&sim](const ClientMessage& msg) {
    std::visit(
        [&sim](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, TeleopMsg>) {
            sim.submit_teleop(m.input);
          } else if constexpr (std::is_same_v<T, RelayMsg>) {
            sim.submit_relay(m.name, m.on);
          } else {
            sim.submit_mode(m.mode);
          }
        },
        msg);
  };
}

void serve_run(Simulation& sim, TelemetryServer& server, double speed, const std::atomic<bool>* stop) {
  if (!(speed > 0.0)) throw InvalidParams("speed must be positive");
  sim.set_telemetry_sink([&server](std::shared_ptr<const TelemetrySnapshot> snap) {
    server.broadcast(encode_telemetry(*snap));
  });
  const auto t0 = std::chrono::steady_clock::now();
  while (!sim.finished() && !(stop && stop->load())) {
    sim.step();
    const auto due = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(sim.time() / speed));
    std::this_thread::sleep_until(due);
  }
  sim.set_telemetry_sink({});
}

void serve_replay(const RunLog& log, TelemetryServer& server, double speed, const std::atomic<bool>* stop) {
  if (!(speed > 0.0)) throw InvalidParams("speed must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  double next_pose_t = 0.0;
  std::optional<Pose2D> last;
  double last_t = 0.0;
  for (const auto& rec : log.records()) {
    if (stop && stop->load()) return;
    std::optional<json> msg;
    if (const auto* p = rec.as<PoseRec>()) {
      // Pose is logged every step; the stream carries it at 10 Hz with the
      // finite-difference twist.
      if (rec.t + 1e-9 >= next_pose_t) {
        Twist tw;
        if (last && rec.t > last_t) {
          const double dx = p->truth.x - last->x;
          const double dy = p->truth.y - last->y;
          tw.v = (dx * std::cos(last->theta) + dy * std::sin(last->theta)) / (rec.t - last_t);
          tw.omega = normalize_angle(p->truth.theta - last->theta) / (rec.t - last_t);
        }
        msg = pose_json(rec.t, p->truth, tw, "replay");
        next_pose_t = rec.t + 0.1;
        last = p->truth;
        last_t = rec.t;
      }
    } else if (const auto* s = rec.as<LidarScan>()) {
      msg = scan_json(rec.t, *s);
    } else if (const auto* th = rec.as<ThermalRec>()) {
      msg = thermal_json(rec.t, *th);
    } else if (const auto* v = rec.as<VssState>()) {
      msg = vss_json(rec.t, *v);
    } else if (const auto* e = rec.as<EventRec>()) {
      msg = event_json(rec.t, *e);
    }
    if (!msg) continue;
    std::this_thread::sleep_until(t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                           std::chrono::duration<double>(rec.t / speed)));
    server.broadcast({msg->dump()});
  }
}

}  // namespace tiba::service
