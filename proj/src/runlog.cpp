#include "tiba/runlog.hpp"

#include <algorithm>
#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <cstdio>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <ostream>

#include "tiba/error.hpp"

namespace tiba {

using nlohmann::json;

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  namespace it = boost::archive::iterators;
  using Enc = it::base64_from_binary<it::transform_width<std::vector<std::uint8_t>::const_iterator, 6, 8>>;
  std::string out(Enc(bytes.begin()), Enc(bytes.end()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  namespace it = boost::archive::iterators;
  std::string s(text);
  const auto pad = s.size() - std::min(s.size(), s.find_last_not_of('=') + 1);
  if (s.size() % 4 != 0 || pad > 2) throw CorruptLog("bad base64 length");
  std::replace(s.end() - static_cast<std::ptrdiff_t>(pad), s.end(), '=', 'A');
  using Dec = it::transform_width<it::binary_from_base64<std::string::const_iterator>, 8, 6>;
  std::vector<std::uint8_t> out;
  try {
    for (Dec d(s.cbegin()), e(s.cend()); d != e; ++d) out.push_back(static_cast<std::uint8_t>(*d));
  } catch (const std::exception&) {
    throw CorruptLog("invalid base64 payload");
  }
  out.resize(out.size() - pad);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

json pose_json(const Pose2D& p) { return {{"x", p.x}, {"y", p.y}, {"theta", p.theta}}; }
Pose2D pose_from(const json& j) { return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("theta").get<double>()}; }

json wheels_json(const WheelSpeeds& w) { return {{"left", w.left}, {"right", w.right}}; }
WheelSpeeds wheels_from(const json& j) { return {j.at("left").get<double>(), j.at("right").get<double>()}; }

json payload_json(const RecordPayload& p) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, CommandRec>) {
          json j{{"source", v.source}, {"v", v.setpoint.v}, {"omega", v.setpoint.omega}};
          if (v.is_relay()) {
            j["relay"] = v.relay;
            j["on"] = v.relay_on;
          }
          return j;
        } else if constexpr (std::is_same_v<T, PoseRec>) {
          return {{"truth", pose_json(v.truth)},
                  {"odom", pose_json(v.odom.pose)},
                  {"odom_v", v.odom.v},
                  {"odom_omega", v.odom.omega}};
        } else if constexpr (std::is_same_v<T, WheelRec>) {
          return {{"command", wheels_json(v.command)},
                  {"actual", wheels_json(v.actual)},
                  {"hall_left", v.hall_left},
                  {"hall_right", v.hall_right}};
        } else if constexpr (std::is_same_v<T, SolarReading>) {
          return {{"v1", v.v1}, {"v2", v.v2}, {"v3", v.v3}, {"v4", v.v4}, {"valid", v.valid}};
        } else if constexpr (std::is_same_v<T, LidarScan>) {
          return {{"angle_min", v.angle_min},
                  {"angle_max", v.angle_max},
                  {"n_beams", v.n_beams},
                  {"max_range", v.max_range},
                  {"ranges", v.ranges}};
        } else if constexpr (std::is_same_v<T, ThermalRec>) {
          return {{"width", v.width},
                  {"height", v.height},
                  {"min", v.min_c},
                  {"max", v.max_c},
                  {"data", base64_encode(v.pixels)}};
        } else if constexpr (std::is_same_v<T, HTReading>) {
          return {{"temperature", v.temperature}, {"humidity", v.humidity}};
        } else if constexpr (std::is_same_v<T, VssState>) {
          json relays = json::object();
          for (const auto& [name, on] : v.relays) relays[name] = on;
          return {{"battery_voltage", v.battery_voltage},
                  {"soc", v.state_of_charge},
                  {"bus48_current", v.bus48_current},
                  {"bus12_current", v.bus12_current},
                  {"relays", relays},
                  {"internal_temp", v.internal_temp},
                  {"internal_humidity", v.internal_humidity},
                  {"energy_used_wh", v.energy_used_wh},
                  {"exhausted", v.exhausted}};
        } else {
          return {{"name", v.name}, {"detail", v.detail}};
        }
      },
      p);
}

RecordPayload payload_from(RecordKind kind, const json& j) {
  switch (kind) {
    case RecordKind::kCommand: {
      CommandRec c;
      c.source = j.at("source").get<std::string>();
      c.setpoint = {j.at("v").get<double>(), j.at("omega").get<double>()};
      if (j.contains("relay")) {
        c.relay = j.at("relay").get<std::string>();
        c.relay_on = j.at("on").get<bool>();
      }
      return c;
    }
    case RecordKind::kPose: {
      PoseRec p;
      p.truth = pose_from(j.at("truth"));
      p.odom.pose = pose_from(j.at("odom"));
      p.odom.v = j.at("odom_v").get<double>();
      p.odom.omega = j.at("odom_omega").get<double>();
      return p;
    }
    case RecordKind::kWheel:
      return WheelRec{wheels_from(j.at("command")), wheels_from(j.at("actual")),
                      j.at("hall_left").get<std::int64_t>(), j.at("hall_right").get<std::int64_t>()};
    case RecordKind::kSolar:
      return SolarReading{j.at("v1").get<double>(), j.at("v2").get<double>(), j.at("v3").get<double>(),
                          j.at("v4").get<double>(), j.at("valid").get<bool>()};
    case RecordKind::kLidar: {
      LidarScan s;
      s.angle_min = j.at("angle_min").get<double>();
      s.angle_max = j.at("angle_max").get<double>();
      s.n_beams = j.at("n_beams").get<int>();
      s.max_range = j.at("max_range").get<double>();
      s.ranges = j.at("ranges").get<std::vector<double>>();
      if (s.ranges.size() != static_cast<std::size_t>(s.n_beams)) throw CorruptLog("lidar beam count mismatch");
      return s;
    }
    case RecordKind::kThermal: {
      ThermalRec t;
      t.width = j.at("width").get<int>();
      t.height = j.at("height").get<int>();
      t.min_c = j.at("min").get<double>();
      t.max_c = j.at("max").get<double>();
      t.pixels = base64_decode(j.at("data").get<std::string>());
      if (t.pixels.size() != static_cast<std::size_t>(t.width) * t.height) throw CorruptLog("thermal size mismatch");
      return t;
    }
    case RecordKind::kHt:
      return HTReading{j.at("temperature").get<double>(), j.at("humidity").get<double>()};
    case RecordKind::kVss: {
      VssState s;
      s.battery_voltage = j.at("battery_voltage").get<double>();
      s.state_of_charge = j.at("soc").get<double>();
      s.bus48_current = j.at("bus48_current").get<double>();
      s.bus12_current = j.at("bus12_current").get<double>();
      for (const auto& [name, on] : j.at("relays").items()) s.relays[name] = on.get<bool>();
      s.internal_temp = j.at("internal_temp").get<double>();
      s.internal_humidity = j.at("internal_humidity").get<double>();
      s.energy_used_wh = j.at("energy_used_wh").get<double>();
      s.exhausted = j.at("exhausted").get<bool>();
      return s;
    }
    case RecordKind::kEvent:
      return EventRec{j.at("name").get<std::string>(), j.at("detail").get<std::string>()};
  }
  throw CorruptLog("unknown record kind");
}

}  // namespace

std::string LogHeader::config_hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(config.hash()));
  return buf;
}

std::string serialize_header(const LogHeader& h) {
  json cfg = json::array();
  for (const auto& [k, v] : h.config.entries()) cfg.push_back({k, v});
  return json{{"kind", "header"}, {"format", h.format}, {"seed", h.seed}, {"config_hash", h.config_hash()},
              {"config", cfg}}
      .dump();
}

LogHeader parse_header(std::string_view line) {
  try {
    const json j = json::parse(line);
    if (j.at("kind").get<std::string>() != "header") throw CorruptLog("first line is not a header");
    LogHeader h;
    h.format = j.at("format").get<std::string>();
    if (h.format != kRunLogFormat) throw CorruptLog("unsupported log format: " + h.format);
    h.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("config")) h.config.add(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    if (j.at("config_hash").get<std::string>() != h.config_hash()) throw CorruptLog("config hash mismatch");
    return h;
  } catch (const json::exception& e) {
    throw CorruptLog(std::string("malformed header: ") + e.what());
  }
}

std::string serialize_record(const RunRecord& rec) {
  return json{{"t", rec.t}, {"step", rec.step}, {"kind", to_string(rec.kind())}, {"data", payload_json(rec.payload)}}
      .dump();
}

RunRecord parse_record(std::string_view line) {
  try {
    const json j = json::parse(line);
    RunRecord r;
    r.t = j.at("t").get<double>();
    r.step = j.at("step").get<std::uint64_t>();
    r.payload = payload_from(parse_record_kind(j.at("kind").get<std::string>()), j.at("data"));
    return r;
  } catch (const json::exception& e) {
    throw CorruptLog(std::string("malformed record: ") + e.what());
  }
}

void RunLog::record(RunRecord rec) {
  if (!records_.empty() && rec.t < records_.back().t) {
    throw CorruptLog("record at t=" + format_double(rec.t) + " precedes t=" + format_double(records_.back().t));
  }
  records_.push_back(std::move(rec));
}

void RunLog::write(std::ostream& out) const {
  out << serialize_header(header_) << '\n';
  for (const auto& r : records_) out << serialize_record(r) << '\n';
}

void RunLog::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write log: " + path.string());
  write(out);
  if (!out) throw ConfigError("failed writing log: " + path.string());
}

RunLog RunLog::read(std::istream& in) {
  std::string line;
  bool have_header = false;
  RunLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!have_header) {
      log.header_ = parse_header(line);
      have_header = true;
      continue;
    }
    log.record(parse_record(line));
  }
  if (!have_header) throw ConfigError("empty log");
  return log;
}

RunLog RunLog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read log: " + path.string());
  return read(in);
}

}  // namespace tiba
