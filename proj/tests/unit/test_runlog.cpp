#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include "tiba/error.hpp"
#include "tiba/runlog.hpp"

using namespace tiba;

namespace {

std::vector<std::uint8_t> bytes(std::string_view s) { return {s.begin(), s.end()}; }

LogHeader sample_header() {
  LogHeader h;
  h.seed = 42;
  h.config.set("seed", "42");
  h.config.set("row_spacing_m", 1.5);
  h.config.add("vss.device", "lights,12,1.5,off");
  h.config.add("vss.device", "pump,48,2.25,on");
  return h;
}

std::vector<RunRecord> one_of_each() {
  LidarScan scan;
  scan.angle_min = -3.141592653589793;
  scan.angle_max = 3.12413936106985;
  scan.n_beams = 3;
  scan.max_range = 8.0;
  scan.ranges = {1.0 / 3.0, 8.0, 0.1 + 0.2};
  ThermalRec th;
  th.width = 2;
  th.height = 2;
  th.min_c = 14.999999999999998;
  th.max_c = 45.0;
  th.pixels = {0, 17, 200, 255};
  VssState vss;
  vss.battery_voltage = 51.99;
  vss.state_of_charge = 0.999;
  vss.bus12_current = 2.83;
  vss.bus48_current = 0.2;
  vss.relays = {{"drive", true}, {"lights", false}};
  vss.internal_temp = 30.000001;
  vss.internal_humidity = 69.9;
  vss.energy_used_wh = 1e-7;
  return {
      {0.0, 0, CommandRec{"nav", {0.8, -0.125}, "", false}},
      {0.0, 0, CommandRec{"teleop_box", {}, "lights", true}},
      {0.01, 1, PoseRec{{0.5, -1e-17, 3.0e-5}, {{0.5, 0.0, 0.0}, 0.7, -0.01}}},
      {0.05, 5, WheelRec{{6.2, 6.1}, {6.19, 6.09}, 1234, -5}},
      {0.1, 10, SolarReading{0.5, 0.51, 0.49, 0.5, true}},
      {0.1, 10, scan},
      {0.1, 10, th},
      {1.0, 100, HTReading{30.2, 71.0}},
      {1.0, 100, vss},
      {1.0, 100, EventRec{"goal_reached", "x=\"50.5\"\nnext line"}},
  };
}

}  // namespace

TEST_CASE("base64 test vectors") {
  CHECK(base64_encode(bytes("")) == "");
  CHECK(base64_encode(bytes("f")) == "Zg==");
  CHECK(base64_encode(bytes("fo")) == "Zm8=");
  CHECK(base64_encode(bytes("foo")) == "Zm9v");
  CHECK(base64_encode(bytes("foob")) == "Zm9vYg==");
  CHECK(base64_encode(bytes("fooba")) == "Zm9vYmE=");
  CHECK(base64_encode(bytes("foobar")) == "Zm9vYmFy");
  for (std::string_view s : {"", "f", "fo", "foo", "foob", "fooba", "foobar"}) {
    CHECK(base64_decode(base64_encode(bytes(s))) == bytes(s));
  }
  std::vector<std::uint8_t> all(256);
  for (int i = 0; i < 256; ++i) all[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  CHECK(base64_decode(base64_encode(all)) == all);
}

TEST_CASE("base64 rejects malformed input") {
  CHECK_THROWS_AS(base64_decode("abc"), CorruptLog);
  CHECK_THROWS_AS(base64_decode("ab!d"), CorruptLog);
  CHECK_THROWS_AS(base64_decode("a==="), CorruptLog);
}

TEST_CASE("every record type survives serialization bit for bit") {
  for (const auto& rec : one_of_each()) {
    const auto line = serialize_record(rec);
    CHECK(line.find('\n') == std::string::npos);
    CHECK(parse_record(line) == rec);
  }
}

TEST_CASE("header round trip keeps repeated keys and the hash") {
  const auto h = sample_header();
  const auto parsed = parse_header(serialize_header(h));
  CHECK(parsed == h);
  CHECK(parsed.config_hash() == h.config_hash());
  CHECK(parsed.config.all("vss.device").size() == 2);
}

TEST_CASE("a log written and read back is identical, and so are its bytes") {
  RunLog log(sample_header());
  for (auto& r : one_of_each()) log.record(r);
  std::ostringstream a;
  log.write(a);
  std::istringstream in(a.str());
  const auto back = RunLog::read(in);
  CHECK(back.header() == log.header());
  CHECK(back.records() == log.records());
  std::ostringstream b;
  back.write(b);
  CHECK(a.str() == b.str());
}

TEST_CASE("records must not go back in time") {
  RunLog log(sample_header());
  log.record({1.0, 100, EventRec{"a", ""}});
  log.record({1.0, 100, EventRec{"b", ""}});
  CHECK_THROWS_AS(log.record({0.99, 99, EventRec{"c", ""}}), CorruptLog);
}

TEST_CASE("corrupt logs are rejected") {
  std::istringstream empty("");
  CHECK_THROWS_AS(RunLog::read(empty), ConfigError);

  std::istringstream no_header("{\"kind\":\"event\",\"t\":0,\"step\":0,\"name\":\"x\",\"detail\":\"\"}\n");
  CHECK_THROWS_AS(RunLog::read(no_header), CorruptLog);

  std::istringstream garbage("this is not json\n");
  CHECK_THROWS_AS(RunLog::read(garbage), CorruptLog);

  // A tampered configuration no longer matches its hash.
  auto line = serialize_header(sample_header());
  const auto at = line.find("1.5");
  REQUIRE(at != std::string::npos);
  line.replace(at, 3, "1.6");
  std::istringstream tampered(line + "\n");
  CHECK_THROWS_AS(RunLog::read(tampered), CorruptLog);

  std::ostringstream good;
  RunLog log(sample_header());
  log.record(one_of_each()[2]);
  log.write(good);
  std::string text = good.str();
  text.resize(text.size() - 10);
  std::istringstream truncated(text);
  CHECK_THROWS_AS(RunLog::read(truncated), CorruptLog);

  CHECK_THROWS_AS(RunLog::load("/nonexistent/dir/run.ndjson"), ConfigError);
}

TEST_CASE("a record whose payload disagrees with itself is rejected") {
  auto line = serialize_record(one_of_each()[5]);
  const auto at = line.find("\"n_beams\":3");
  REQUIRE(at != std::string::npos);
  line.replace(at, 11, "\"n_beams\":4");
  CHECK_THROWS_AS(parse_record(line), CorruptLog);
}
