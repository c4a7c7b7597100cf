#include <doctest.h>

#include <filesystem>

#include "tiba/error.hpp"
#include "tiba/kv_config.hpp"

using namespace tiba;

TEST_CASE("parse skips comments and blank lines and trims whitespace") {
  const auto cfg = KvConfig::parse("# header\n\n  seed = 7  # trailing\nlength_m=53.5\n");
  CHECK(cfg.entries().size() == 2);
  CHECK(cfg.get_int("seed", 0) == 7);
  CHECK(cfg.get_double("length_m", 0.0) == 53.5);
}

TEST_CASE("repeated keys keep every value and single lookups take the last") {
  const auto cfg = KvConfig::parse("crevice = a\ncrevice = b\nx = 1\nx = 2\n");
  CHECK(cfg.all("crevice") == std::vector<std::string>{"a", "b"});
  CHECK(cfg.get_int("x", 0) == 2);
}

TEST_CASE("malformed input raises ConfigError") {
  CHECK_THROWS_AS(KvConfig::parse("no equals sign here\n"), ConfigError);
  CHECK_THROWS_AS(KvConfig::parse(" = value\n"), ConfigError);
  const auto cfg = KvConfig::parse("a = fifty\nb = 1.5\nc = maybe\n");
  CHECK_THROWS_AS(cfg.get_double("a", 0.0), ConfigError);
  CHECK_THROWS_AS(cfg.get_int("b", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_bool("c", false), ConfigError);
  CHECK_THROWS_AS(KvConfig::load("/nonexistent/dir/file.cfg"), ConfigError);
}

TEST_CASE("missing keys fall back") {
  const KvConfig cfg;
  CHECK(cfg.get_double("k", 2.5) == 2.5);
  CHECK(cfg.get_string("k", "x") == "x");
  CHECK_FALSE(cfg.contains("k"));
}

TEST_CASE("set replaces all occurrences, add appends, erase removes") {
  KvConfig cfg = KvConfig::parse("a = 1\na = 2\n");
  cfg.set("a", 3.0);
  CHECK(cfg.all("a") == std::vector<std::string>{"3"});
  cfg.add("a", "4");
  CHECK(cfg.all("a").size() == 2);
  cfg.erase("a");
  CHECK_FALSE(cfg.contains("a"));
}

TEST_CASE("format_double round-trips exactly") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0, 1.2566370614359172}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("text form parses back to the same entries and hash") {
  KvConfig cfg;
  cfg.set("seed", "9");
  cfg.set("length_m", 0.1);
  cfg.add("crevice", "0,0 1,0 1,1");
  const auto again = KvConfig::parse(cfg.to_text());
  CHECK(again.entries() == cfg.entries());
  CHECK(again.hash() == cfg.hash());
}

TEST_CASE("fnv1a64 reference vectors") {
  // Published FNV-1a 64-bit test vectors.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}
