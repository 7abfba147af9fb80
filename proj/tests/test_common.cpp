#include <doctest.h>

#include <atomic>
#include <vector>

#include "mnmt/common.hpp"
#include "mnmt/config.hpp"

using namespace mnmt;

TEST_SUITE("common") {
  TEST_CASE("fnv1a matches the reference constants") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(hex64(0xabcULL) == "0000000000000abc");
  }

  TEST_CASE("artifact header carries version, config hash and seed") {
    const std::string h = artifact_header("k=v\n", 42);
    CHECK(h == "## mnmt version=0.1.0 config=" + hex64(fnv1a("k=v\n")) + " seed=42");
    CHECK(is_artifact_header(h));
    CHECK_FALSE(is_artifact_header("a b c"));
  }

  TEST_CASE("errors carry their code in the message") {
    const Error e(ErrorCode::EmptyMemory, "nothing");
    CHECK(e.code() == ErrorCode::EmptyMemory);
    CHECK(std::string(e.what()).find("EmptyMemory") != std::string::npos);
  }

  TEST_CASE("parallel_for visits every index once and rethrows") {
    std::vector<std::atomic<int>> hits(97);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                      if (i == 7) throw Error(ErrorCode::Io, "boom");
                    }),
                    Error);
  }

  TEST_CASE("config parsing") {
    const Config c = Config::parse("# comment\nseed = 9\nbeta=0.25  # trailing\nname = run one\nflag = yes\n");
    CHECK(c.integer("seed", 0) == 9);
    CHECK(c.real("beta", 0.0) == doctest::Approx(0.25));
    CHECK(c.text("name", "") == "run one");
    CHECK(c.flag("flag", false));
    CHECK(c.integer("missing", 5) == 5);
    CHECK(c.canonical() == "beta=0.25\nflag=yes\nname=run one\nseed=9\n");
    CHECK_THROWS_AS(Config::parse("no equals sign"), ConfigError);
    CHECK_THROWS_AS(Config::parse("= 3"), ConfigError);
    CHECK_THROWS_AS(Config::parse("seed = -1").integer("seed", 0), ConfigError);
    CHECK_THROWS_AS(Config::parse("beta = x").real("beta", 0), ConfigError);
  }
}
