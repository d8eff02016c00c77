#include "doctest.h"
#include "hgdr/config.hpp"

using namespace hgdr;

TEST_SUITE("config") {
  TEST_CASE("typed getters and fallbacks") {
    auto c = KeyValueConfig::parse_string("# comment\n\ndim = 64\nlr=0.01\nmean = true\nmodes = full, mf\n");
    CHECK(c.get_size("dim", 128) == 64);
    CHECK(c.get_double("lr", 1e-3) == 0.01);
    CHECK(c.get_bool("mean", false));
    CHECK(c.get_list("modes", {}) == std::vector<std::string>{"full", "mf"});
    CHECK(c.get_u64("epochs", 200) == 200);
    CHECK_NOTHROW(c.reject_unknown());
  }

  TEST_CASE("unknown keys are rejected") {
    auto c = KeyValueConfig::parse_string("dim=4\nlearning_rate=0.1\n", "cfg");
    c.get_size("dim", 1);
    CHECK_THROWS_WITH_AS(c.reject_unknown(), doctest::Contains("learning_rate"), std::invalid_argument);
  }

  TEST_CASE("malformed input") {
    CHECK_THROWS_AS(KeyValueConfig::parse_string("novalue\n"), std::invalid_argument);
    CHECK_THROWS_AS(KeyValueConfig::parse_string("a=1\na=2\n"), std::invalid_argument);
    auto c = KeyValueConfig::parse_string("n=-3\nx=abc\nb=maybe\n");
    CHECK_THROWS_AS(c.get_u64("n", 0), std::invalid_argument);
    CHECK_THROWS_AS(c.get_double("x", 0), std::invalid_argument);
    CHECK_THROWS_AS(c.get_bool("b", false), std::invalid_argument);
  }
}
