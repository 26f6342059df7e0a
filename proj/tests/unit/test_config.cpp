#include <doctest.h>

#include <sstream>

#include "wearpm/config.hpp"
#include "wearpm/csv.hpp"
#include "wearpm/error.hpp"

using namespace wearpm;

TEST_CASE("flat TOML") {
    auto c = FlatConfig::parse_toml(R"(
# comment
home_tz = "Europe/Amsterdam"   # trailing comment
seed = 42
ratio = 0.5
strict = true
night.window = '18:00..12:00'
)");
    CHECK(c.string("home_tz") == "Europe/Amsterdam");
    CHECK(c.integer("seed") == 42);
    CHECK(c.number("ratio") == 0.5);
    CHECK(c.number("seed") == 42.0);
    CHECK(c.boolean("strict") == true);
    CHECK(c.string("night.window") == "18:00..12:00");
    CHECK_FALSE(c.string("missing").has_value());

    try {
        c.integer("home_tz");
        FAIL("expected a type error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
        CHECK(std::string(e.what()).find("home_tz") != std::string::npos);
    }
    CHECK_THROWS_AS(FlatConfig::parse_toml("[table]\nx = 1\n"), Error);
    CHECK_THROWS_AS(FlatConfig::parse_toml("x = [1, 2]\n"), Error);
    CHECK_THROWS_AS(FlatConfig::parse_toml("x = 1\nx = 2\n"), Error);
    CHECK_THROWS_AS(FlatConfig::parse_toml("x = \"unterminated\n"), Error);
}

TEST_CASE("flat JSON and merging") {
    auto j = FlatConfig::parse_json(R"({"seed": 3, "strict": false, "out": "log.csv"})");
    CHECK(j.integer("seed") == 3);
    CHECK(j.boolean("strict") == false);
    CHECK_THROWS_AS(FlatConfig::parse_json(R"({"nested": {"a": 1}})"), Error);
    CHECK_THROWS_AS(FlatConfig::parse_json("[1]"), Error);

    FlatConfig over;
    over.set("seed", std::int64_t{9});
    j.merge_from(over);
    CHECK(j.integer("seed") == 9);
    CHECK(j.string("out") == "log.csv");
}

TEST_CASE("CSV reader and writer") {
    std::istringstream in("\xEF\xBB\xBF" "a,b,c\r\n\"x, y\",\"he said \"\"hi\"\"\",\r\n\"multi\nline\",2,3\n");
    csv::Reader r(in);
    auto h = r.next();
    REQUIRE(h);
    CHECK(*h == std::vector<std::string>{"a", "b", "c"});
    auto row = r.next();
    REQUIRE(row);
    CHECK(*row == std::vector<std::string>{"x, y", "he said \"hi\"", ""});
    auto row2 = r.next();
    REQUIRE(row2);
    CHECK((*row2)[0] == "multi\nline");
    CHECK_FALSE(r.next());

    CHECK(csv::quote("plain") == "plain");
    CHECK(csv::quote("a,b") == "\"a,b\"");
    CHECK(csv::quote("q\"") == "\"q\"\"\"");

    std::istringstream bad("\"open\n");
    csv::Reader rb(bad);
    CHECK_THROWS(rb.next());
}
