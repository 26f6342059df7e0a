#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "wearpm/calendar.hpp"
#include "wearpm/config.hpp"
#include "wearpm/error.hpp"
#include "wearpm/fixture.hpp"
#include "wearpm/health.hpp"
#include "wearpm/log.hpp"

using namespace wearpm;
using testing::Gen;
using testing::ymd;

namespace {

struct Ingested {
    HealthBundle health;
    EventLog log;
};

Ingested run(const Fixture& fx, const FixtureSpec& spec) {
    auto zone = HomeZone::load(spec.home_tz);
    std::istringstream xml(fx.health_xml);
    Ingested out;
    out.health = parse_health_export(xml, {true});
    CalendarIngestConfig cfg;
    cfg.strict = true;
    cfg.classifier.add_rule(fx.category_work, Category::Work);
    std::istringstream cal(fx.calendar_csv);
    auto parsed = parse_calendar_csv(cal, zone, cfg);
    out.log = segment_cases(filter_all_day(parsed.events), zone, SegmentOptions{true});
    enrich_event_attributes(out.log, out.health.values_of(SampleKind::HrvSdnn), {});
    return out;
}

}  // namespace

TEST_CASE("same spec gives byte-identical fixtures") {
    FixtureSpec spec;
    spec.seed = 12;
    auto a = generate_fixture(spec);
    auto b = generate_fixture(spec);
    CHECK(a.calendar_csv == b.calendar_csv);
    CHECK(a.health_xml == b.health_xml);
    CHECK(a.manifest.to_json() == b.manifest.to_json());
    spec.seed = 13;
    CHECK(generate_fixture(spec).health_xml != a.health_xml);
}

TEST_CASE("coverage extremes") {
    FixtureSpec none;
    none.hrv_coverage = 0;
    auto fx = generate_fixture(none);
    CHECK(fx.manifest.matched_events == 0);
    CHECK(run(fx, none).log.match_stats.matched_events == 0);

    FixtureSpec one;
    one.first_day = ymd(2025, 1, 8);
    one.last_day = ymd(2025, 1, 8);
    one.events_per_day_min = one.events_per_day_max = 1;
    one.hrv_coverage = 1;
    one.max_samples_per_event = 1;
    auto f1 = generate_fixture(one);
    CHECK(f1.manifest.timed_events == 1);
    CHECK(f1.manifest.matched_events == 1);
    CHECK(run(f1, one).log.match_stats == MatchStats{1, 1});
}

TEST_CASE("spec parsing and validation") {
    auto spec = FixtureSpec::from_config(FlatConfig::parse_toml(
        "seed = 5\nfrom = \"2025-02-03\"\nto = \"2025-02-07\"\ntotal_events = 9\nmatched_events = 4\n"));
    CHECK(spec.seed == 5);
    CHECK(spec.first_day == ymd(2025, 2, 3));
    CHECK(spec.total_events == 9);
    auto fx = generate_fixture(spec);
    CHECK(fx.manifest.timed_events == 9);
    CHECK(fx.manifest.matched_events == 4);

    CHECK_THROWS_AS(FixtureSpec::from_config(FlatConfig::parse_toml("hrv_coverage = 1.5\n")), Error);
    CHECK_THROWS_AS(FixtureSpec::from_config(FlatConfig::parse_toml("colour = \"red\"\n")), Error);
    CHECK_THROWS_AS(FixtureSpec::from_config(FlatConfig::parse_toml("sd_total_sleep_min = -1\n")), Error);
}

TEST_CASE("property: pipeline reproduces the manifest for random specs") {
    Gen g(2024);
    for (int round = 0; round < 25; ++round) {
        FixtureSpec spec;
        spec.seed = static_cast<std::uint64_t>(g.integer(0, 1 << 30));
        spec.first_day = add_days(ymd(2024, 10, 1), static_cast<int>(g.integer(0, 200)));
        spec.last_day = add_days(spec.first_day, static_cast<int>(g.integer(0, 40)));
        spec.include_weekends = g.coin();
        spec.events_per_day_min = static_cast<int>(g.integer(1, 3));
        spec.events_per_day_max = spec.events_per_day_min + static_cast<int>(g.integer(0, 3));
        spec.all_day_events = static_cast<int>(g.integer(0, 5));
        spec.hrv_coverage = g.real(0, 1);
        spec.home_tz = g.coin() ? "Europe/Amsterdam" : "America/New_York";
        spec.workout_probability = g.real(0, 0.6);
        auto fx = generate_fixture(spec);
        auto r = run(fx, spec);
        CAPTURE(spec.seed);
        CHECK(r.log.match_stats.total_events == fx.manifest.timed_events);
        CHECK(r.log.match_stats.matched_events == fx.manifest.matched_events);
        CHECK(r.health.skipped_records == 0);
        CHECK(r.health.sleep.size() == [&] {
            std::size_t n = 0;
            for (const auto& night : fx.manifest.nights) n += night.episodes;
            return n;
        }());

        // generated sleep is already disjoint, so reconciliation must not change it
        auto rec = reconcile_sleep(r.health.sleep);
        REQUIRE(rec.size() == r.health.sleep.size());
        for (std::size_t i = 0; i < rec.size(); ++i) {
            CHECK(rec[i].interval.start == r.health.sleep[i].interval.start);
            CHECK(rec[i].interval.end == r.health.sleep[i].interval.end);
            CHECK(rec[i].stage == r.health.sleep[i].stage);
        }
    }
}
