#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "wearpm/calendar.hpp"
#include "wearpm/config.hpp"
#include "wearpm/error.hpp"

using namespace wearpm;
using testing::Gen;
using testing::ymd;

namespace {

const std::string kHeader = "Subject,Start Date,Start Time,End Date,End Time,All day event\n";

CalendarParseResult csv(const std::string& text, const CalendarIngestConfig& cfg = {}) {
    std::istringstream in(text);
    return parse_calendar_csv(in, HomeZone::load("Europe/Amsterdam"), cfg);
}

CalendarParseResult ics(const std::string& text) {
    std::istringstream in(text);
    return parse_calendar_ics(in, HomeZone::load("Europe/Amsterdam"));
}

Instant ams(Date d, int hh, int mm = 0) {
    return HomeZone::load("Europe/Amsterdam").from_local(d, std::chrono::seconds(hh * 3600 + mm * 60));
}

}  // namespace

TEST_CASE("Outlook CSV row") {
    auto r = csv(kHeader + "IPO U,5/12/2025,10:00:00 AM,5/12/2025,11:00:00 AM,False\n");
    REQUIRE(r.events.size() == 1);
    const auto& e = r.events[0];
    CHECK(e.subject == "IPO U");
    CHECK_FALSE(e.all_day);
    CHECK(e.interval.start == ams(ymd(2025, 5, 12), 10));
    CHECK(e.interval.duration() == std::chrono::hours(1));
    CHECK(e.category == Category::Unknown);
}

TEST_CASE("header-only CSV and all-day rows") {
    CHECK(csv(kHeader).events.empty());
    auto r = csv(kHeader + "\"Holiday, family\",5/12/2025,12:00:00 AM,5/13/2025,12:00:00 AM,True\r\n");
    REQUIRE(r.events.size() == 1);
    CHECK(r.events[0].all_day);
    CHECK(r.events[0].subject == "Holiday, family");
    CHECK(r.events[0].interval.start == ams(ymd(2025, 5, 12), 0));
    CHECK(r.events[0].interval.end == ams(ymd(2025, 5, 13), 0));
}

TEST_CASE("PM times, midnight crossing and zero length") {
    auto r = csv(kHeader + "Late call,1/10/2025,11:50:00 PM,1/11/2025,12:20:00 AM,False\n" +
                 "Marker,1/10/2025,3:00:00 PM,1/10/2025,3:00:00 PM,False\n");
    REQUIRE(r.events.size() == 2);
    CHECK(r.events[0].interval.start == ams(ymd(2025, 1, 10), 23, 50));
    CHECK(r.events[0].interval.end == ams(ymd(2025, 1, 11), 0, 20));
    CHECK(r.events[1].interval.duration() == std::chrono::seconds(0));
}

TEST_CASE("missing columns and malformed rows") {
    try {
        csv("Subject,Start Date,Start Time\nx,1/1/2025,9:00:00 AM\n");
        FAIL("expected MissingColumn");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MissingColumn);
        CHECK(std::string(e.what()).find("End Date") != std::string::npos);
    }

    std::string text = kHeader + "ok,1/10/2025,9:00:00 AM,1/10/2025,10:00:00 AM,False\n" +
                       "bad,13/45/2025,9:00:00 AM,1/10/2025,10:00:00 AM,False\n" +
                       "backwards,1/10/2025,11:00:00 AM,1/10/2025,10:00:00 AM,False\n";
    auto r = csv(text);
    CHECK(r.events.size() == 1);
    CHECK(r.skipped_rows == 2);

    CalendarIngestConfig strict;
    strict.strict = true;
    try {
        csv(text, strict);
        FAIL("expected MalformedRow");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MalformedRow);
    }
}

TEST_CASE("column map and custom formats") {
    auto cfg = FlatConfig::parse_toml(R"(
subject = "Titel"
start_date = "Begindatum"
start_time = "Begintijd"
end_date = "Einddatum"
end_time = "Eindtijd"
all_day = "Hele dag"
date_format = "DD-MM-YYYY"
time_format = "HH:MM"
delimiter = ";"
)");
    CalendarIngestConfig ic;
    ic.columns = CalendarColumns::from_config(cfg);
    auto r = csv("Titel;Begindatum;Begintijd;Einddatum;Eindtijd;Hele dag\nOverleg;12-05-2025;14:30;12-05-2025;15:00;False\n",
                 ic);
    REQUIRE(r.events.size() == 1);
    CHECK(r.events[0].interval.start == ams(ymd(2025, 5, 12), 14, 30));
    CHECK_FALSE(r.events[0].all_day);

    CHECK(parse_date_format("2025/1/2", "YYYY/M/D") == ymd(2025, 1, 2));
    CHECK(parse_time_format("12:05:00 AM", "H:MM:SS AM/PM") == std::chrono::minutes(5));
    CHECK(parse_time_format("12:05:00 PM", "H:MM:SS AM/PM") == std::chrono::minutes(12 * 60 + 5));
    CHECK_FALSE(parse_time_format("13:05:00 PM", "H:MM:SS AM/PM"));
}

TEST_CASE("subject classifier") {
    SubjectClassifier c;
    c.add_rule("meeting|sync", Category::Work);
    c.add_rule("dinner", Category::Private);
    CHECK(c.classify("Weekly SYNC") == Category::Work);
    CHECK(c.classify("Dinner with family") == Category::Private);
    CHECK(c.classify("Lunch") == Category::Unknown);
    CHECK_THROWS_AS(c.add_rule("(", Category::Work), Error);
}

TEST_CASE("ICS events") {
    auto r = ics(
        "BEGIN:VCALENDAR\r\nVERSION:2.0\r\n"
        "BEGIN:VEVENT\r\nUID:1\r\nSUMMARY:Board meeting\r\nDTSTART;TZID=Europe/Amsterdam:20250512T100000\r\n"
        "DTEND;TZID=Europe/Amsterdam:20250512T110000\r\n"
        "BEGIN:VALARM\r\nTRIGGER:-PT15M\r\nSUMMARY:ignored\r\nEND:VALARM\r\nEND:VEVENT\r\n"
        "BEGIN:VEVENT\r\nSUMMARY:King's Day\r\nDTSTART;VALUE=DATE:20250427\r\nEND:VEVENT\r\n"
        "BEGIN:VEVENT\r\nSUMMARY:Long subject that the exporter\r\n  folded\r\nDTSTART:20250513T080000Z\r\n"
        "DURATION:PT45M\r\nEND:VEVENT\r\n"
        "END:VCALENDAR\r\n");
    REQUIRE(r.events.size() == 3);
    CHECK(r.events[0].subject == "Board meeting");
    CHECK_FALSE(r.events[0].all_day);
    CHECK(r.events[0].interval.start == ams(ymd(2025, 5, 12), 10));
    CHECK(r.events[0].interval.duration() == std::chrono::hours(1));
    CHECK(r.events[1].all_day);
    CHECK(r.events[1].interval.start == ams(ymd(2025, 4, 27), 0));
    CHECK(r.events[1].interval.end == ams(ymd(2025, 4, 28), 0));
    CHECK(r.events[2].subject == "Long subject that the exporter folded");
    CHECK(r.events[2].interval.start == ams(ymd(2025, 5, 13), 10));
    CHECK(r.events[2].interval.duration() == std::chrono::minutes(45));

    CHECK(ics("BEGIN:VCALENDAR\r\nEND:VCALENDAR\r\n").events.empty());
}

TEST_CASE("filter_all_day") {
    auto t = [](bool all_day, const char* s) {
        return CalendarEvent{s, Interval(Instant(0), Instant(60)), all_day, Category::Unknown};
    };
    auto out = filter_all_day({t(false, "a"), t(true, "b"), t(false, "c")});
    REQUIRE(out.size() == 2);
    CHECK(out[0].subject == "a");
    CHECK(out[1].subject == "c");
    CHECK(filter_all_day({t(true, "x"), t(true, "y")}).empty());
}

TEST_CASE("property: filtering is idempotent and respects the range") {
    Gen g(4);
    auto zone = HomeZone::load("Europe/Amsterdam");
    for (int round = 0; round < 100; ++round) {
        std::vector<CalendarEvent> events;
        for (int i = 0; i < 40; ++i) {
            auto d = add_days(ymd(2025, 1, 1), static_cast<int>(g.integer(0, 60)));
            auto s = zone.from_local(d, std::chrono::minutes(g.integer(0, 1439)));
            events.push_back({"e", Interval(s, s + std::chrono::minutes(g.integer(0, 300))), g.coin(0.2),
                              Category::Unknown});
        }
        auto once = filter_all_day(events);
        auto twice = filter_all_day(once);
        REQUIRE(once.size() == twice.size());
        for (const auto& e : once) CHECK_FALSE(e.all_day);

        Date from = ymd(2025, 1, 10), to = ymd(2025, 2, 10);
        auto lo = zone.from_local(from, std::chrono::seconds(0));
        auto hi = zone.from_local(add_days(to, 1), std::chrono::seconds(0));
        for (const auto& e : filter_date_range(once, from, to, zone)) {
            CHECK(lo <= e.interval.start);
            CHECK(e.interval.end <= hi);
        }
    }
}
