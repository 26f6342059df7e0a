#include <doctest.h>

#include <expat.h>

#include <cmath>
#include <set>
#include <sstream>

#include "support.hpp"
#include "wearpm/error.hpp"
#include "wearpm/export.hpp"
#include "wearpm/health.hpp"

using namespace wearpm;
using testing::Gen;
using testing::utc;
using testing::ymd;

namespace {

const HomeZone kAms = HomeZone::load("Europe/Amsterdam");

Instant jan(unsigned d, int hh, int mm = 0) { return kAms.from_local(ymd(2025, 1, d), std::chrono::minutes(hh * 60 + mm)); }

CalendarEvent ev(const std::string& s, Instant a, Instant b, Category c) { return {s, Interval(a, b), false, c}; }

EventLog sample_log() {
    auto log = segment_cases({ev("Board sync", jan(6, 10), jan(6, 11), Category::Work),
                              ev("Dinner", jan(6, 19), jan(6, 21), Category::Private),
                              ev("Board sync", jan(7, 9), jan(7, 9, 45), Category::Work),
                              ev("Sync, with \"quotes\"", jan(8, 9), jan(8, 10), Category::Work)},
                             kAms, SegmentOptions{true});
    std::vector<TimedValue> hrv{{jan(6, 10, 10), 41.25}, {jan(6, 10, 40), 0.1 + 0.2}, {jan(7, 9, 5), 61.7}};
    enrich_event_attributes(log, hrv, {});
    HealthBundle b;
    b.samples = {{SampleKind::RestingHeartRate, jan(6, 7), 58, "Watch"}};
    b.sleep = {{Interval(jan(6, 23), jan(7, 6, 30)), SleepStage::Core, "Watch"},
               {Interval(jan(7, 6, 30), jan(7, 6, 47)), SleepStage::Awake, "Watch"}};
    b.workouts = {{Interval(jan(6, 12), jan(6, 12, 30)), "Walking", "Watch"}};
    attach_case_attributes(log, b, kAms);
    derive_events(log, b, kAms, DeriveSelection{true, true, false});
    return log;
}

struct XesCounts {
    bool well_formed = false;
    int traces = 0;
    int events = 0;
    std::string root;
};

XesCounts check_xes(const std::string& xml) {
    XesCounts counts;
    XML_Parser p = XML_ParserCreate(nullptr);
    XML_SetUserData(p, &counts);
    XML_SetStartElementHandler(p, [](void* ud, const XML_Char* name, const XML_Char**) {
        auto* c = static_cast<XesCounts*>(ud);
        std::string n(name);
        if (c->root.empty()) c->root = n;
        if (n == "trace") ++c->traces;
        if (n == "event") ++c->events;
    });
    counts.well_formed = XML_Parse(p, xml.data(), static_cast<int>(xml.size()), 1) == XML_STATUS_OK;
    XML_ParserFree(p);
    return counts;
}

}  // namespace

TEST_CASE("pseudonymize two names") {
    auto log = segment_cases({ev("Board sync", jan(6, 10), jan(6, 11), Category::Work),
                              ev("Dinner", jan(6, 19), jan(6, 20), Category::Private)},
                             kAms);
    auto [out, map] = pseudonymize(log, 42, true);
    CHECK(map.mapping.at("Board sync") == "Work1");
    CHECK(map.mapping.at("Dinner") == "Private1");
    CHECK(out.cases[0].events[0].activity == "Work1");
    CHECK(out.cases[0].events[1].activity == "Private1");
    CHECK(map.seed == 42);

    auto [plain, pmap] = pseudonymize(log, 42, false);
    std::set<std::string> names{pmap.mapping.at("Board sync"), pmap.mapping.at("Dinner")};
    CHECK(names == std::set<std::string>{"Act1", "Act2"});

    auto [empty, emap] = pseudonymize(EventLog{}, 1, true);
    CHECK(empty.cases.empty());
    CHECK(emap.mapping.empty());
}

TEST_CASE("pseudonymize keeps derived names and leaves no subject behind") {
    auto log = sample_log();
    auto [out, map] = pseudonymize(log, 7, true);
    std::ostringstream csv, xes;
    export_csv(out, csv, kAms);
    export_xes(out, xes, kAms);
    for (const auto& [original, alias] : map.mapping) {
        CHECK(csv.str().find(original) == std::string::npos);
        CHECK(xes.str().find(original) == std::string::npos);
    }
    CHECK(csv.str().find("Walking") != std::string::npos);
    CHECK(csv.str().find(",Sleep,") != std::string::npos);
    CHECK(map.to_json().find("Board sync") != std::string::npos);

    // same seed, same mapping; numbering does not follow alphabetical order for every seed
    CHECK(pseudonymize(log, 7, true).second.mapping == map.mapping);
    bool differs = false;
    for (std::uint64_t s = 0; s < 20 && !differs; ++s) differs = pseudonymize(log, s, true).second.mapping != map.mapping;
    CHECK(differs);
}

TEST_CASE("property: pseudonym mapping is injective") {
    Gen g(8);
    for (int round = 0; round < 50; ++round) {
        std::vector<CalendarEvent> events;
        for (int i = 0; i < 60; ++i) {
            auto d = static_cast<unsigned>(g.integer(6, 20));
            auto cat = static_cast<Category>(g.integer(0, 2));
            events.push_back(ev("subject " + std::to_string(g.integer(0, 30)), jan(d, 9 + i % 8), jan(d, 9 + i % 8, 30), cat));
        }
        auto log = segment_cases(events, kAms);
        auto [out, map] = pseudonymize(log, static_cast<std::uint64_t>(round), round % 2 == 0);
        std::set<std::string> aliases;
        for (const auto& [k, v] : map.mapping) aliases.insert(v);
        CHECK(aliases.size() == map.mapping.size());
    }
}

TEST_CASE("CSV layout") {
    auto log = sample_log();
    std::ostringstream out;
    auto rows = export_csv(log, out, kAms);
    CHECK(rows == log.event_count());
    std::istringstream lines(out.str());
    std::string header, first;
    std::getline(lines, header);
    std::getline(lines, first);
    CHECK(header.rfind("case_id,activity,start_time,complete_time,origin,", 0) == 0);
    CHECK(header.find("case:total_sleep_min") != std::string::npos);
    CHECK(first.rfind("2025-01-06,Board sync,2025-01-06T10:00:00+01:00,2025-01-06T11:00:00+01:00,calendar", 0) == 0);

    // the dinner has no HRV: empty cell rather than 0
    auto dinner = out.str().find("Dinner,");
    REQUIRE(dinner != std::string::npos);
    CHECK(out.str().find(",calendar,,0,", dinner) != std::string::npos);
}

TEST_CASE("CSV round trip") {
    auto log = sample_log();
    std::ostringstream out;
    export_csv(log, out, kAms);
    std::istringstream in(out.str());
    auto back = read_log_csv(in, kAms);

    REQUIRE(back.cases.size() == log.cases.size());
    CHECK(back.event_count() == log.event_count());
    CHECK(back.match_stats == log.match_stats);
    for (std::size_t i = 0; i < log.cases.size(); ++i) {
        const auto& a = log.cases[i];
        const auto& b = back.cases[i];
        CHECK(a.case_id == b.case_id);
        CHECK(a.attributes == b.attributes);
        REQUIRE(a.events.size() == b.events.size());
        for (std::size_t j = 0; j < a.events.size(); ++j) {
            CHECK(a.events[j].activity == b.events[j].activity);
            CHECK(a.events[j].interval.start == b.events[j].interval.start);
            CHECK(a.events[j].interval.end == b.events[j].interval.end);
            CHECK(a.events[j].origin == b.events[j].origin);
            CHECK(a.events[j].attributes == b.events[j].attributes);
        }
    }
}

TEST_CASE("format_number is shortest round trip") {
    CHECK(format_number(0.0) == "0");
    CHECK(format_number(55.0) == "55");
    CHECK(format_number(41.25) == "41.25");
    CHECK(std::stod(format_number(0.1 + 0.2)) == 0.1 + 0.2);
}

TEST_CASE("XES structure") {
    auto log = sample_log();
    std::ostringstream out;
    CHECK(export_xes(log, out, kAms) == log.cases.size());
    auto xes = out.str();
    auto counts = check_xes(xes);
    CHECK(counts.well_formed);
    CHECK(counts.root == "log");
    CHECK(counts.traces == 3);
    CHECK(counts.events == static_cast<int>(2 * log.event_count()));
    CHECK(xes.find("<string key=\"concept:name\" value=\"2025-01-06\"/>") != std::string::npos);
    CHECK(xes.find("<float key=\"total_sleep_min\" value=\"450\"/>") != std::string::npos);
    CHECK(xes.find("lifecycle:transition") != std::string::npos);
    CHECK(xes.find("Sync, with &quot;quotes&quot;") != std::string::npos);

    std::ostringstream single;
    export_xes(log, single, kAms, XesOptions{false});
    auto one = check_xes(single.str());
    CHECK(one.events == static_cast<int>(log.event_count()));
    CHECK(single.str().find("duration_min") != std::string::npos);

    std::ostringstream empty;
    CHECK(export_xes(EventLog{}, empty, kAms) == 0);
    auto e = check_xes(empty.str());
    CHECK(e.well_formed);
    CHECK(e.traces == 0);
}

TEST_CASE("failed sink reports SinkWrite") {
    std::ostringstream out;
    out.setstate(std::ios::badbit);
    try {
        export_csv(sample_log(), out, kAms);
        FAIL("expected SinkWrite");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SinkWrite);
    }
}

TEST_CASE("plot: HRV by activity group") {
    std::vector<CalendarEvent> events;
    for (unsigned d = 6; d <= 8; ++d) {
        events.push_back(ev("IPO meeting A", jan(d, 9), jan(d, 10), Category::Work));
        events.push_back(ev("IPO meeting B", jan(d, 11), jan(d, 12), Category::Work));
        events.push_back(ev("Lunch", jan(d, 12), jan(d, 13), Category::Private));
    }
    auto log = segment_cases(events, kAms);
    std::vector<TimedValue> hrv;
    for (unsigned d = 6; d <= 8; ++d) {
        hrv.push_back({jan(d, 9, 30), 40.0 + d});
        hrv.push_back({jan(d, 11, 30), 60.0 + d});
        hrv.push_back({jan(d, 12, 30), 80.0});
    }
    enrich_event_attributes(log, hrv, {});
    PlotOptions opts;
    opts.group_pattern = "^IPO meeting (\\w)$";
    auto table = emit_plot_data(log, PlotView::HrvByActivityGroup, opts);
    CHECK(table.columns == std::vector<std::string>{"group", "date", "hrv_median_ms"});
    REQUIRE(table.rows.size() == 6);
    CHECK(table.rows[0].label == "A");
    CHECK(table.rows[0].date == "2025-01-06");
    CHECK(table.rows[0].values[0] == 46.0);
}

TEST_CASE("plot: cohort vs all-workday mean") {
    auto log = segment_cases({ev("Sync", jan(6, 9), jan(6, 10), Category::Work),
                              ev("Sync", jan(7, 9), jan(7, 10), Category::Work),
                              ev("Sync", jan(8, 9), jan(8, 10), Category::Work),
                              ev("Dentist", jan(11, 9), jan(11, 10), Category::Private)},
                             kAms, SegmentOptions{true});
    double sleep[] = {400, 500, 470, 300};
    for (std::size_t i = 0; i < log.cases.size(); ++i) {
        log.cases[i].attributes[std::string(attr::kTotalSleep)] = sleep[i];
    }
    log.schema.case_attributes[std::string(attr::kTotalSleep)] = AttrType::Number;
    log.cases[1].events.push_back({"Walking", Interval(jan(7, 12), jan(7, 12, 30)), EventOrigin::Workout,
                                   Category::Unknown, {}});

    PlotOptions opts;
    opts.group_pattern = "^Walking$";
    opts.attributes = {std::string(attr::kTotalSleep)};
    auto table = emit_plot_data(log, PlotView::CaseAttrsVsAverage, opts);
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0].label == "case");
    CHECK(table.rows[0].date == "2025-01-07");
    CHECK(table.rows[0].values[0] == 500.0);
    CHECK(table.rows[1].label == kWorkdayMeanLabel);
    double mean = (400.0 + 500.0 + 470.0) / 3.0;  // the private-only day is not a workday
    CHECK(*table.rows[1].values[0] == doctest::Approx(mean).epsilon(1e-15));

    opts.attributes = {"not_there"};
    CHECK_THROWS_AS(emit_plot_data(log, PlotView::CaseAttrsVsAverage, opts), Error);

    std::ostringstream out;
    write_plot_csv(table, out);
    CHECK(out.str().rfind("row,case_id,total_sleep_min\n", 0) == 0);
}
