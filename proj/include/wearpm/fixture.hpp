#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "wearpm/temporal.hpp"

namespace wearpm {

class FlatConfig;

struct FixtureSpec {
    std::uint64_t seed = 1;
    Date first_day{std::chrono::year(2025), std::chrono::month(1), std::chrono::day(6)};
    Date last_day{std::chrono::year(2025), std::chrono::month(1), std::chrono::day(31)};
    std::string home_tz = "Europe/Amsterdam";
    bool include_weekends = false;

    int events_per_day_min = 1;
    int events_per_day_max = 4;
    std::optional<int> total_events;  // exact number of timed events when set
    int all_day_events = 0;

    double hrv_coverage = 0.7;
    std::optional<int> matched_events;  // exact override of hrv_coverage
    int max_samples_per_event = 3;

    double mean_total_sleep_min = 450.0;
    double sd_total_sleep_min = 45.0;
    double awake_fraction = 0.08;
    double deep_fraction = 0.15;
    double missing_night_probability = 0.05;

    double workout_probability = 0.2;

    // Unknown keys are rejected with a diagnostic naming them.
    static FixtureSpec from_config(const FlatConfig& cfg);
    void validate() const;
};

struct NightTruth {
    Date night;  // evening date the night starts on
    Instant start;
    Instant end;
    std::size_t episodes = 0;
    double total_sleep_min = 0.0;
    double awake_min = 0.0;
    double deep_sleep_min = 0.0;
};

struct WorkoutTruth {
    Date date;
    std::string activity;
    Instant start;
    Instant end;
    bool on_event_day = false;  // the date has at least one timed calendar event
};

struct FixtureManifest {
    std::uint64_t seed = 0;
    std::size_t timed_events = 0;
    std::size_t all_day_events = 0;
    std::size_t matched_events = 0;
    std::size_t hrv_samples = 0;
    std::size_t health_records = 0;
    std::size_t event_days = 0;
    std::vector<NightTruth> nights;
    std::vector<WorkoutTruth> workouts;

    std::string to_json() const;
};

struct Fixture {
    std::string calendar_csv;
    std::string health_xml;
    FixtureManifest manifest;
    // Subject rules matching the generated subjects.
    std::string category_work;
    std::string category_private;
};

// Deterministic: the same spec yields byte-identical outputs.
Fixture generate_fixture(const FixtureSpec& spec);

// Streams a synthetic export.xml with `records` HRV records.
void write_bulk_health_xml(std::ostream& out, std::size_t records, std::uint64_t seed);

}  // namespace wearpm
