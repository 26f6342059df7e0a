#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wearpm/calendar.hpp"
#include "wearpm/health.hpp"
#include "wearpm/temporal.hpp"

namespace wearpm {

using AttrValue = std::variant<double, std::string, bool>;
using AttrMap = std::map<std::string, AttrValue, std::less<>>;

enum class AttrType { Number, Text, Boolean };

const char* to_string(AttrType t);
AttrType type_of(const AttrValue& v);

namespace attr {
inline constexpr std::string_view kHrvMedian = "hrv_median_ms";
inline constexpr std::string_view kHrvCount = "hrv_sample_count";
inline constexpr std::string_view kIsWorkday = "is_workday";
inline constexpr std::string_view kRestingHr = "resting_hr_bpm";
inline constexpr std::string_view kTotalSleep = "total_sleep_min";
inline constexpr std::string_view kAwake = "awake_min";
inline constexpr std::string_view kDeepSleep = "deep_sleep_min";
inline constexpr std::string_view kNightMissing = "night_missing";
}  // namespace attr

enum class EventOrigin { Calendar, Workout, Sleep };

const char* to_string(EventOrigin o);

struct EnrichedEvent {
    std::string activity;
    Interval interval;
    EventOrigin origin = EventOrigin::Calendar;
    Category category = Category::Unknown;
    AttrMap attributes;

    std::optional<double> number(std::string_view key) const;
};

struct Case {
    Date case_id;
    std::vector<EnrichedEvent> events;
    AttrMap attributes;

    bool is_workday() const;
    std::optional<double> number(std::string_view key) const;
    void sort_events();
};

struct MatchStats {
    std::size_t total_events = 0;
    std::size_t matched_events = 0;

    friend bool operator==(const MatchStats&, const MatchStats&) = default;
};

struct Schema {
    std::map<std::string, AttrType, std::less<>> event_attributes;
    std::map<std::string, AttrType, std::less<>> case_attributes;
};

struct EventLog {
    std::vector<Case> cases;
    MatchStats match_stats;
    Schema schema;

    std::size_t event_count() const;
};

// Events whose hrv_sample_count was set by enrich_event_attributes, and how
// many of them had at least one sample.
MatchStats compute_match_stats(const EventLog& log);

struct SegmentOptions {
    // With no rules, every day with an event counts as a workday.
    bool category_rules_configured = false;
};

// One case per home-timezone date of event start.
EventLog segment_cases(const std::vector<CalendarEvent>& events, const HomeZone& zone,
                       SegmentOptions options = {});

// Strategy 1: aggregate of the HRV samples inside each calendar event.
void enrich_event_attributes(EventLog& log, std::span<const TimedValue> hrv_samples,
                             AggregateSpec spec = {});

struct NightPolicy {
    Seconds window_start{18 * 3600};  // on the case date
    Seconds window_end{12 * 3600};    // on the following date
    // Attribute the night before the case date instead of the night after.
    bool previous_night = false;

    Interval window_for(Date case_date, const HomeZone& zone) const;
};

// Parses "HH:MM..HH:MM".
std::optional<NightPolicy> parse_night_window(std::string_view text);

struct CaseAttributeReport {
    std::size_t duplicate_resting_hr = 0;
};

// Strategy 2. `bundle.sleep` must already be reconciled.
CaseAttributeReport attach_case_attributes(EventLog& log, const HealthBundle& bundle, const HomeZone& zone,
                                           const NightPolicy& policy = {});

struct DeriveSelection {
    bool workouts = false;
    bool sleep = false;
    bool sleep_per_episode = false;
};

struct DeriveReport {
    std::size_t workouts_added = 0;
    std::size_t workouts_without_case = 0;
    std::size_t sleep_events_added = 0;
};

// Strategy 3.
DeriveReport derive_events(EventLog& log, const HealthBundle& bundle, const HomeZone& zone,
                           const DeriveSelection& selection, const NightPolicy& policy = {});

enum class Comparator { Ge, Le, Lt, Gt, Eq };

struct CohortClause {
    std::string attribute;
    Comparator op = Comparator::Eq;
    AttrValue value;
};

struct CohortPredicate {
    std::vector<CohortClause> clauses;

    // "attr>=480,awake_min<60"; also accepts ≥ and ≤.
    static CohortPredicate parse(std::string_view text);
    bool empty() const { return clauses.empty(); }
    bool matches(const Case& c) const;
};

std::string to_string(const CohortPredicate& p);

// Throws Error(UnknownAttribute) when a clause names an attribute missing from the schema.
EventLog filter_cohort(const EventLog& log, const CohortPredicate& predicate);

}  // namespace wearpm
