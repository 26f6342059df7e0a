#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <absl/time/time.h>

namespace wearpm {

using Seconds = std::chrono::seconds;
using Date = std::chrono::year_month_day;

// An absolute point in time at second precision. The UTC offset the value was
// recorded with is kept as metadata; ordering and equality only look at the
// absolute time.
class Instant {
public:
    constexpr Instant() = default;
    constexpr explicit Instant(std::int64_t epoch_seconds, std::int32_t utc_offset_seconds = 0)
        : epoch_(epoch_seconds), offset_(utc_offset_seconds) {}

    constexpr std::int64_t epoch_seconds() const { return epoch_; }
    constexpr std::int32_t utc_offset() const { return offset_; }
    constexpr Instant with_offset(std::int32_t offset) const { return Instant(epoch_, offset); }

    constexpr Instant operator+(Seconds d) const { return Instant(epoch_ + d.count(), offset_); }
    constexpr Instant operator-(Seconds d) const { return Instant(epoch_ - d.count(), offset_); }
    constexpr Seconds operator-(Instant other) const { return Seconds(epoch_ - other.epoch_); }

    friend constexpr bool operator==(Instant a, Instant b) { return a.epoch_ == b.epoch_; }
    friend constexpr std::strong_ordering operator<=>(Instant a, Instant b) { return a.epoch_ <=> b.epoch_; }

private:
    std::int64_t epoch_ = 0;
    std::int32_t offset_ = 0;
};

// Half-open [start, end).
struct Interval {
    Instant start;
    Instant end;

    constexpr Interval() = default;
    Interval(Instant s, Instant e);

    Seconds duration() const { return end - start; }
    bool contains(Instant t) const { return start <= t && t < end; }
    bool overlaps(const Interval& other) const { return start < other.end && other.start < end; }
};

bool interval_contains(const Interval& iv, Instant t);

struct TimedValue {
    Instant at;
    double value = 0.0;
};

// For each interval (sorted by start), the indices of the points (sorted by
// instant) it contains. Throws Error(UnsortedInput) on unsorted input.
std::vector<std::vector<std::size_t>> interval_join_indices(std::span<const Interval> intervals,
                                                            std::span<const Instant> points);

std::vector<std::vector<double>> interval_join(std::span<const Interval> intervals,
                                               std::span<const TimedValue> points);

enum class Aggregate { Median, Mean, Min, Max, Count };

struct AggregateSpec {
    Aggregate method = Aggregate::Median;
};

std::optional<double> aggregate(std::span<const double> values, AggregateSpec spec);

std::optional<Aggregate> parse_aggregate(std::string_view name);
const char* to_string(Aggregate method);

// ---- calendar dates and wall clock ----------------------------------------

std::string format_date(Date d);
std::optional<Date> parse_iso_date(std::string_view text);
Date add_days(Date d, int days);
bool is_weekend(Date d);

// "HH:MM" or "HH:MM:SS" -> seconds since midnight
std::optional<Seconds> parse_clock(std::string_view text);
std::string format_clock(Seconds time_of_day);

Instant instant_from_civil(Date d, Seconds time_of_day, std::int32_t utc_offset);

struct LocalDateTime {
    Date date;
    Seconds time_of_day{0};
    std::int32_t utc_offset = 0;
};

// Named IANA zone all wall-clock reasoning happens in.
class HomeZone {
public:
    static HomeZone load(const std::string& iana_name);
    static HomeZone utc();

    const std::string& name() const { return name_; }

    LocalDateTime to_local(Instant t) const;
    Date date_of(Instant t) const { return to_local(t).date; }
    std::int32_t offset_at(Instant t) const { return to_local(t).utc_offset; }
    Instant normalize(Instant t) const { return t.with_offset(offset_at(t)); }

    // Wall clock -> instant. Nonexistent times (DST gap) resolve with the
    // pre-transition offset; repeated times pick the earlier occurrence.
    Instant from_local(Date d, Seconds time_of_day) const;
    // Exact inverse of to_local.
    Instant from_local(const LocalDateTime& local) const;

private:
    HomeZone(absl::TimeZone tz, std::string name) : tz_(tz), name_(std::move(name)) {}

    absl::TimeZone tz_;
    std::string name_;
};

// ---- timestamp text formats --------------------------------------------------

// Apple Health export: "YYYY-MM-DD HH:MM:SS +HHMM"
std::optional<Instant> parse_apple_timestamp(std::string_view text);
std::string format_apple_timestamp(Instant t);

// "YYYY-MM-DDTHH:MM:SS+HH:MM" (or trailing Z), rendered with the instant's own offset.
std::optional<Instant> parse_iso8601(std::string_view text);
std::string format_iso8601(Instant t);

}  // namespace wearpm
