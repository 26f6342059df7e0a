#include "wearpm/temporal.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <numeric>

#include "wearpm/error.hpp"

namespace wearpm {

namespace {

using namespace std::chrono;

// Reads exactly `width` digits starting at text[pos].
std::optional<int> fixed_digits(std::string_view text, std::size_t pos, std::size_t width) {
    if (pos + width > text.size()) return std::nullopt;
    int value = 0;
    for (std::size_t i = pos; i < pos + width; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) return std::nullopt;
        value = value * 10 + (text[i] - '0');
    }
    return value;
}

bool char_at(std::string_view text, std::size_t pos, char c) {
    return pos < text.size() && text[pos] == c;
}

std::optional<std::pair<Date, Seconds>> parse_date_time(std::string_view text, char separator) {
    if (text.size() < 19 || !char_at(text, 4, '-') || !char_at(text, 7, '-') ||
        !char_at(text, 10, separator) || !char_at(text, 13, ':') || !char_at(text, 16, ':')) {
        return std::nullopt;
    }
    auto date = parse_iso_date(text.substr(0, 10));
    auto hh = fixed_digits(text, 11, 2);
    auto mm = fixed_digits(text, 14, 2);
    auto ss = fixed_digits(text, 17, 2);
    if (!date || !hh || !mm || !ss || *hh > 23 || *mm > 59 || *ss > 60) return std::nullopt;
    return std::pair{*date, Seconds(*hh * 3600 + *mm * 60 + *ss)};
}

std::string format_offset(std::int32_t offset, bool with_colon) {
    char sign = offset < 0 ? '-' : '+';
    int magnitude = std::abs(offset) / 60;
    char buf[16];
    if (with_colon) {
        std::snprintf(buf, sizeof buf, "%c%02d:%02d", sign, magnitude / 60, magnitude % 60);
    } else {
        std::snprintf(buf, sizeof buf, "%c%02d%02d", sign, magnitude / 60, magnitude % 60);
    }
    return buf;
}

std::string format_local(Instant t, char separator) {
    auto shifted = sys_seconds(Seconds(t.epoch_seconds() + t.utc_offset()));
    auto day = floor<days>(shifted);
    year_month_day ymd(day);
    auto tod = shifted - day;
    char buf[40];
    long secs = static_cast<long>(tod.count());
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u%c%02ld:%02ld:%02ld", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), separator,
                  secs / 3600, (secs / 60) % 60, secs % 60);
    return buf;
}

}  // namespace

Interval::Interval(Instant s, Instant e) : start(s), end(e) {
    if (end < start) throw std::invalid_argument("interval end precedes start");
}

bool interval_contains(const Interval& iv, Instant t) { return iv.contains(t); }

std::vector<std::vector<std::size_t>> interval_join_indices(std::span<const Interval> intervals,
                                                            std::span<const Instant> points) {
    auto by_start = [](const Interval& a, const Interval& b) { return a.start < b.start; };
    if (!std::is_sorted(intervals.begin(), intervals.end(), by_start)) {
        throw Error(ErrorKind::UnsortedInput, "intervals are not sorted by start");
    }
    if (!std::is_sorted(points.begin(), points.end())) {
        throw Error(ErrorKind::UnsortedInput, "points are not sorted by instant");
    }

    std::vector<std::vector<std::size_t>> out(intervals.size());
    // Starts are nondecreasing, so the first candidate point only moves forward.
    std::size_t first = 0;
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        const Interval& iv = intervals[i];
        while (first < points.size() && points[first] < iv.start) ++first;
        for (std::size_t p = first; p < points.size() && points[p] < iv.end; ++p) {
            out[i].push_back(p);
        }
    }
    return out;
}

std::vector<std::vector<double>> interval_join(std::span<const Interval> intervals,
                                               std::span<const TimedValue> points) {
    std::vector<Instant> instants;
    instants.reserve(points.size());
    for (const auto& p : points) instants.push_back(p.at);

    auto indices = interval_join_indices(intervals, instants);
    std::vector<std::vector<double>> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out[i].reserve(indices[i].size());
        for (auto p : indices[i]) out[i].push_back(points[p].value);
    }
    return out;
}

std::optional<double> aggregate(std::span<const double> values, AggregateSpec spec) {
    if (values.empty()) return std::nullopt;
    switch (spec.method) {
        case Aggregate::Count:
            return static_cast<double>(values.size());
        case Aggregate::Min:
            return *std::min_element(values.begin(), values.end());
        case Aggregate::Max:
            return *std::max_element(values.begin(), values.end());
        case Aggregate::Mean: {
            // summing in sorted order keeps the result independent of input order
            std::vector<double> sorted(values.begin(), values.end());
            std::sort(sorted.begin(), sorted.end());
            double sum = std::accumulate(sorted.begin(), sorted.end(), 0.0);
            return sum / static_cast<double>(sorted.size());
        }
        case Aggregate::Median: {
            std::vector<double> work(values.begin(), values.end());
            const std::size_t mid = work.size() / 2;
            std::nth_element(work.begin(), work.begin() + mid, work.end());
            double upper = work[mid];
            if (work.size() % 2 == 1) return upper;
            double lower = *std::max_element(work.begin(), work.begin() + mid);
            return (lower + upper) / 2.0;
        }
    }
    return std::nullopt;
}

std::optional<Aggregate> parse_aggregate(std::string_view name) {
    if (name == "median") return Aggregate::Median;
    if (name == "mean") return Aggregate::Mean;
    if (name == "min") return Aggregate::Min;
    if (name == "max") return Aggregate::Max;
    if (name == "count") return Aggregate::Count;
    return std::nullopt;
}

const char* to_string(Aggregate method) {
    switch (method) {
        case Aggregate::Median: return "median";
        case Aggregate::Mean: return "mean";
        case Aggregate::Min: return "min";
        case Aggregate::Max: return "max";
        case Aggregate::Count: return "count";
    }
    return "?";
}

std::string format_date(Date d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

std::optional<Date> parse_iso_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    auto y = fixed_digits(text, 0, 4);
    auto m = fixed_digits(text, 5, 2);
    auto d = fixed_digits(text, 8, 2);
    if (!y || !m || !d) return std::nullopt;
    Date date{year(*y), month(static_cast<unsigned>(*m)), day(static_cast<unsigned>(*d))};
    if (!date.ok()) return std::nullopt;
    return date;
}

Date add_days(Date d, int n) { return Date(sys_days(d) + days(n)); }

bool is_weekend(Date d) {
    weekday wd(sys_days{d});
    return wd == Saturday || wd == Sunday;
}

std::optional<Seconds> parse_clock(std::string_view text) {
    if (text.size() != 5 && text.size() != 8) return std::nullopt;
    auto hh = fixed_digits(text, 0, 2);
    auto mm = fixed_digits(text, 3, 2);
    if (!hh || !mm || text[2] != ':' || *hh > 24 || *mm > 59) return std::nullopt;
    int ss = 0;
    if (text.size() == 8) {
        auto s = fixed_digits(text, 6, 2);
        if (!s || text[5] != ':' || *s > 59) return std::nullopt;
        ss = *s;
    }
    int total = *hh * 3600 + *mm * 60 + ss;
    if (total > 86400) return std::nullopt;
    return Seconds(total);
}

std::string format_clock(Seconds tod) {
    char buf[16];
    long s = static_cast<long>(tod.count());
    std::snprintf(buf, sizeof buf, "%02ld:%02ld", s / 3600, (s / 60) % 60);
    return buf;
}

Instant instant_from_civil(Date d, Seconds time_of_day, std::int32_t utc_offset) {
    auto local = sys_days(d).time_since_epoch() + time_of_day;
    return Instant(duration_cast<Seconds>(local).count() - utc_offset, utc_offset);
}

HomeZone HomeZone::load(const std::string& iana_name) {
    absl::TimeZone tz;
    if (!absl::LoadTimeZone(iana_name, &tz)) {
        throw Error(ErrorKind::Config, "unknown time zone '" + iana_name + "'");
    }
    return HomeZone(tz, iana_name);
}

HomeZone HomeZone::utc() { return HomeZone(absl::UTCTimeZone(), "UTC"); }

LocalDateTime HomeZone::to_local(Instant t) const {
    auto info = tz_.At(absl::FromUnixSeconds(t.epoch_seconds()));
    const auto& cs = info.cs;
    LocalDateTime out;
    out.date = Date{year(static_cast<int>(cs.year())), month(static_cast<unsigned>(cs.month())),
                    day(static_cast<unsigned>(cs.day()))};
    out.time_of_day = Seconds(cs.hour() * 3600 + cs.minute() * 60 + cs.second());
    out.utc_offset = info.offset;
    return out;
}

Instant HomeZone::from_local(Date d, Seconds time_of_day) const {
    auto day_start = absl::CivilSecond(static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                                       static_cast<unsigned>(d.day()));
    auto cs = day_start + time_of_day.count();
    auto info = tz_.At(cs);
    std::int64_t epoch = absl::ToUnixSeconds(info.pre);
    Instant t(epoch);
    return normalize(t);
}

Instant HomeZone::from_local(const LocalDateTime& local) const {
    return instant_from_civil(local.date, local.time_of_day, local.utc_offset);
}

std::optional<Instant> parse_apple_timestamp(std::string_view text) {
    auto dt = parse_date_time(text, ' ');
    if (!dt || text.size() != 25 || text[19] != ' ' || (text[20] != '+' && text[20] != '-')) {
        return std::nullopt;
    }
    auto oh = fixed_digits(text, 21, 2);
    auto om = fixed_digits(text, 23, 2);
    if (!oh || !om || *om > 59) return std::nullopt;
    std::int32_t offset = (*oh * 3600 + *om * 60) * (text[20] == '-' ? -1 : 1);
    return instant_from_civil(dt->first, dt->second, offset);
}

std::string format_apple_timestamp(Instant t) {
    return format_local(t, ' ') + " " + format_offset(t.utc_offset(), false);
}

std::optional<Instant> parse_iso8601(std::string_view text) {
    auto dt = parse_date_time(text, 'T');
    if (!dt) return std::nullopt;
    auto rest = text.substr(19);
    if (rest == "Z") return instant_from_civil(dt->first, dt->second, 0);
    if (rest.size() != 6 || (rest[0] != '+' && rest[0] != '-') || rest[3] != ':') return std::nullopt;
    auto oh = fixed_digits(rest, 1, 2);
    auto om = fixed_digits(rest, 4, 2);
    if (!oh || !om || *om > 59) return std::nullopt;
    std::int32_t offset = (*oh * 3600 + *om * 60) * (rest[0] == '-' ? -1 : 1);
    return instant_from_civil(dt->first, dt->second, offset);
}

std::string format_iso8601(Instant t) {
    return format_local(t, 'T') + format_offset(t.utc_offset(), true);
}

}  // namespace wearpm
