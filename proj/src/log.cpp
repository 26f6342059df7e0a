#include "wearpm/log.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <sstream>
#include <tuple>

#include "wearpm/error.hpp"

namespace wearpm {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::optional<double> as_number(const AttrValue& v) {
    if (auto* d = std::get_if<double>(&v)) return *d;
    if (auto* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
    return std::nullopt;
}

std::optional<double> lookup_number(const AttrMap& attrs, std::string_view key) {
    auto it = attrs.find(key);
    if (it == attrs.end()) return std::nullopt;
    return as_number(it->second);
}

double minutes(Seconds s) { return static_cast<double>(s.count()) / 60.0; }

// Sleep episodes whose start lies in `window`; `sleep` is sorted by start.
std::span<const SleepEpisode> episodes_starting_in(const std::vector<SleepEpisode>& sleep, const Interval& window) {
    auto lo = std::lower_bound(sleep.begin(), sleep.end(), window.start,
                               [](const SleepEpisode& e, Instant t) { return e.interval.start < t; });
    auto hi = std::lower_bound(lo, sleep.end(), window.end,
                               [](const SleepEpisode& e, Instant t) { return e.interval.start < t; });
    return {lo, hi};
}

const char* episode_activity(SleepStage stage) {
    switch (stage) {
        case SleepStage::Deep: return "Deep Sleep";
        case SleepStage::Core: return "Core Sleep";
        case SleepStage::Rem: return "REM Sleep";
        case SleepStage::Awake: return "Awake";
        case SleepStage::InBedUnspecified: return "In Bed";
    }
    return "Sleep";
}

Case* find_case(EventLog& log, Date d) {
    auto it = std::lower_bound(log.cases.begin(), log.cases.end(), d,
                               [](const Case& c, Date x) { return c.case_id < x; });
    if (it == log.cases.end() || it->case_id != d) return nullptr;
    return &*it;
}

template <class T>
bool compare(const T& lhs, Comparator op, const T& rhs) {
    switch (op) {
        case Comparator::Ge: return lhs >= rhs;
        case Comparator::Le: return lhs <= rhs;
        case Comparator::Lt: return lhs < rhs;
        case Comparator::Gt: return lhs > rhs;
        case Comparator::Eq: return lhs == rhs;
    }
    return false;
}

}  // namespace

const char* to_string(AttrType t) {
    switch (t) {
        case AttrType::Number: return "number";
        case AttrType::Text: return "text";
        case AttrType::Boolean: return "boolean";
    }
    return "?";
}

AttrType type_of(const AttrValue& v) {
    switch (v.index()) {
        case 0: return AttrType::Number;
        case 1: return AttrType::Text;
        default: return AttrType::Boolean;
    }
}

const char* to_string(EventOrigin o) {
    switch (o) {
        case EventOrigin::Calendar: return "calendar";
        case EventOrigin::Workout: return "workout";
        case EventOrigin::Sleep: return "sleep";
    }
    return "?";
}

std::optional<double> EnrichedEvent::number(std::string_view key) const { return lookup_number(attributes, key); }

bool Case::is_workday() const {
    auto it = attributes.find(attr::kIsWorkday);
    if (it == attributes.end()) return false;
    auto* b = std::get_if<bool>(&it->second);
    return b && *b;
}

std::optional<double> Case::number(std::string_view key) const { return lookup_number(attributes, key); }

void Case::sort_events() {
    std::stable_sort(events.begin(), events.end(), [](const EnrichedEvent& a, const EnrichedEvent& b) {
        return std::tie(a.interval.start, a.interval.end, a.activity) <
               std::tie(b.interval.start, b.interval.end, b.activity);
    });
}

std::size_t EventLog::event_count() const {
    std::size_t n = 0;
    for (const auto& c : cases) n += c.events.size();
    return n;
}

MatchStats compute_match_stats(const EventLog& log) {
    MatchStats stats;
    for (const auto& c : log.cases) {
        for (const auto& e : c.events) {
            auto count = e.number(attr::kHrvCount);
            if (!count) continue;
            ++stats.total_events;
            if (*count > 0) ++stats.matched_events;
        }
    }
    return stats;
}

EventLog segment_cases(const std::vector<CalendarEvent>& events, const HomeZone& zone, SegmentOptions options) {
    std::map<Date, Case> by_date;
    for (const auto& ev : events) {
        Date d = zone.date_of(ev.interval.start);
        auto& c = by_date[d];
        c.case_id = d;
        EnrichedEvent e;
        e.activity = ev.subject;
        e.interval = Interval(zone.normalize(ev.interval.start), zone.normalize(ev.interval.end));
        e.origin = EventOrigin::Calendar;
        e.category = ev.category;
        c.events.push_back(std::move(e));
    }

    EventLog log;
    log.cases.reserve(by_date.size());
    for (auto& [date, c] : by_date) {
        bool workday = !options.category_rules_configured ||
                       std::any_of(c.events.begin(), c.events.end(),
                                   [](const EnrichedEvent& e) { return e.category == Category::Work; });
        c.attributes.emplace(std::string(attr::kIsWorkday), workday);
        c.sort_events();
        log.cases.push_back(std::move(c));
    }
    log.schema.case_attributes.emplace(std::string(attr::kIsWorkday), AttrType::Boolean);
    return log;
}

void enrich_event_attributes(EventLog& log, std::span<const TimedValue> hrv_samples, AggregateSpec spec) {
    std::vector<EnrichedEvent*> targets;
    for (auto& c : log.cases) {
        for (auto& e : c.events) {
            if (e.origin == EventOrigin::Calendar) targets.push_back(&e);
        }
    }
    std::stable_sort(targets.begin(), targets.end(),
                     [](const EnrichedEvent* a, const EnrichedEvent* b) { return a->interval.start < b->interval.start; });

    std::vector<Interval> windows;
    windows.reserve(targets.size());
    for (const auto* e : targets) windows.push_back(e->interval);

    auto matched = interval_join(windows, hrv_samples);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        auto& attrs = targets[i]->attributes;
        attrs.insert_or_assign(std::string(attr::kHrvCount), static_cast<double>(matched[i].size()));
        if (auto value = aggregate(matched[i], spec)) {
            attrs.insert_or_assign(std::string(attr::kHrvMedian), *value);
        } else {
            attrs.erase(std::string(attr::kHrvMedian));
        }
    }
    log.schema.event_attributes.insert_or_assign(std::string(attr::kHrvMedian), AttrType::Number);
    log.schema.event_attributes.insert_or_assign(std::string(attr::kHrvCount), AttrType::Number);
    log.match_stats = compute_match_stats(log);
}

Interval NightPolicy::window_for(Date case_date, const HomeZone& zone) const {
    Date evening = previous_night ? add_days(case_date, -1) : case_date;
    Instant start = zone.from_local(evening, window_start);
    Date end_day = window_end > window_start ? evening : add_days(evening, 1);
    return Interval(start, zone.from_local(end_day, window_end));
}

std::optional<NightPolicy> parse_night_window(std::string_view text) {
    auto sep = text.find("..");
    if (sep == std::string_view::npos) return std::nullopt;
    auto start = parse_clock(trim(text.substr(0, sep)));
    auto end = parse_clock(trim(text.substr(sep + 2)));
    if (!start || !end || *start >= Seconds(86400) || *end > Seconds(86400) || *start == *end) {
        return std::nullopt;
    }
    NightPolicy p;
    p.window_start = *start;
    p.window_end = *end;
    return p;
}

CaseAttributeReport attach_case_attributes(EventLog& log, const HealthBundle& bundle, const HomeZone& zone,
                                           const NightPolicy& policy) {
    CaseAttributeReport report;

    // samples are sorted by instant, so the last value seen per date is the latest
    std::map<Date, std::vector<double>> resting;
    for (const auto& s : bundle.samples) {
        if (s.kind == SampleKind::RestingHeartRate) resting[zone.date_of(s.at)].push_back(s.value);
    }

    for (auto& c : log.cases) {
        if (auto it = resting.find(c.case_id); it != resting.end()) {
            c.attributes.insert_or_assign(std::string(attr::kRestingHr), it->second.back());
            report.duplicate_resting_hr += it->second.size() - 1;
        } else {
            c.attributes.erase(std::string(attr::kRestingHr));
        }

        auto night = episodes_starting_in(bundle.sleep, policy.window_for(c.case_id, zone));
        Seconds asleep{0}, awake{0}, deep{0};
        for (const auto& e : night) {
            if (is_asleep(e.stage)) asleep += e.interval.duration();
            if (e.stage == SleepStage::Awake) awake += e.interval.duration();
            if (e.stage == SleepStage::Deep) deep += e.interval.duration();
        }
        c.attributes.insert_or_assign(std::string(attr::kTotalSleep), minutes(asleep));
        c.attributes.insert_or_assign(std::string(attr::kAwake), minutes(awake));
        c.attributes.insert_or_assign(std::string(attr::kDeepSleep), minutes(deep));
        c.attributes.insert_or_assign(std::string(attr::kNightMissing), night.empty());
    }

    auto& schema = log.schema.case_attributes;
    schema.insert_or_assign(std::string(attr::kRestingHr), AttrType::Number);
    schema.insert_or_assign(std::string(attr::kTotalSleep), AttrType::Number);
    schema.insert_or_assign(std::string(attr::kAwake), AttrType::Number);
    schema.insert_or_assign(std::string(attr::kDeepSleep), AttrType::Number);
    schema.insert_or_assign(std::string(attr::kNightMissing), AttrType::Boolean);
    return report;
}

DeriveReport derive_events(EventLog& log, const HealthBundle& bundle, const HomeZone& zone,
                           const DeriveSelection& selection, const NightPolicy& policy) {
    DeriveReport report;
    if (selection.workouts) {
        for (const auto& w : bundle.workouts) {
            Case* c = find_case(log, zone.date_of(w.interval.start));
            if (!c) {
                ++report.workouts_without_case;
                continue;
            }
            EnrichedEvent e;
            e.activity = w.activity;
            e.interval = Interval(zone.normalize(w.interval.start), zone.normalize(w.interval.end));
            e.origin = EventOrigin::Workout;
            c->events.push_back(std::move(e));
            ++report.workouts_added;
        }
    }
    if (selection.sleep) {
        for (auto& c : log.cases) {
            auto night = episodes_starting_in(bundle.sleep, policy.window_for(c.case_id, zone));
            std::optional<Instant> first, last;
            for (const auto& ep : night) {
                if (ep.stage == SleepStage::InBedUnspecified) continue;
                if (selection.sleep_per_episode) {
                    EnrichedEvent e;
                    e.activity = episode_activity(ep.stage);
                    e.interval = Interval(zone.normalize(ep.interval.start), zone.normalize(ep.interval.end));
                    e.origin = EventOrigin::Sleep;
                    c.events.push_back(std::move(e));
                    ++report.sleep_events_added;
                    continue;
                }
                if (!first) first = ep.interval.start;
                if (!last || *last < ep.interval.end) last = ep.interval.end;
            }
            if (first) {
                EnrichedEvent e;
                e.activity = "Sleep";
                e.interval = Interval(zone.normalize(*first), zone.normalize(*last));
                e.origin = EventOrigin::Sleep;
                c.events.push_back(std::move(e));
                ++report.sleep_events_added;
            }
        }
    }
    for (auto& c : log.cases) c.sort_events();
    return report;
}

CohortPredicate CohortPredicate::parse(std::string_view text) {
    CohortPredicate pred;
    text = trim(text);
    if (text.empty()) return pred;

    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto comma = text.find(',', pos);
        auto part = trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        pos = comma == std::string_view::npos ? text.size() + 1 : comma + 1;

        struct Op {
            std::string_view token;
            Comparator op;
        };
        // longest tokens first so ">=" is not read as ">"
        static constexpr Op ops[] = {{">=", Comparator::Ge}, {"<=", Comparator::Le}, {"\xE2\x89\xA5", Comparator::Ge},
                                     {"\xE2\x89\xA4", Comparator::Le}, {"==", Comparator::Eq}, {">", Comparator::Gt},
                                     {"<", Comparator::Lt}, {"=", Comparator::Eq}};
        std::size_t at = std::string_view::npos;
        const Op* found = nullptr;
        for (const auto& op : ops) {
            auto p = part.find(op.token);
            if (p != std::string_view::npos && (p < at || (p == at && op.token.size() > found->token.size()))) {
                at = p;
                found = &op;
            }
        }
        if (!found) throw Error(ErrorKind::Config, "cohort clause '" + std::string(part) + "' has no comparator");

        CohortClause clause;
        clause.attribute = std::string(trim(part.substr(0, at)));
        clause.op = found->op;
        auto value = trim(part.substr(at + found->token.size()));
        if (clause.attribute.empty() || value.empty()) {
            throw Error(ErrorKind::Config, "cohort clause '" + std::string(part) + "' is incomplete");
        }
        double number = 0.0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), number);
        if (ec == std::errc() && ptr == value.data() + value.size()) {
            clause.value = number;
        } else if (value == "true" || value == "false") {
            clause.value = value == "true";
        } else {
            if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
                value = value.substr(1, value.size() - 2);
            }
            clause.value = std::string(value);
        }
        pred.clauses.push_back(std::move(clause));
    }
    return pred;
}

bool CohortPredicate::matches(const Case& c) const {
    for (const auto& clause : clauses) {
        auto it = c.attributes.find(clause.attribute);
        if (it == c.attributes.end()) return false;
        const AttrValue& actual = it->second;
        if (auto* s = std::get_if<std::string>(&clause.value)) {
            auto* a = std::get_if<std::string>(&actual);
            if (!a || !compare(*a, clause.op, *s)) return false;
            continue;
        }
        auto lhs = as_number(actual);
        auto rhs = as_number(clause.value);
        if (!lhs || !rhs || !compare(*lhs, clause.op, *rhs)) return false;
    }
    return true;
}

std::string to_string(const CohortPredicate& p) {
    std::ostringstream out;
    for (std::size_t i = 0; i < p.clauses.size(); ++i) {
        const auto& c = p.clauses[i];
        if (i) out << ',';
        out << c.attribute;
        switch (c.op) {
            case Comparator::Ge: out << ">="; break;
            case Comparator::Le: out << "<="; break;
            case Comparator::Lt: out << '<'; break;
            case Comparator::Gt: out << '>'; break;
            case Comparator::Eq: out << '='; break;
        }
        std::visit([&](const auto& v) {
            if constexpr (std::is_same_v<std::decay_t<decltype(v)>, bool>) {
                out << (v ? "true" : "false");
            } else {
                out << v;
            }
        }, c.value);
    }
    return out.str();
}

EventLog filter_cohort(const EventLog& log, const CohortPredicate& predicate) {
    for (const auto& clause : predicate.clauses) {
        if (!log.schema.case_attributes.contains(clause.attribute)) {
            throw Error(ErrorKind::UnknownAttribute, "cohort attribute '" + clause.attribute + "' is not in the log schema");
        }
    }
    EventLog out;
    out.schema = log.schema;
    for (const auto& c : log.cases) {
        if (predicate.matches(c)) out.cases.push_back(c);
    }
    out.match_stats = compute_match_stats(out);
    return out;
}

}  // namespace wearpm
