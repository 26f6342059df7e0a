#include "wearpm/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "wearpm/config.hpp"
#include "wearpm/csv.hpp"
#include "wearpm/error.hpp"

namespace wearpm {

namespace {

using namespace std::chrono;

// Distribution helpers written out by hand: the std:: distributions are
// implementation-defined, which would tie fixture bytes to one stdlib.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::int64_t uniform(std::int64_t lo, std::int64_t hi) {
        auto span = static_cast<std::uint64_t>(hi - lo + 1);
        return lo + static_cast<std::int64_t>(engine_() % span);
    }
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    bool chance(double p) { return unit() < p; }
    double normal(double mean, double sd) {
        double u1 = std::max(unit(), 1e-300);
        double u2 = unit();
        return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(engine_() % i)]);
    }

private:
    std::mt19937_64 engine_;
};

struct Subject {
    const char* name;
    bool work;
};

constexpr Subject kSubjects[] = {
    {"IPO meeting U", true},          {"IPO meeting E", true},        {"IPO meeting K", true},
    {"IPO meeting S", true},          {"Weekly sync M", true},        {"Recurring check-in O", true},
    {"Faculty board F", true},        {"Lunch meeting with team", true}, {"Social drinks at the office", true},
    {"Research seminar", true},       {"Thesis supervision", true},   {"Grant proposal writing", true},
    {"Dinner with friends", false},   {"Dentist appointment", false}, {"Family video call", false},
    {"Pick up groceries", false},
};

constexpr const char* kWorkPattern = "meeting|sync|check-in|board|drinks|seminar|supervision|proposal";
constexpr const char* kPrivatePattern = "dinner|dentist|family|groceries";

constexpr const char* kAllDaySubjects[] = {"Public holiday", "Out of office", "Conference travel"};

struct TimedEvent {
    Date day;
    std::string subject;
    Instant start;
    Instant end;
};

struct Sample {
    Instant at;
    double value;
};

struct Episode {
    Instant start;
    Instant end;
    const char* value;
};

struct WorkoutRec {
    Instant start;
    Instant end;
    std::string activity;
};

std::string outlook_date(Date d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%u/%u/%d", static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()),
                  static_cast<int>(d.year()));
    return buf;
}

std::string outlook_time(Seconds tod) {
    long s = static_cast<long>(tod.count());
    long h = s / 3600;
    const char* marker = h < 12 ? "AM" : "PM";
    long h12 = h % 12 == 0 ? 12 : h % 12;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%ld:%02ld:%02ld %s", h12, (s / 60) % 60, s % 60, marker);
    return buf;
}

std::string apple(Instant t, const HomeZone& zone) { return format_apple_timestamp(zone.normalize(t)); }

std::string one_decimal(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

// Minutes split into `parts` integer chunks that sum to `total`.
std::vector<int> split_minutes(int total, int parts, Rng& rng) {
    std::vector<int> out(parts, total / parts);
    for (int i = 0; i < total % parts; ++i) ++out[static_cast<std::size_t>(rng.uniform(0, parts - 1))];
    return out;
}

const char* kSleepPrefix = "HKCategoryValueSleepAnalysis";

}  // namespace

FixtureSpec FixtureSpec::from_config(const FlatConfig& cfg) {
    static const std::set<std::string, std::less<>> known = {
        "seed", "from", "to", "home_tz", "include_weekends", "events_per_day_min", "events_per_day_max",
        "total_events", "all_day_events", "hrv_coverage", "matched_events", "max_samples_per_event",
        "mean_total_sleep_min", "sd_total_sleep_min", "awake_fraction", "deep_fraction",
        "missing_night_probability", "workout_probability"};
    for (const auto& [key, value] : cfg.entries()) {
        if (!known.contains(key)) throw Error(ErrorKind::Config, "fixture spec: unknown key '" + key + "'");
    }

    FixtureSpec s;
    auto date_key = [&](const char* key, Date& out) {
        if (auto v = cfg.string(key)) {
            auto d = parse_iso_date(*v);
            if (!d) throw Error(ErrorKind::Config, std::string("key '") + key + "': expected YYYY-MM-DD");
            out = *d;
        }
    };
    auto int_key = [&](const char* key, int& out) {
        if (auto v = cfg.integer(key)) out = static_cast<int>(*v);
    };
    auto num_key = [&](const char* key, double& out) {
        if (auto v = cfg.number(key)) out = *v;
    };

    if (auto v = cfg.integer("seed")) {
        if (*v < 0) throw Error(ErrorKind::Config, "key 'seed': must be nonnegative");
        s.seed = static_cast<std::uint64_t>(*v);
    }
    date_key("from", s.first_day);
    date_key("to", s.last_day);
    if (auto v = cfg.string("home_tz")) s.home_tz = *v;
    if (auto v = cfg.boolean("include_weekends")) s.include_weekends = *v;
    int_key("events_per_day_min", s.events_per_day_min);
    int_key("events_per_day_max", s.events_per_day_max);
    if (auto v = cfg.integer("total_events")) s.total_events = static_cast<int>(*v);
    int_key("all_day_events", s.all_day_events);
    num_key("hrv_coverage", s.hrv_coverage);
    if (auto v = cfg.integer("matched_events")) s.matched_events = static_cast<int>(*v);
    int_key("max_samples_per_event", s.max_samples_per_event);
    num_key("mean_total_sleep_min", s.mean_total_sleep_min);
    num_key("sd_total_sleep_min", s.sd_total_sleep_min);
    num_key("awake_fraction", s.awake_fraction);
    num_key("deep_fraction", s.deep_fraction);
    num_key("missing_night_probability", s.missing_night_probability);
    num_key("workout_probability", s.workout_probability);
    s.validate();
    return s;
}

void FixtureSpec::validate() const {
    auto fail = [](const std::string& key, const std::string& why) {
        throw Error(ErrorKind::Config, "fixture spec: key '" + key + "': " + why);
    };
    if (sys_days(last_day) < sys_days(first_day)) fail("to", "range ends before it starts");
    if (events_per_day_min < 0 || events_per_day_max < events_per_day_min) fail("events_per_day_max", "invalid range");
    if (events_per_day_max > 6) fail("events_per_day_max", "at most 6 events fit in a generated day");
    if (hrv_coverage < 0.0 || hrv_coverage > 1.0) fail("hrv_coverage", "must lie in [0, 1]");
    if (max_samples_per_event < 1) fail("max_samples_per_event", "must be at least 1");
    if (all_day_events < 0) fail("all_day_events", "must be nonnegative");
    if (mean_total_sleep_min < 0 || sd_total_sleep_min < 0) fail("mean_total_sleep_min", "durations must be nonnegative");
    for (auto [key, v] : {std::pair{"awake_fraction", awake_fraction}, std::pair{"deep_fraction", deep_fraction},
                          std::pair{"missing_night_probability", missing_night_probability},
                          std::pair{"workout_probability", workout_probability}}) {
        if (v < 0.0 || v > 1.0) fail(key, "must lie in [0, 1]");
    }
    if (deep_fraction > 0.8) fail("deep_fraction", "must leave room for core and REM sleep");
    if (total_events && *total_events < 0) fail("total_events", "must be nonnegative");
    if (matched_events && *matched_events < 0) fail("matched_events", "must be nonnegative");
}

std::string FixtureManifest::to_json() const {
    nlohmann::ordered_json doc;
    doc["seed"] = seed;
    doc["timed_events"] = timed_events;
    doc["all_day_events"] = all_day_events;
    doc["matched_events"] = matched_events;
    doc["hrv_samples"] = hrv_samples;
    doc["health_records"] = health_records;
    doc["event_days"] = event_days;
    doc["nights"] = nlohmann::ordered_json::array();
    for (const auto& n : nights) {
        doc["nights"].push_back({{"night", format_date(n.night)},
                                 {"start", format_iso8601(n.start)},
                                 {"end", format_iso8601(n.end)},
                                 {"episodes", n.episodes},
                                 {"total_sleep_min", n.total_sleep_min},
                                 {"awake_min", n.awake_min},
                                 {"deep_sleep_min", n.deep_sleep_min}});
    }
    doc["workouts"] = nlohmann::ordered_json::array();
    for (const auto& w : workouts) {
        doc["workouts"].push_back({{"date", format_date(w.date)},
                                   {"activity", w.activity},
                                   {"start", format_iso8601(w.start)},
                                   {"end", format_iso8601(w.end)},
                                   {"on_event_day", w.on_event_day}});
    }
    return doc.dump(2) + "\n";
}

Fixture generate_fixture(const FixtureSpec& spec) {
    spec.validate();
    const HomeZone zone = HomeZone::load(spec.home_tz);
    Rng rng(spec.seed);

    std::vector<Date> all_days;
    for (auto d = sys_days(spec.first_day); d <= sys_days(spec.last_day); d += days(1)) all_days.emplace_back(d);
    std::vector<Date> work_days;
    std::copy_if(all_days.begin(), all_days.end(), std::back_inserter(work_days),
                 [&](Date d) { return spec.include_weekends || !is_weekend(d); });

    // ---- events per day, hitting total_events exactly when requested
    std::vector<int> counts(work_days.size());
    for (auto& c : counts) c = static_cast<int>(rng.uniform(spec.events_per_day_min, spec.events_per_day_max));
    if (spec.total_events) {
        const long lo = static_cast<long>(work_days.size()) * spec.events_per_day_min;
        const long hi = static_cast<long>(work_days.size()) * spec.events_per_day_max;
        if (*spec.total_events < lo || *spec.total_events > hi) {
            throw Error(ErrorKind::Config, "fixture spec: key 'total_events': " + std::to_string(*spec.total_events) +
                                               " cannot be spread over " + std::to_string(work_days.size()) +
                                               " days within events_per_day bounds");
        }
        long sum = 0;
        for (int c : counts) sum += c;
        while (sum != *spec.total_events) {
            auto i = static_cast<std::size_t>(rng.uniform(0, static_cast<std::int64_t>(counts.size()) - 1));
            if (sum > *spec.total_events && counts[i] > spec.events_per_day_min) {
                --counts[i];
                --sum;
            } else if (sum < *spec.total_events && counts[i] < spec.events_per_day_max) {
                ++counts[i];
                ++sum;
            }
        }
    }

    // ---- timed events: sequential, non-overlapping, separated by at least 5 minutes
    std::vector<TimedEvent> events;
    for (std::size_t i = 0; i < work_days.size(); ++i) {
        long cursor = 8 * 60 + rng.uniform(0, 12) * 5;
        for (int k = 0; k < counts[i]; ++k) {
            long duration = rng.uniform(1, 4) * 15;
            const auto& subject = kSubjects[rng.uniform(0, std::size(kSubjects) - 1)];
            events.push_back({work_days[i], subject.name, zone.from_local(work_days[i], Seconds(cursor * 60)),
                              zone.from_local(work_days[i], Seconds((cursor + duration) * 60))});
            cursor += duration + rng.uniform(1, 12) * 5;
        }
    }

    std::size_t matched = spec.matched_events
                              ? static_cast<std::size_t>(*spec.matched_events)
                              : static_cast<std::size_t>(std::llround(spec.hrv_coverage * static_cast<double>(events.size())));
    if (matched > events.size()) {
        throw Error(ErrorKind::Config, "fixture spec: key 'matched_events': exceeds the number of timed events");
    }
    std::vector<std::size_t> order(events.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<bool> covered(events.size(), false);
    for (std::size_t i = 0; i < matched; ++i) covered[order[i]] = true;

    // ---- HRV samples
    std::vector<Sample> hrv;
    auto hrv_value = [&] { return static_cast<double>(rng.uniform(200, 1100)) / 10.0; };
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& ev = events[i];
        const long span = (ev.end - ev.start).count();
        if (covered[i]) {
            auto n = rng.uniform(1, spec.max_samples_per_event);
            for (int k = 0; k < n; ++k) hrv.push_back({ev.start + Seconds(rng.uniform(0, span - 1)), hrv_value()});
        } else if (rng.chance(0.3)) {
            // exactly on the exclusive end: must not count as a match
            hrv.push_back({ev.end, hrv_value()});
        }
    }
    for (Date d : all_days) {
        hrv.push_back({zone.from_local(d, Seconds(rng.uniform(2 * 3600, 5 * 3600))), hrv_value()});
        hrv.push_back({zone.from_local(d, Seconds(rng.uniform(6 * 3600, 7 * 3600 + 1800))), hrv_value()});
        hrv.push_back({zone.from_local(d, Seconds(rng.uniform(21 * 3600 + 1800, 23 * 3600))), hrv_value()});
    }
    std::stable_sort(hrv.begin(), hrv.end(), [](const Sample& a, const Sample& b) { return a.at < b.at; });

    // ---- resting heart rate, one per day
    std::vector<Sample> resting;
    for (Date d : all_days) {
        resting.push_back({zone.from_local(d, Seconds(rng.uniform(6 * 3600, 9 * 3600))),
                           static_cast<double>(rng.uniform(48, 72))});
    }

    // ---- sleep: contiguous episodes, never two of the same stage in a row
    FixtureManifest manifest;
    std::vector<Episode> sleep;
    for (Date d : all_days) {
        if (rng.chance(spec.missing_night_probability)) continue;
        int asleep = static_cast<int>(std::lround(rng.normal(spec.mean_total_sleep_min, spec.sd_total_sleep_min)));
        asleep = std::clamp(asleep, 180, 540);
        int awake = static_cast<int>(std::lround(asleep * spec.awake_fraction * (0.25 + 1.5 * rng.unit())));
        int deep = static_cast<int>(std::lround(asleep * spec.deep_fraction * (0.7 + 0.6 * rng.unit())));
        int rem = static_cast<int>(std::lround(asleep * 0.2));
        deep = std::min(deep, asleep - rem);
        int core = asleep - deep - rem;

        auto core_parts = split_minutes(core, 3, rng);
        auto deep_parts = split_minutes(deep, 3, rng);
        auto rem_parts = split_minutes(rem, 3, rng);
        auto awake_parts = split_minutes(awake, 3, rng);

        std::vector<std::pair<const char*, int>> plan;
        auto add = [&](const char* stage, int minutes) {
            if (minutes <= 0) return;
            if (!plan.empty() && plan.back().first == stage) {
                plan.back().second += minutes;
            } else {
                plan.emplace_back(stage, minutes);
            }
        };
        for (int c = 0; c < 3; ++c) {
            add("AsleepCore", core_parts[c]);
            add("AsleepDeep", deep_parts[c]);
            add("AsleepREM", rem_parts[c]);
            add("Awake", awake_parts[c]);
        }

        NightTruth truth;
        truth.night = d;
        truth.start = zone.from_local(d, Seconds((22 * 60 + rng.uniform(0, 150)) * 60));
        Instant cursor = truth.start;
        for (const auto& [stage, minutes] : plan) {
            Instant next = cursor + Seconds(minutes * 60);
            sleep.push_back({cursor, next, stage});
            cursor = next;
            ++truth.episodes;
        }
        truth.end = cursor;
        truth.total_sleep_min = asleep;
        truth.awake_min = awake;
        truth.deep_sleep_min = deep;
        manifest.nights.push_back(truth);
    }

    // ---- workouts
    std::set<Date> event_days;
    for (const auto& ev : events) event_days.insert(ev.day);
    std::vector<WorkoutRec> workouts;
    for (Date d : all_days) {
        if (!rng.chance(spec.workout_probability)) continue;
        double pick = rng.unit();
        std::string activity = pick < 0.6 ? "Walking" : pick < 0.85 ? "Running" : "Cycling";
        long start_min = rng.chance(0.5) ? 12 * 60 + rng.uniform(0, 6) * 5 : 18 * 60 + 30 + rng.uniform(0, 6) * 5;
        long duration = rng.uniform(4, 9) * 5;
        WorkoutRec w{zone.from_local(d, Seconds(start_min * 60)),
                     zone.from_local(d, Seconds((start_min + duration) * 60)), activity};
        manifest.workouts.push_back({d, activity, w.start, w.end, event_days.contains(d)});
        workouts.push_back(std::move(w));
    }

    // ---- all-day events
    std::vector<std::pair<Date, const char*>> all_day;
    for (int i = 0; i < spec.all_day_events; ++i) {
        Date d = all_days[static_cast<std::size_t>(rng.uniform(0, static_cast<std::int64_t>(all_days.size()) - 1))];
        all_day.emplace_back(d, kAllDaySubjects[rng.uniform(0, std::size(kAllDaySubjects) - 1)]);
    }
    std::stable_sort(all_day.begin(), all_day.end(),
                     [](const auto& a, const auto& b) { return sys_days(a.first) < sys_days(b.first); });

    // ---- calendar CSV, Outlook layout
    std::ostringstream cal;
    csv::write_row(cal, {"Subject", "Start Date", "Start Time", "End Date", "End Time", "All day event",
                         "Reminder on/off", "Categories", "Location", "Show time as"});
    auto quoted_row = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) cal << ',';
            cal << '"';
            for (char c : fields[i]) {
                if (c == '"') cal << '"';
                cal << c;
            }
            cal << '"';
        }
        cal << "\r\n";
    };
    std::size_t next_all_day = 0;
    auto flush_all_day_until = [&](std::optional<Date> day) {
        while (next_all_day < all_day.size() && (!day || sys_days(all_day[next_all_day].first) <= sys_days(*day))) {
            const auto& [d, subject] = all_day[next_all_day++];
            quoted_row({subject, outlook_date(d), "12:00:00 AM", outlook_date(add_days(d, 1)), "12:00:00 AM", "True",
                        "False", "", "", "3"});
        }
    };
    for (const auto& ev : events) {
        flush_all_day_until(ev.day);
        auto s = zone.to_local(ev.start);
        auto e = zone.to_local(ev.end);
        quoted_row({ev.subject, outlook_date(s.date), outlook_time(s.time_of_day), outlook_date(e.date),
                    outlook_time(e.time_of_day), "False", "True", "", "Teams", "2"});
    }
    flush_all_day_until(std::nullopt);

    // ---- health export XML
    std::ostringstream xml;
    xml << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<!DOCTYPE HealthData [\n"
        << "<!ELEMENT HealthData (ExportDate,Me,(Record|Workout)*)>\n"
        << "<!ATTLIST HealthData locale CDATA #REQUIRED>\n"
        << "<!ELEMENT ExportDate EMPTY>\n"
        << "<!ATTLIST ExportDate value CDATA #REQUIRED>\n"
        << "]>\n"
        << "<HealthData locale=\"en_NL\">\n"
        << " <ExportDate value=\"" << apple(zone.from_local(add_days(spec.last_day, 1), Seconds(9 * 3600)), zone)
        << "\"/>\n"
        << " <Me HKCharacteristicTypeIdentifierDateOfBirth=\"\" HKCharacteristicTypeIdentifierBiologicalSex=\"HKBiologicalSexNotSet\"/>\n";
    std::size_t records = 0;
    auto record_open = [&](const char* type, const char* unit, Instant start, Instant end, const std::string& value) {
        xml << " <Record type=\"" << type << "\" sourceName=\"Apple Watch\" sourceVersion=\"11.2\"";
        if (unit) xml << " unit=\"" << unit << "\"";
        xml << " creationDate=\"" << apple(end, zone) << "\" startDate=\"" << apple(start, zone) << "\" endDate=\""
            << apple(end, zone) << "\" value=\"" << value << "\"";
        ++records;
    };
    for (const auto& s : hrv) {
        record_open("HKQuantityTypeIdentifierHeartRateVariabilitySDNN", "ms", s.at, s.at + Seconds(60),
                    one_decimal(s.value));
        xml << ">\n  <HeartRateVariabilityMetadataList>\n"
            << "   <InstantaneousBeatsPerMinute bpm=\"62\" time=\"9:30:01.12 AM\"/>\n"
            << "   <InstantaneousBeatsPerMinute bpm=\"64\" time=\"9:30:02.05 AM\"/>\n"
            << "  </HeartRateVariabilityMetadataList>\n </Record>\n";
    }
    for (const auto& s : resting) {
        record_open("HKQuantityTypeIdentifierRestingHeartRate", "count/min", s.at, s.at + Seconds(60),
                    one_decimal(s.value));
        xml << "/>\n";
    }
    for (const auto& e : sleep) {
        record_open("HKCategoryTypeIdentifierSleepAnalysis", nullptr, e.start, e.end,
                    std::string(kSleepPrefix) + e.value);
        xml << "/>\n";
    }
    for (Date d : all_days) {
        // step counts are not tracked and must be ignored by the parser
        Instant at = zone.from_local(d, Seconds(10 * 3600));
        record_open("HKQuantityTypeIdentifierStepCount", "count", at, at + Seconds(600),
                    std::to_string(rng.uniform(50, 1500)));
        xml << "/>\n";
    }
    for (const auto& w : workouts) {
        const long minutes = (w.end - w.start).count() / 60;
        xml << " <Workout workoutActivityType=\"HKWorkoutActivityType" << w.activity << "\" duration=\"" << minutes
            << "\" durationUnit=\"min\" sourceName=\"Apple Watch\" sourceVersion=\"11.2\" creationDate=\""
            << apple(w.end, zone) << "\" startDate=\"" << apple(w.start, zone) << "\" endDate=\"" << apple(w.end, zone)
            << "\">\n  <WorkoutStatistics type=\"HKQuantityTypeIdentifierActiveEnergyBurned\" startDate=\""
            << apple(w.start, zone) << "\" endDate=\"" << apple(w.end, zone)
            << "\" sum=\"120\" unit=\"Cal\"/>\n </Workout>\n";
        ++records;
    }
    xml << "</HealthData>\n";

    manifest.seed = spec.seed;
    manifest.timed_events = events.size();
    manifest.all_day_events = all_day.size();
    manifest.matched_events = matched;
    manifest.hrv_samples = hrv.size();
    manifest.health_records = records;
    manifest.event_days = event_days.size();

    Fixture out;
    out.calendar_csv = cal.str();
    out.health_xml = xml.str();
    out.manifest = std::move(manifest);
    out.category_work = kWorkPattern;
    out.category_private = kPrivatePattern;
    return out;
}

void write_bulk_health_xml(std::ostream& out, std::size_t records, std::uint64_t seed) {
    Rng rng(seed);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<HealthData locale=\"en_NL\">\n";
    Instant t = instant_from_civil(Date{year(2024), month(11), day(13)}, Seconds(0), 3600);
    for (std::size_t i = 0; i < records; ++i) {
        t = t + Seconds(rng.uniform(30, 600));
        auto stamp = format_apple_timestamp(t);
        out << " <Record type=\"HKQuantityTypeIdentifierHeartRateVariabilitySDNN\" sourceName=\"Apple Watch\" "
               "unit=\"ms\" startDate=\""
            << stamp << "\" endDate=\"" << stamp << "\" value=\"" << rng.uniform(15, 120) << "\"/>\n";
    }
    out << "</HealthData>\n";
}

}  // namespace wearpm
