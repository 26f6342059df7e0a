#include "wearpm/calendar.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "wearpm/config.hpp"
#include "wearpm/csv.hpp"
#include "wearpm/error.hpp"

namespace wearpm {

namespace {

using namespace std::chrono;

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

struct FormatFields {
    int year = -1, month = -1, day = -1;
    int hour = -1, minute = -1, second = -1;
    std::optional<bool> pm;
};

std::optional<FormatFields> match_format(std::string_view text, std::string_view format, bool time_mode) {
    FormatFields f;
    text = trim(text);
    std::size_t t = 0;
    std::size_t i = 0;
    auto read_digits = [&](std::size_t min_width, std::size_t max_width) -> std::optional<int> {
        std::size_t start = t;
        int value = 0;
        while (t < text.size() && t - start < max_width && std::isdigit(static_cast<unsigned char>(text[t]))) {
            value = value * 10 + (text[t] - '0');
            ++t;
        }
        if (t - start < min_width) return std::nullopt;
        return value;
    };

    while (i < format.size()) {
        if (format.substr(i, 4) == "YYYY") {
            auto v = read_digits(4, 4);
            if (!v) return std::nullopt;
            f.year = *v;
            i += 4;
            continue;
        }
        if (format.substr(i, 5) == "AM/PM") {
            auto marker = lower(text.substr(t, 2));
            if (marker != "am" && marker != "pm") return std::nullopt;
            f.pm = marker == "pm";
            t += 2;
            i += 5;
            continue;
        }
        char c = format[i];
        if (c == 'M' || c == 'D' || c == 'H' || c == 'S') {
            std::size_t run = 0;
            while (i + run < format.size() && format[i + run] == c) ++run;
            if (run > 2) return std::nullopt;
            auto v = read_digits(1, 2);
            if (!v) return std::nullopt;
            switch (c) {
                case 'M': (time_mode ? f.minute : f.month) = *v; break;
                case 'D': f.day = *v; break;
                case 'H': f.hour = *v; break;
                case 'S': f.second = *v; break;
            }
            i += run;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (t >= text.size() || !std::isspace(static_cast<unsigned char>(text[t]))) return std::nullopt;
            while (t < text.size() && std::isspace(static_cast<unsigned char>(text[t]))) ++t;
            ++i;
            continue;
        }
        if (t >= text.size() || text[t] != c) return std::nullopt;
        ++t;
        ++i;
    }
    if (t != text.size()) return std::nullopt;
    return f;
}

bool parse_flag(std::string_view text, bool& out) {
    auto v = lower(trim(text));
    if (v == "true" || v == "yes" || v == "1" || v == "on") {
        out = true;
        return true;
    }
    if (v == "false" || v == "no" || v == "0" || v == "off" || v.empty()) {
        out = false;
        return true;
    }
    return false;
}

Interval all_day_interval(Date start, std::optional<Date> end, const HomeZone& zone) {
    Instant s = zone.from_local(start, Seconds(0));
    Instant e = end ? zone.from_local(*end, Seconds(0)) : s;
    if (!(s < e)) e = zone.from_local(add_days(start, 1), Seconds(0));
    return Interval(s, e);
}

// ---- ICS --------------------------------------------------------------------

struct ContentLine {
    std::string name;
    std::map<std::string, std::string> params;
    std::string value;
};

std::vector<std::string> unfold(std::istream& in) {
    std::vector<std::string> lines;
    std::string raw;
    while (std::getline(in, raw)) {
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        if (!raw.empty() && (raw.front() == ' ' || raw.front() == '\t') && !lines.empty()) {
            lines.back().append(raw, 1, std::string::npos);
        } else {
            lines.push_back(std::move(raw));
        }
    }
    return lines;
}

std::optional<ContentLine> split_content_line(const std::string& line) {
    ContentLine cl;
    std::size_t i = 0;
    while (i < line.size() && line[i] != ';' && line[i] != ':') ++i;
    if (i == line.size()) return std::nullopt;
    cl.name = line.substr(0, i);
    for (auto& c : cl.name) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));

    while (i < line.size() && line[i] == ';') {
        ++i;
        auto eq = line.find('=', i);
        if (eq == std::string::npos) return std::nullopt;
        std::string key = line.substr(i, eq - i);
        for (auto& c : key) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        i = eq + 1;
        std::string value;
        if (i < line.size() && line[i] == '"') {
            auto close = line.find('"', i + 1);
            if (close == std::string::npos) return std::nullopt;
            value = line.substr(i + 1, close - i - 1);
            i = close + 1;
        } else {
            while (i < line.size() && line[i] != ';' && line[i] != ':') value.push_back(line[i++]);
        }
        cl.params[key] = value;
    }
    if (i >= line.size() || line[i] != ':') return std::nullopt;
    cl.value = line.substr(i + 1);
    return cl;
}

std::string unescape_text(std::string_view v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] == '\\' && i + 1 < v.size()) {
            char n = v[++i];
            out.push_back(n == 'n' || n == 'N' ? '\n' : n);
        } else {
            out.push_back(v[i]);
        }
    }
    return out;
}

struct IcsTime {
    Instant at;
    bool is_date = false;
    Date date;
};

class IcsZones {
public:
    explicit IcsZones(const HomeZone& home) : home_(home) {}

    const HomeZone& get(const std::string& tzid) {
        if (tzid.empty()) return home_;
        auto it = cache_.find(tzid);
        if (it == cache_.end()) {
            std::optional<HomeZone> zone;
            try {
                zone = HomeZone::load(tzid);
            } catch (const Error&) {
                // Windows zone names and custom VTIMEZONEs fall back to the home zone.
            }
            it = cache_.emplace(tzid, zone).first;
        }
        return it->second ? *it->second : home_;
    }

private:
    const HomeZone& home_;
    std::map<std::string, std::optional<HomeZone>> cache_;
};

std::optional<IcsTime> parse_ics_time(const ContentLine& cl, IcsZones& zones) {
    const std::string& v = cl.value;
    auto digits = [&](std::size_t pos, std::size_t n) -> std::optional<int> {
        if (pos + n > v.size()) return std::nullopt;
        int out = 0;
        for (std::size_t i = pos; i < pos + n; ++i) {
            if (!std::isdigit(static_cast<unsigned char>(v[i]))) return std::nullopt;
            out = out * 10 + (v[i] - '0');
        }
        return out;
    };
    auto y = digits(0, 4), m = digits(4, 2), d = digits(6, 2);
    if (!y || !m || !d) return std::nullopt;
    Date date{year(*y), month(static_cast<unsigned>(*m)), day(static_cast<unsigned>(*d))};
    if (!date.ok()) return std::nullopt;

    auto value_param = cl.params.find("VALUE");
    bool date_only = v.size() == 8 || (value_param != cl.params.end() && value_param->second == "DATE");
    if (date_only) {
        if (v.size() != 8) return std::nullopt;
        return IcsTime{Instant{}, true, date};
    }
    if (v.size() < 15 || v[8] != 'T') return std::nullopt;
    auto hh = digits(9, 2), mi = digits(11, 2), ss = digits(13, 2);
    if (!hh || !mi || !ss || *hh > 23 || *mi > 59 || *ss > 60) return std::nullopt;
    Seconds tod(*hh * 3600 + *mi * 60 + *ss);
    if (v.size() == 16 && v[15] == 'Z') return IcsTime{instant_from_civil(date, tod, 0), false, date};
    if (v.size() != 15) return std::nullopt;
    auto tzid = cl.params.find("TZID");
    const HomeZone& zone = zones.get(tzid == cl.params.end() ? std::string{} : tzid->second);
    return IcsTime{zone.from_local(date, tod), false, date};
}

// RFC 5545 dur-value: [+-]P(nW | nD[T...] | T nH nM nS)
std::optional<Seconds> parse_ics_duration(std::string_view v) {
    bool negative = false;
    if (!v.empty() && (v.front() == '+' || v.front() == '-')) {
        negative = v.front() == '-';
        v.remove_prefix(1);
    }
    if (v.empty() || v.front() != 'P') return std::nullopt;
    v.remove_prefix(1);
    long long total = 0;
    long long number = 0;
    bool have_number = false;
    bool in_time = false;
    for (char c : v) {
        if (std::isdigit(static_cast<unsigned char>(c))) {
            number = number * 10 + (c - '0');
            have_number = true;
            continue;
        }
        if (c == 'T') {
            in_time = true;
            continue;
        }
        if (!have_number) return std::nullopt;
        long long unit = 0;
        if (c == 'W' && !in_time) unit = 7 * 86400;
        else if (c == 'D' && !in_time) unit = 86400;
        else if (c == 'H' && in_time) unit = 3600;
        else if (c == 'M' && in_time) unit = 60;
        else if (c == 'S' && in_time) unit = 1;
        else return std::nullopt;
        total += number * unit;
        number = 0;
        have_number = false;
    }
    if (have_number) return std::nullopt;
    return Seconds(negative ? -total : total);
}

}  // namespace

const char* to_string(Category c) {
    switch (c) {
        case Category::Work: return "Work";
        case Category::Private: return "Private";
        case Category::Unknown: return "Unknown";
    }
    return "?";
}

void SubjectClassifier::add_rule(const std::string& pattern, Category category) {
    try {
        rules_.push_back({pattern, std::regex(pattern, std::regex::ECMAScript | std::regex::icase), category});
    } catch (const std::regex_error& e) {
        throw Error(ErrorKind::Config, "invalid subject pattern '" + pattern + "': " + e.what());
    }
}

Category SubjectClassifier::classify(const std::string& subject) const {
    for (const auto& rule : rules_) {
        if (std::regex_search(subject, rule.regex)) return rule.category;
    }
    return Category::Unknown;
}

SubjectClassifier SubjectClassifier::from_config(const FlatConfig& cfg) {
    SubjectClassifier out;
    if (auto p = cfg.string("category_work")) out.add_rule(*p, Category::Work);
    if (auto p = cfg.string("category_private")) out.add_rule(*p, Category::Private);
    return out;
}

CalendarColumns CalendarColumns::from_config(const FlatConfig& cfg) {
    CalendarColumns c;
    auto take = [&](const char* key, std::string& field) {
        if (auto v = cfg.string(key)) field = *v;
    };
    take("subject", c.subject);
    take("start_date", c.start_date);
    take("start_time", c.start_time);
    take("end_date", c.end_date);
    take("end_time", c.end_time);
    take("all_day", c.all_day);
    take("date_format", c.date_format);
    take("time_format", c.time_format);
    if (auto d = cfg.string("delimiter")) {
        if (d->size() != 1) throw Error(ErrorKind::Config, "key 'delimiter': expected a single character");
        c.delimiter = d->front();
    }
    return c;
}

std::optional<Date> parse_date_format(std::string_view text, std::string_view format) {
    auto f = match_format(text, format, false);
    if (!f || f->year < 0 || f->month < 0 || f->day < 0) return std::nullopt;
    Date d{year(f->year), month(static_cast<unsigned>(f->month)), day(static_cast<unsigned>(f->day))};
    if (!d.ok()) return std::nullopt;
    return d;
}

std::optional<Seconds> parse_time_format(std::string_view text, std::string_view format) {
    auto f = match_format(text, format, true);
    if (!f || f->hour < 0) return std::nullopt;
    int hour = f->hour;
    int minute = std::max(f->minute, 0);
    int second = std::max(f->second, 0);
    if (f->pm) {
        if (hour < 1 || hour > 12) return std::nullopt;
        hour = hour % 12 + (*f->pm ? 12 : 0);
    }
    if (hour > 23 || minute > 59 || second > 59) return std::nullopt;
    return Seconds(hour * 3600 + minute * 60 + second);
}

CalendarParseResult parse_calendar_csv(std::istream& input, const HomeZone& zone,
                                       const CalendarIngestConfig& config) {
    const auto& cols = config.columns;
    csv::Reader reader(input, cols.delimiter);
    CalendarParseResult result;

    std::optional<std::vector<std::string>> header;
    try {
        header = reader.next();
    } catch (const std::runtime_error& e) {
        throw Error(ErrorKind::MalformedRow, e.what());
    }
    if (!header) throw Error(ErrorKind::MissingColumn, "calendar CSV is empty (no header row)");

    auto column = [&](const std::string& name) {
        auto it = std::find_if(header->begin(), header->end(),
                               [&](const std::string& h) { return trim(h) == name; });
        if (it == header->end()) throw Error(ErrorKind::MissingColumn, "calendar CSV has no column '" + name + "'");
        return static_cast<std::size_t>(it - header->begin());
    };
    const std::size_t subject_col = column(cols.subject);
    const std::size_t start_date_col = column(cols.start_date);
    const std::size_t start_time_col = column(cols.start_time);
    const std::size_t end_date_col = column(cols.end_date);
    const std::size_t end_time_col = column(cols.end_time);
    const std::size_t all_day_col = column(cols.all_day);
    const std::size_t needed = std::max({subject_col, start_date_col, start_time_col, end_date_col, end_time_col,
                                         all_day_col}) + 1;

    while (true) {
        std::optional<std::vector<std::string>> row;
        try {
            row = reader.next();
        } catch (const std::runtime_error& e) {
            if (config.strict) throw Error(ErrorKind::MalformedRow, e.what());
            ++result.skipped_rows;
            break;
        }
        if (!row) break;
        if (row->size() == 1 && trim((*row)[0]).empty()) continue;

        auto reject = [&](const std::string& why) {
            if (config.strict) {
                throw Error(ErrorKind::MalformedRow, "line " + std::to_string(reader.line()) + ": " + why);
            }
            ++result.skipped_rows;
        };
        if (row->size() < needed) {
            reject("expected at least " + std::to_string(needed) + " fields");
            continue;
        }
        const auto& r = *row;

        bool all_day = false;
        if (!parse_flag(r[all_day_col], all_day)) {
            reject("unrecognised all-day flag '" + r[all_day_col] + "'");
            continue;
        }
        auto start_date = parse_date_format(r[start_date_col], cols.date_format);
        auto end_date = parse_date_format(r[end_date_col], cols.date_format);
        if (!start_date || (!end_date && !all_day)) {
            reject("unparseable date");
            continue;
        }

        CalendarEvent ev;
        ev.subject = std::string(trim(r[subject_col]));
        ev.all_day = all_day;
        ev.category = config.classifier.classify(ev.subject);
        if (all_day) {
            ev.interval = all_day_interval(*start_date, end_date, zone);
        } else {
            auto start_time = parse_time_format(r[start_time_col], cols.time_format);
            auto end_time = parse_time_format(r[end_time_col], cols.time_format);
            if (!start_time || !end_time) {
                reject("unparseable time");
                continue;
            }
            Instant s = zone.from_local(*start_date, *start_time);
            Instant e = zone.from_local(*end_date, *end_time);
            if (e < s) {
                reject("event ends before it starts");
                continue;
            }
            ev.interval = Interval(s, e);
        }
        result.events.push_back(std::move(ev));
    }
    return result;
}

CalendarParseResult parse_calendar_ics(std::istream& input, const HomeZone& zone,
                                       const CalendarIngestConfig& config) {
    CalendarParseResult result;
    IcsZones zones(zone);
    auto lines = unfold(input);

    auto reject = [&](std::size_t line, const std::string& why) {
        if (config.strict) throw Error(ErrorKind::MalformedIcs, "line " + std::to_string(line) + ": " + why);
        ++result.skipped_rows;
    };

    bool in_event = false;
    bool event_bad = false;
    std::size_t event_line = 0;
    int nested = 0;  // VALARM and friends inside a VEVENT
    std::optional<ContentLine> dtstart, dtend, duration;
    std::string summary;

    for (std::size_t n = 0; n < lines.size(); ++n) {
        if (trim(lines[n]).empty()) continue;
        auto cl = split_content_line(lines[n]);
        if (!cl) {
            if (in_event) {
                event_bad = true;
            } else {
                reject(n + 1, "malformed content line");
            }
            continue;
        }
        auto upper_value = cl->value;
        for (auto& c : upper_value) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));

        if (cl->name == "BEGIN") {
            if (in_event) {
                ++nested;
            } else if (upper_value == "VEVENT") {
                in_event = true;
                event_bad = false;
                event_line = n + 1;
                nested = 0;
                dtstart.reset();
                dtend.reset();
                duration.reset();
                summary.clear();
            }
            continue;
        }
        if (cl->name == "END") {
            if (in_event && nested > 0) {
                --nested;
                continue;
            }
            if (upper_value != "VEVENT") continue;
            if (!in_event) {
                reject(n + 1, "END:VEVENT without BEGIN:VEVENT");
                continue;
            }
            in_event = false;
            if (event_bad) {
                reject(event_line, "malformed line inside VEVENT");
                continue;
            }
            if (!dtstart) {
                reject(event_line, "VEVENT without DTSTART");
                continue;
            }
            auto start = parse_ics_time(*dtstart, zones);
            std::optional<IcsTime> end;
            if (dtend) end = parse_ics_time(*dtend, zones);
            if (!start || (dtend && !end)) {
                reject(event_line, "unparseable DTSTART/DTEND");
                continue;
            }

            CalendarEvent ev;
            ev.subject = summary;
            ev.category = config.classifier.classify(summary);
            ev.all_day = start->is_date;
            if (start->is_date) {
                std::optional<Date> end_date;
                if (end) end_date = end->date;
                if (!end && duration) {
                    auto d = parse_ics_duration(duration->value);
                    if (!d) {
                        reject(event_line, "unparseable DURATION");
                        continue;
                    }
                    end_date = add_days(start->date, static_cast<int>(d->count() / 86400));
                }
                ev.interval = all_day_interval(start->date, end_date, zone);
            } else {
                Instant e = start->at;
                if (end) {
                    if (end->is_date) {
                        reject(event_line, "DTEND is a DATE while DTSTART is a DATE-TIME");
                        continue;
                    }
                    e = end->at;
                } else if (duration) {
                    auto d = parse_ics_duration(duration->value);
                    if (!d) {
                        reject(event_line, "unparseable DURATION");
                        continue;
                    }
                    e = start->at + *d;
                }
                if (e < start->at) {
                    reject(event_line, "event ends before it starts");
                    continue;
                }
                ev.interval = Interval(zone.normalize(start->at), zone.normalize(e));
            }
            result.events.push_back(std::move(ev));
            continue;
        }
        if (!in_event || nested > 0) continue;
        if (cl->name == "DTSTART") dtstart = *cl;
        else if (cl->name == "DTEND") dtend = *cl;
        else if (cl->name == "DURATION") duration = *cl;
        else if (cl->name == "SUMMARY") summary = unescape_text(cl->value);
    }
    if (in_event) reject(event_line, "unterminated VEVENT");
    return result;
}

std::vector<CalendarEvent> filter_all_day(const std::vector<CalendarEvent>& events) {
    std::vector<CalendarEvent> out;
    std::copy_if(events.begin(), events.end(), std::back_inserter(out), [](const auto& e) { return !e.all_day; });
    return out;
}

std::vector<CalendarEvent> filter_date_range(const std::vector<CalendarEvent>& events, Date from, Date to,
                                             const HomeZone& zone) {
    const Instant lo = zone.from_local(from, Seconds(0));
    const Instant hi = zone.from_local(add_days(to, 1), Seconds(0));
    std::vector<CalendarEvent> out;
    std::copy_if(events.begin(), events.end(), std::back_inserter(out), [&](const auto& e) {
        return lo <= e.interval.start && e.interval.end <= hi;
    });
    return out;
}

}  // namespace wearpm
