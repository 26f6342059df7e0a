#include "wearpm/export.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <regex>
#include <set>

#include <json.hpp>

#include "wearpm/csv.hpp"
#include "wearpm/error.hpp"

namespace wearpm {

namespace {

constexpr std::string_view kCasePrefix = "case:";
constexpr std::string_view kOriginColumn = "origin";

std::string cell(const AttrMap& attrs, const std::string& key) {
    auto it = attrs.find(key);
    if (it == attrs.end()) return {};
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
                return format_number(v);
            } else if constexpr (std::is_same_v<T, bool>) {
                return v ? "true" : "false";
            } else {
                return v;
            }
        },
        it->second);
}

std::string timestamp(Instant t, const HomeZone& zone) { return format_iso8601(zone.normalize(t)); }

std::string xml_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

void xes_attribute(std::ostream& out, const std::string& indent, const std::string& key, const AttrValue& value) {
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
                out << indent << "<float key=\"" << xml_escape(key) << "\" value=\"" << format_number(v) << "\"/>\n";
            } else if constexpr (std::is_same_v<T, bool>) {
                out << indent << "<boolean key=\"" << xml_escape(key) << "\" value=\"" << (v ? "true" : "false")
                    << "\"/>\n";
            } else {
                out << indent << "<string key=\"" << xml_escape(key) << "\" value=\"" << xml_escape(v) << "\"/>\n";
            }
        },
        value);
}

std::string xes_timestamp(Instant t, const HomeZone& zone) {
    auto iso = timestamp(t, zone);
    return iso.substr(0, 19) + ".000" + iso.substr(19);
}

void check_sink(const std::ostream& sink, const char* what) {
    if (!sink) throw Error(ErrorKind::SinkWrite, std::string("failed writing ") + what);
}

std::regex compile_pattern(const std::string& pattern) {
    try {
        return std::regex(pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
        throw Error(ErrorKind::Config, "invalid group pattern '" + pattern + "': " + e.what());
    }
}

std::optional<EventOrigin> parse_origin(std::string_view s) {
    if (s == "calendar") return EventOrigin::Calendar;
    if (s == "workout") return EventOrigin::Workout;
    if (s == "sleep") return EventOrigin::Sleep;
    return std::nullopt;
}

}  // namespace

std::string format_number(double v) {
    if (v == 0.0) return "0";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string PseudonymMap::to_json() const {
    nlohmann::ordered_json doc;
    doc["seed"] = seed;
    doc["mapping"] = nlohmann::ordered_json::object();
    for (const auto& [original, pseudonym] : mapping) doc["mapping"][original] = pseudonym;
    return doc.dump(2) + "\n";
}

std::pair<EventLog, PseudonymMap> pseudonymize(const EventLog& log, std::uint64_t seed, bool category_aware) {
    std::map<std::string, Category> names;
    for (const auto& c : log.cases) {
        for (const auto& e : c.events) {
            if (e.origin == EventOrigin::Calendar) names.emplace(e.activity, e.category);
        }
    }

    std::vector<std::pair<std::string, Category>> order(names.begin(), names.end());
    std::mt19937_64 rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }

    PseudonymMap map;
    map.seed = seed;
    std::map<std::string, int> counters;
    for (const auto& [name, category] : order) {
        std::string prefix = "Act";
        if (category_aware && category == Category::Work) prefix = "Work";
        if (category_aware && category == Category::Private) prefix = "Private";
        map.mapping.emplace(name, prefix + std::to_string(++counters[prefix]));
    }

    EventLog out = log;
    for (auto& c : out.cases) {
        for (auto& e : c.events) {
            if (e.origin == EventOrigin::Calendar) e.activity = map.mapping.at(e.activity);
        }
        c.sort_events();
    }
    return {std::move(out), std::move(map)};
}

std::size_t export_csv(const EventLog& log, std::ostream& sink, const HomeZone& zone) {
    std::vector<std::string> header{"case_id", "activity", "start_time", "complete_time", std::string(kOriginColumn)};
    for (const auto& [name, type] : log.schema.event_attributes) header.push_back(name);
    for (const auto& [name, type] : log.schema.case_attributes) header.push_back(std::string(kCasePrefix) + name);
    csv::write_row(sink, header);

    std::size_t rows = 0;
    std::vector<std::string> fields;
    for (const auto& c : log.cases) {
        const std::string case_id = format_date(c.case_id);
        for (const auto& e : c.events) {
            fields.clear();
            fields.push_back(case_id);
            fields.push_back(e.activity);
            fields.push_back(timestamp(e.interval.start, zone));
            fields.push_back(timestamp(e.interval.end, zone));
            fields.push_back(to_string(e.origin));
            for (const auto& [name, type] : log.schema.event_attributes) fields.push_back(cell(e.attributes, name));
            for (const auto& [name, type] : log.schema.case_attributes) fields.push_back(cell(c.attributes, name));
            csv::write_row(sink, fields);
            ++rows;
        }
    }
    sink.flush();
    check_sink(sink, "CSV export");
    return rows;
}

EventLog read_log_csv(std::istream& input, const HomeZone& zone) {
    csv::Reader reader(input);
    std::optional<std::vector<std::string>> header;
    std::vector<std::vector<std::string>> rows;
    try {
        header = reader.next();
        if (!header) throw Error(ErrorKind::MissingColumn, "event log CSV is empty");
        while (auto row = reader.next()) {
            if (row->size() == 1 && row->front().empty()) continue;
            if (row->size() != header->size()) {
                throw Error(ErrorKind::MalformedRow, "line " + std::to_string(reader.line()) + ": expected " +
                                                         std::to_string(header->size()) + " fields");
            }
            rows.push_back(std::move(*row));
        }
    } catch (const std::runtime_error& e) {
        if (dynamic_cast<const Error*>(&e)) throw;
        throw Error(ErrorKind::MalformedRow, e.what());
    }

    static const char* fixed[] = {"case_id", "activity", "start_time", "complete_time"};
    for (std::size_t i = 0; i < 4; ++i) {
        if (header->size() <= i || (*header)[i] != fixed[i]) {
            throw Error(ErrorKind::MissingColumn, std::string("event log CSV column ") + std::to_string(i + 1) +
                                                      " must be '" + fixed[i] + "'");
        }
    }

    struct Column {
        std::string name;
        bool is_case = false;
        AttrType type = AttrType::Number;
    };
    std::optional<std::size_t> origin_col;
    std::vector<std::pair<std::size_t, Column>> columns;
    for (std::size_t i = 4; i < header->size(); ++i) {
        const auto& h = (*header)[i];
        if (h == kOriginColumn) {
            origin_col = i;
            continue;
        }
        Column col;
        col.is_case = h.rfind(kCasePrefix, 0) == 0;
        col.name = col.is_case ? h.substr(kCasePrefix.size()) : h;

        bool all_bool = true;
        bool all_number = true;
        bool any = false;
        for (const auto& r : rows) {
            const auto& v = r[i];
            if (v.empty()) continue;
            any = true;
            if (v != "true" && v != "false") all_bool = false;
            double d;
            auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
            if (ec != std::errc() || p != v.data() + v.size()) all_number = false;
        }
        col.type = !any ? AttrType::Number : all_bool ? AttrType::Boolean : all_number ? AttrType::Number : AttrType::Text;
        columns.emplace_back(i, std::move(col));
    }

    EventLog log;
    for (const auto& [i, col] : columns) {
        (col.is_case ? log.schema.case_attributes : log.schema.event_attributes).emplace(col.name, col.type);
    }

    auto value_of = [](const std::string& text, AttrType type) -> AttrValue {
        switch (type) {
            case AttrType::Boolean: return text == "true";
            case AttrType::Number: {
                double d = 0.0;
                std::from_chars(text.data(), text.data() + text.size(), d);
                return d;
            }
            case AttrType::Text: break;
        }
        return text;
    };

    for (std::size_t n = 0; n < rows.size(); ++n) {
        const auto& r = rows[n];
        auto bad = [&](const std::string& why) {
            return Error(ErrorKind::MalformedRow, "data row " + std::to_string(n + 1) + ": " + why);
        };
        auto date = parse_iso_date(r[0]);
        auto start = parse_iso8601(r[2]);
        auto end = parse_iso8601(r[3]);
        if (!date) throw bad("bad case_id");
        if (!start || !end || *end < *start) throw bad("bad timestamps");

        if (log.cases.empty() || log.cases.back().case_id != *date) {
            Case c;
            c.case_id = *date;
            for (const auto& [i, col] : columns) {
                if (col.is_case && !r[i].empty()) c.attributes.emplace(col.name, value_of(r[i], col.type));
            }
            log.cases.push_back(std::move(c));
        }
        EnrichedEvent e;
        e.activity = r[1];
        e.interval = Interval(zone.normalize(*start), zone.normalize(*end));
        if (origin_col) {
            auto o = parse_origin(r[*origin_col]);
            if (!o) throw bad("unknown origin '" + r[*origin_col] + "'");
            e.origin = *o;
        }
        for (const auto& [i, col] : columns) {
            if (!col.is_case && !r[i].empty()) e.attributes.emplace(col.name, value_of(r[i], col.type));
        }
        log.cases.back().events.push_back(std::move(e));
    }
    log.match_stats = compute_match_stats(log);
    return log;
}

std::size_t export_xes(const EventLog& log, std::ostream& sink, const HomeZone& zone, XesOptions options) {
    sink << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         << "<log xes.version=\"2.0\" xes.features=\"\" xmlns=\"http://www.xes-standard.org/\">\n"
         << "  <extension name=\"Concept\" prefix=\"concept\" uri=\"http://www.xes-standard.org/concept.xesext\"/>\n"
         << "  <extension name=\"Time\" prefix=\"time\" uri=\"http://www.xes-standard.org/time.xesext\"/>\n";
    if (options.lifecycle_pairs) {
        sink << "  <extension name=\"Lifecycle\" prefix=\"lifecycle\" "
                "uri=\"http://www.xes-standard.org/lifecycle.xesext\"/>\n";
    }
    sink << "  <global scope=\"trace\">\n"
         << "    <string key=\"concept:name\" value=\"__INVALID__\"/>\n"
         << "  </global>\n"
         << "  <global scope=\"event\">\n"
         << "    <string key=\"concept:name\" value=\"__INVALID__\"/>\n"
         << "    <date key=\"time:timestamp\" value=\"1970-01-01T00:00:00.000+00:00\"/>\n";
    if (options.lifecycle_pairs) sink << "    <string key=\"lifecycle:transition\" value=\"complete\"/>\n";
    sink << "  </global>\n"
         << "  <classifier name=\"Activity\" keys=\"concept:name\"/>\n";

    struct Entry {
        Instant at;
        const EnrichedEvent* event;
        const char* transition;
    };
    std::vector<Entry> entries;
    std::size_t traces = 0;
    for (const auto& c : log.cases) {
        sink << "  <trace>\n"
             << "    <string key=\"concept:name\" value=\"" << format_date(c.case_id) << "\"/>\n";
        for (const auto& [key, value] : c.attributes) xes_attribute(sink, "    ", key, value);

        entries.clear();
        for (const auto& e : c.events) {
            if (options.lifecycle_pairs) {
                entries.push_back({e.interval.start, &e, "start"});
                entries.push_back({e.interval.end, &e, "complete"});
            } else {
                entries.push_back({e.interval.start, &e, nullptr});
            }
        }
        std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.at < b.at; });

        for (const auto& entry : entries) {
            const auto& e = *entry.event;
            sink << "    <event>\n"
                 << "      <string key=\"concept:name\" value=\"" << xml_escape(e.activity) << "\"/>\n";
            if (entry.transition) {
                sink << "      <string key=\"lifecycle:transition\" value=\"" << entry.transition << "\"/>\n";
            }
            sink << "      <date key=\"time:timestamp\" value=\"" << xes_timestamp(entry.at, zone) << "\"/>\n"
                 << "      <string key=\"origin\" value=\"" << to_string(e.origin) << "\"/>\n";
            if (!entry.transition) {
                xes_attribute(sink, "      ", "duration_min",
                              static_cast<double>(e.interval.duration().count()) / 60.0);
            }
            for (const auto& [key, value] : e.attributes) xes_attribute(sink, "      ", key, value);
            sink << "    </event>\n";
        }
        sink << "  </trace>\n";
        ++traces;
    }
    sink << "</log>\n";
    sink.flush();
    check_sink(sink, "XES export");
    return traces;
}

PlotTable emit_plot_data(const EventLog& log, PlotView view, const PlotOptions& options) {
    PlotTable table;
    auto pattern = compile_pattern(options.group_pattern);

    if (view == PlotView::HrvByActivityGroup) {
        if (!log.schema.event_attributes.contains(attr::kHrvMedian)) {
            throw Error(ErrorKind::UnknownAttribute, "log has no hrv_median_ms event attribute");
        }
        table.columns = {"group", "date", std::string(attr::kHrvMedian)};
        for (const auto& c : log.cases) {
            for (const auto& e : c.events) {
                std::smatch m;
                if (!std::regex_search(e.activity, m, pattern)) continue;
                auto hrv = e.number(attr::kHrvMedian);
                if (!hrv) continue;
                std::string label = m.size() > 1 && m[1].matched ? m[1].str() : e.activity;
                table.rows.push_back({std::move(label), format_date(c.case_id), {*hrv}});
            }
        }
        return table;
    }

    std::vector<std::string> attrs = options.attributes;
    if (attrs.empty()) {
        for (const auto& [name, type] : log.schema.case_attributes) {
            if (type == AttrType::Number) attrs.push_back(name);
        }
    }
    for (const auto& a : attrs) {
        if (!log.schema.case_attributes.contains(a)) {
            throw Error(ErrorKind::UnknownAttribute, "case attribute '" + a + "' is not in the log schema");
        }
    }
    if (options.cohort) {
        for (const auto& clause : options.cohort->clauses) {
            if (!log.schema.case_attributes.contains(clause.attribute)) {
                throw Error(ErrorKind::UnknownAttribute,
                            "cohort attribute '" + clause.attribute + "' is not in the log schema");
            }
        }
    }

    table.columns = {"row", "case_id"};
    table.columns.insert(table.columns.end(), attrs.begin(), attrs.end());

    std::vector<double> sums(attrs.size(), 0.0);
    std::vector<std::size_t> counts(attrs.size(), 0);
    for (const auto& c : log.cases) {
        if (c.is_workday()) {
            for (std::size_t i = 0; i < attrs.size(); ++i) {
                if (auto v = c.number(attrs[i])) {
                    sums[i] += *v;
                    ++counts[i];
                }
            }
        }
        bool in_cohort = std::any_of(c.events.begin(), c.events.end(),
                                     [&](const EnrichedEvent& e) { return std::regex_search(e.activity, pattern); });
        if (options.cohort && !options.cohort->matches(c)) in_cohort = false;
        if (!in_cohort) continue;

        PlotRow row{"case", format_date(c.case_id), {}};
        for (const auto& a : attrs) row.values.push_back(c.number(a));
        table.rows.push_back(std::move(row));
    }

    PlotRow baseline{kWorkdayMeanLabel, "", {}};
    for (std::size_t i = 0; i < attrs.size(); ++i) {
        baseline.values.push_back(counts[i] ? std::optional<double>(sums[i] / static_cast<double>(counts[i]))
                                            : std::nullopt);
    }
    table.rows.push_back(std::move(baseline));
    return table;
}

void write_plot_csv(const PlotTable& table, std::ostream& sink) {
    csv::write_row(sink, table.columns);
    std::vector<std::string> fields;
    for (const auto& row : table.rows) {
        fields = {row.label, row.date};
        for (const auto& v : row.values) fields.push_back(v ? format_number(*v) : std::string{});
        csv::write_row(sink, fields);
    }
    sink.flush();
    check_sink(sink, "plot table");
}

}  // namespace wearpm
