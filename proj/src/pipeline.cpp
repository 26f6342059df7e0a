#include "wearpm/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace wearpm {

namespace fs = std::filesystem;

namespace {

const std::set<std::string, std::less<>> kPathKeys = {"health", "calendar", "column_map", "log", "out", "mapping_out"};

const std::set<std::string, std::less<>> kKnownKeys = {
    "home_tz", "health", "calendar", "calendar_format", "column_map", "log", "from", "to", "strict",
    "sleep_merge_tolerance", "preferred_sources", "category_work", "category_private", "strategy", "aggregate",
    "night_window", "previous_night", "cohort", "derive", "sleep_per_episode", "pseudonymize", "seed",
    "category_aware", "mapping_out", "format", "view", "group_pattern", "xes_lifecycle", "out"};

[[noreturn]] void bad_key(std::string_view key, const std::string& why) {
    throw Error(ErrorKind::Config, "key '" + std::string(key) + "': " + why);
}

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in{std::string(text)};
    while (std::getline(in, item, ',')) {
        auto b = item.find_first_not_of(" \t");
        auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

Date date_value(const FlatConfig& cfg, const char* key) {
    auto d = parse_iso_date(*cfg.string(key));
    if (!d) bad_key(key, "expected a YYYY-MM-DD date");
    return *d;
}

void require_file(const std::optional<fs::path>& p, const char* key) {
    if (!p) bad_key(key, "required for this command");
    if (!fs::is_regular_file(*p)) bad_key(key, "file not found: " + p->string());
}

void require_output(const std::optional<fs::path>& p, const char* key) {
    if (!p) bad_key(key, "required for this command");
    auto parent = fs::absolute(*p).parent_path();
    if (!fs::is_directory(parent)) bad_key(key, "directory does not exist: " + parent.string());
}

SubjectClassifier classifier_for(const PipelineConfig& c) {
    SubjectClassifier out;
    if (!c.category_work.empty()) out.add_rule(c.category_work, Category::Work);
    if (!c.category_private.empty()) out.add_rule(c.category_private, Category::Private);
    return out;
}

std::ifstream open_input(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + p.string());
    return in;
}

// Files are written next to their destination and renamed on commit; any
// left uncommitted are removed.
class PendingOutputs {
public:
    ~PendingOutputs() {
        for (const auto& [tmp, final_path] : files_) {
            std::error_code ec;
            fs::remove(tmp, ec);
        }
    }

    std::ofstream& open(const fs::path& destination) {
        fs::path tmp = destination;
        tmp += ".partial";
        files_.emplace_back(tmp, destination);
        streams_.emplace_back(std::make_unique<std::ofstream>(tmp, std::ios::binary | std::ios::trunc));
        if (!*streams_.back()) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        return *streams_.back();
    }

    void commit() {
        for (auto& s : streams_) {
            s->close();
            if (s->fail()) throw Error(ErrorKind::SinkWrite, "failed to flush output");
        }
        for (const auto& [tmp, final_path] : files_) {
            std::error_code ec;
            fs::rename(tmp, final_path, ec);
            if (ec) throw Error(ErrorKind::Io, "cannot move output into place: " + final_path.string());
        }
        files_.clear();
    }

private:
    std::vector<std::pair<fs::path, fs::path>> files_;
    std::vector<std::unique_ptr<std::ofstream>> streams_;
};

void write_outputs(const EventLog& log, const PipelineConfig& config, RunReport& report,
                   std::optional<PlotOptions> plot_override = std::nullopt) {
    PendingOutputs outputs;
    auto& sink = outputs.open(*config.out);
    std::optional<PseudonymMap> map;
    if (plot_override) {
        EventLog shown = log;
        if (config.pseudonymize) {
            auto [renamed, m] = pseudonymize(log, config.seed, config.category_aware);
            shown = std::move(renamed);
            map = std::move(m);
        }
        auto table = emit_plot_data(shown, config.view, *plot_override);
        write_plot_csv(table, sink);
        report.rows_written = table.rows.size();
    } else {
        map = export_log(log, config, sink, report.rows_written);
    }
    if (map && config.mapping_out) outputs.open(*config.mapping_out) << map->to_json();
    outputs.commit();
}

}  // namespace

PipelineConfig PipelineConfig::from_flat(const FlatConfig& cfg) {
    for (const auto& [key, value] : cfg.entries()) {
        if (!kKnownKeys.contains(key)) bad_key(key, "unknown configuration key");
    }

    PipelineConfig c;
    if (auto v = cfg.string("home_tz")) c.home_tz = *v;
    auto path = [&](const char* key, std::optional<fs::path>& out) {
        if (auto v = cfg.string(key)) {
            if (v->empty()) bad_key(key, "empty path");
            out = fs::path(*v);
        }
    };
    path("health", c.health);
    path("calendar", c.calendar);
    path("column_map", c.column_map);
    path("log", c.log);
    path("out", c.out);
    path("mapping_out", c.mapping_out);

    if (auto v = cfg.string("calendar_format")) {
        if (*v == "csv") c.calendar_format = CalendarFormat::Csv;
        else if (*v == "ics") c.calendar_format = CalendarFormat::Ics;
        else bad_key("calendar_format", "expected csv or ics");
    }
    if (cfg.contains("from")) c.from = date_value(cfg, "from");
    if (cfg.contains("to")) c.to = date_value(cfg, "to");
    if (auto v = cfg.boolean("strict")) c.strict = *v;
    if (auto v = cfg.integer("sleep_merge_tolerance")) {
        if (*v < 0) bad_key("sleep_merge_tolerance", "must be nonnegative");
        c.sleep_merge_tolerance = Seconds(*v);
    }
    if (auto v = cfg.string("preferred_sources")) c.preferred_sources = split_list(*v);
    if (auto v = cfg.string("category_work")) c.category_work = *v;
    if (auto v = cfg.string("category_private")) c.category_private = *v;

    if (auto v = cfg.string("strategy")) {
        c.strategies = Strategies{false, false, false};
        for (const auto& s : split_list(*v)) {
            if (s == "event-attrs") c.strategies.event_attrs = true;
            else if (s == "case-attrs") c.strategies.case_attrs = true;
            else if (s == "derived") c.strategies.derived = true;
            else bad_key("strategy", "unknown strategy '" + s + "' (expected event-attrs, case-attrs, derived)");
        }
    }
    if (auto v = cfg.string("aggregate")) {
        auto m = parse_aggregate(*v);
        if (!m || *m == Aggregate::Count) bad_key("aggregate", "expected median, mean, min or max");
        c.aggregate.method = *m;
    }
    if (auto v = cfg.string("night_window")) {
        auto p = parse_night_window(*v);
        if (!p) bad_key("night_window", "expected HH:MM..HH:MM");
        c.night.window_start = p->window_start;
        c.night.window_end = p->window_end;
    }
    if (auto v = cfg.boolean("previous_night")) c.night.previous_night = *v;
    if (auto v = cfg.string("cohort")) {
        try {
            c.cohort = CohortPredicate::parse(*v);
        } catch (const Error& e) {
            bad_key("cohort", e.what());
        }
    }
    if (auto v = cfg.string("derive")) {
        c.derive.workouts = false;
        c.derive.sleep = false;
        for (const auto& s : split_list(*v)) {
            if (s == "workouts") c.derive.workouts = true;
            else if (s == "sleep") c.derive.sleep = true;
            else bad_key("derive", "unknown selection '" + s + "' (expected workouts, sleep)");
        }
    }
    if (auto v = cfg.boolean("sleep_per_episode")) c.derive.sleep_per_episode = *v;

    if (auto v = cfg.boolean("pseudonymize")) c.pseudonymize = *v;
    if (auto v = cfg.integer("seed")) {
        if (*v < 0) bad_key("seed", "must be nonnegative");
        c.seed = static_cast<std::uint64_t>(*v);
    }
    if (auto v = cfg.boolean("category_aware")) c.category_aware = *v;

    if (auto v = cfg.string("format")) {
        if (*v == "csv") c.format = ExportFormat::Csv;
        else if (*v == "xes") c.format = ExportFormat::Xes;
        else if (*v == "plot") c.format = ExportFormat::Plot;
        else bad_key("format", "expected csv, xes or plot");
    }
    if (auto v = cfg.string("view")) {
        if (*v == "hrv-groups") c.view = PlotView::HrvByActivityGroup;
        else if (*v == "case-vs-average") c.view = PlotView::CaseAttrsVsAverage;
        else bad_key("view", "expected hrv-groups or case-vs-average");
    }
    if (auto v = cfg.string("group_pattern")) c.group_pattern = *v;
    if (auto v = cfg.boolean("xes_lifecycle")) c.xes_lifecycle = *v;
    return c;
}

FlatConfig layer_config(const std::optional<fs::path>& file, const FlatConfig& overrides) {
    FlatConfig merged;
    if (file) {
        auto from_file = FlatConfig::load(*file);
        auto base = fs::absolute(*file).parent_path();
        for (const auto& [key, value] : from_file.entries()) {
            auto* s = std::get_if<std::string>(&value);
            if (s && kPathKeys.contains(key) && fs::path(*s).is_relative()) {
                merged.set(key, (base / *s).lexically_normal().string());
            } else {
                merged.set(key, value);
            }
        }
    }
    if (!merged.contains("home_tz") && !overrides.contains("home_tz")) {
        if (const char* env = std::getenv("WEARPM_HOME_TZ"); env && *env) merged.set("home_tz", std::string(env));
    }
    merged.merge_from(overrides);
    return merged;
}

void validate(const PipelineConfig& config, Stage stage) {
    HomeZone::load(config.home_tz);
    classifier_for(config);
    try {
        std::regex(config.group_pattern);
    } catch (const std::regex_error& e) {
        bad_key("group_pattern", e.what());
    }
    if (config.from && config.to && std::chrono::sys_days(*config.to) < std::chrono::sys_days(*config.from)) {
        bad_key("to", "analysis range ends before it starts");
    }
    if (config.mapping_out) require_output(config.mapping_out, "mapping_out");

    if (stage == Stage::Export) {
        require_file(config.log, "log");
        require_output(config.out, "out");
        return;
    }

    require_file(config.health, "health");
    require_file(config.calendar, "calendar");
    if (config.column_map) {
        require_file(config.column_map, "column_map");
        CalendarColumns::from_config(FlatConfig::load(*config.column_map));
    }
    if (stage == Stage::IngestCheck) return;
    require_output(config.out, "out");

    std::set<std::string, std::less<>> available{std::string(attr::kIsWorkday)};
    if (config.strategies.case_attrs) {
        for (auto a : {attr::kRestingHr, attr::kTotalSleep, attr::kAwake, attr::kDeepSleep, attr::kNightMissing}) {
            available.emplace(a);
        }
    }
    for (const auto& clause : config.cohort.clauses) {
        if (!available.contains(clause.attribute)) {
            throw Error(ErrorKind::UnknownAttribute, "key 'cohort': attribute '" + clause.attribute +
                                                         "' is not produced by the selected strategies");
        }
    }
    if (stage == Stage::Run && config.format == ExportFormat::Plot && config.view == PlotView::HrvByActivityGroup &&
        !config.strategies.event_attrs) {
        bad_key("view", "hrv-groups needs the event-attrs strategy");
    }
}

IngestResult ingest(const PipelineConfig& config) {
    const HomeZone zone = HomeZone::load(config.home_tz);
    IngestResult result;

    {
        auto in = open_input(*config.health);
        result.health = parse_health_export(in, HealthIngestConfig{config.strict});
    }
    SleepPolicy policy;
    policy.preferred_sources = config.preferred_sources;
    policy.merge_tolerance = config.sleep_merge_tolerance;
    result.health.sleep = reconcile_sleep(result.health.sleep, policy);

    CalendarIngestConfig cal;
    if (config.column_map) cal.columns = CalendarColumns::from_config(FlatConfig::load(*config.column_map));
    cal.classifier = classifier_for(config);
    cal.strict = config.strict;

    CalendarFormat format = config.calendar_format.value_or(
        config.calendar->extension() == ".ics" ? CalendarFormat::Ics : CalendarFormat::Csv);
    CalendarParseResult parsed;
    {
        auto in = open_input(*config.calendar);
        parsed = format == CalendarFormat::Ics ? parse_calendar_ics(in, zone, cal) : parse_calendar_csv(in, zone, cal);
    }
    result.calendar_rows = parsed.events.size();
    result.calendar_skipped = parsed.skipped_rows;

    auto timed = filter_all_day(parsed.events);
    result.all_day_removed = parsed.events.size() - timed.size();
    if (config.from || config.to) {
        Date from = config.from.value_or(Date{std::chrono::year(1900), std::chrono::January, std::chrono::day(1)});
        Date to = config.to.value_or(Date{std::chrono::year(9999), std::chrono::December, std::chrono::day(31)});
        auto in_range = filter_date_range(timed, from, to, zone);
        result.out_of_range_removed = timed.size() - in_range.size();
        timed = std::move(in_range);
    }
    result.events = std::move(timed);
    return result;
}

BuildResult build_log(const PipelineConfig& config, const IngestResult& input) {
    const HomeZone zone = HomeZone::load(config.home_tz);
    BuildResult out;
    auto& report = out.report;
    report.events_ingested = input.calendar_rows;
    report.all_day_removed = input.all_day_removed;
    report.out_of_range_removed = input.out_of_range_removed;
    report.timed_events = input.events.size();
    report.skipped_records = input.health.skipped_records + input.calendar_skipped;
    report.ignored_records = input.health.ignored_records;

    SegmentOptions seg;
    seg.category_rules_configured = !config.category_work.empty() || !config.category_private.empty();
    EventLog log = segment_cases(input.events, zone, seg);
    report.cases_built = log.cases.size();

    if (config.strategies.event_attrs) {
        auto hrv = input.health.values_of(SampleKind::HrvSdnn);
        enrich_event_attributes(log, hrv, config.aggregate);
    }
    if (config.strategies.case_attrs) {
        report.duplicate_resting_hr = attach_case_attributes(log, input.health, zone, config.night).duplicate_resting_hr;
    }
    if (config.strategies.derived) {
        auto d = derive_events(log, input.health, zone, config.derive, config.night);
        report.derived_events = d.workouts_added + d.sleep_events_added;
    }
    report.match_stats = compute_match_stats(log);

    out.log = config.cohort.empty() ? log : filter_cohort(log, config.cohort);
    report.cases_in_cohort = out.log.cases.size();
    return out;
}

std::optional<PseudonymMap> export_log(const EventLog& log, const PipelineConfig& config, std::ostream& sink,
                                       std::size_t& rows_written) {
    const HomeZone zone = HomeZone::load(config.home_tz);
    const EventLog* shown = &log;
    std::optional<PseudonymMap> map;
    EventLog renamed;
    if (config.pseudonymize) {
        auto [r, m] = pseudonymize(log, config.seed, config.category_aware);
        renamed = std::move(r);
        map = std::move(m);
        shown = &renamed;
    }
    switch (config.format) {
        case ExportFormat::Csv:
            rows_written = export_csv(*shown, sink, zone);
            break;
        case ExportFormat::Xes:
            rows_written = export_xes(*shown, sink, zone, XesOptions{config.xes_lifecycle});
            break;
        case ExportFormat::Plot: {
            PlotOptions opts;
            opts.group_pattern = config.group_pattern;
            auto table = emit_plot_data(*shown, config.view, opts);
            write_plot_csv(table, sink);
            rows_written = table.rows.size();
            break;
        }
    }
    return map;
}

RunReport run_stage(const PipelineConfig& config, Stage stage) {
    validate(config, stage);

    if (stage == Stage::Export) {
        const HomeZone zone = HomeZone::load(config.home_tz);
        EventLog log;
        {
            auto in = open_input(*config.log);
            log = read_log_csv(in, zone);
        }
        auto classifier = classifier_for(config);
        for (auto& c : log.cases) {
            for (auto& e : c.events) {
                if (e.origin == EventOrigin::Calendar) e.category = classifier.classify(e.activity);
            }
        }
        RunReport report;
        report.cases_built = log.cases.size();
        report.timed_events = log.event_count();
        report.match_stats = log.match_stats;

        bool plot_cohort = config.format == ExportFormat::Plot && config.view == PlotView::CaseAttrsVsAverage;
        if (plot_cohort) {
            PlotOptions opts;
            opts.group_pattern = config.group_pattern;
            if (!config.cohort.empty()) opts.cohort = config.cohort;
            report.cases_in_cohort = log.cases.size();
            write_outputs(log, config, report, opts);
            return report;
        }
        if (!config.cohort.empty()) log = filter_cohort(log, config.cohort);
        report.cases_in_cohort = log.cases.size();
        write_outputs(log, config, report);
        return report;
    }

    auto input = ingest(config);
    if (stage == Stage::IngestCheck) {
        RunReport report;
        report.events_ingested = input.calendar_rows;
        report.all_day_removed = input.all_day_removed;
        report.out_of_range_removed = input.out_of_range_removed;
        report.timed_events = input.events.size();
        report.skipped_records = input.health.skipped_records + input.calendar_skipped;
        report.ignored_records = input.health.ignored_records;
        return report;
    }

    if (stage == Stage::Run && config.format == ExportFormat::Plot && config.view == PlotView::CaseAttrsVsAverage) {
        // the baseline needs every workday, so the cohort selects rows instead of filtering the log
        PipelineConfig unfiltered = config;
        unfiltered.cohort = {};
        auto built = build_log(unfiltered, input);
        PlotOptions opts;
        opts.group_pattern = config.group_pattern;
        if (!config.cohort.empty()) opts.cohort = config.cohort;
        auto cohort = config.cohort.empty() ? built.log : filter_cohort(built.log, config.cohort);
        built.report.cases_in_cohort = cohort.cases.size();
        write_outputs(built.log, config, built.report, opts);
        return built.report;
    }

    auto built = build_log(config, input);
    if (stage == Stage::Build) {
        PipelineConfig as_csv = config;
        as_csv.format = ExportFormat::Csv;
        write_outputs(built.log, as_csv, built.report);
    } else {
        write_outputs(built.log, config, built.report);
    }
    return built.report;
}

std::string RunReport::summary() const {
    std::ostringstream out;
    out << "events ingested: " << events_ingested << " (" << all_day_removed << " all-day removed, "
        << out_of_range_removed << " outside range)\n"
        << "matched " << match_stats.matched_events << " of " << match_stats.total_events << " events\n"
        << "cases built: " << cases_built << "\n"
        << "cases in cohort: " << cases_in_cohort << "\n"
        << "skipped records: " << skipped_records << "\n";
    if (duplicate_resting_hr) out << "warnings: " << duplicate_resting_hr << " duplicate resting heart rate samples\n";
    return out.str();
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config:
        case ErrorKind::UnknownAttribute:
            return 2;
        case ErrorKind::UnsortedInput:
        case ErrorKind::MalformedXml:
        case ErrorKind::MalformedRecord:
        case ErrorKind::MissingColumn:
        case ErrorKind::MalformedRow:
        case ErrorKind::MalformedIcs:
            return 3;
        case ErrorKind::SinkWrite:
        case ErrorKind::Io:
            return 4;
    }
    return 1;
}

}  // namespace wearpm
