#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "wearpm/config.hpp"
#include "wearpm/error.hpp"
#include "wearpm/fixture.hpp"
#include "wearpm/pipeline.hpp"

namespace fs = std::filesystem;
using namespace wearpm;

namespace {

struct StringOpt {
    const char* key;
    const char* flag;
    const char* help;
};

constexpr StringOpt kStringOpts[] = {
    {"home_tz", "--home-tz", "IANA time zone used for dates (fallback: $WEARPM_HOME_TZ, then UTC)"},
    {"health", "--health", "Apple Health export.xml"},
    {"calendar", "--calendar", "calendar export (.csv or .ics)"},
    {"calendar_format", "--calendar-format", "csv|ics (default: from the extension)"},
    {"column_map", "--column-map", "TOML or JSON file renaming calendar columns"},
    {"log", "--log", "event log CSV written by 'build' (input of 'export')"},
    {"from", "--from", "first date of the analysis range (YYYY-MM-DD)"},
    {"to", "--to", "last date of the analysis range (YYYY-MM-DD)"},
    {"preferred_sources", "--preferred-sources", "comma-separated sleep sources, most trusted first"},
    {"category_work", "--category-work", "regex marking work subjects"},
    {"category_private", "--category-private", "regex marking private subjects"},
    {"strategy", "--strategy", "any of event-attrs,case-attrs,derived"},
    {"aggregate", "--aggregate", "median|mean|min|max"},
    {"night_window", "--night-window", "sleep window, e.g. 18:00..12:00"},
    {"cohort", "--cohort", "case filter, e.g. \"total_sleep_min>=480,awake_min<60\""},
    {"derive", "--derive", "derived events to inject: workouts,sleep"},
    {"format", "--format", "csv|xes|plot"},
    {"view", "--view", "plot view: hrv-groups|case-vs-average"},
    {"group_pattern", "--group-pattern", "regex selecting activities for plots"},
    {"mapping_out", "--mapping-out", "where to write the pseudonym mapping (JSON)"},
    {"out", "--out", "output file"},
};

constexpr StringOpt kIntOpts[] = {
    {"sleep_merge_tolerance", "--sleep-merge-tolerance", "merge same-stage sleep pieces up to this gap (seconds)"},
    {"seed", "--seed", "pseudonymization seed"},
};

struct FlagOpt {
    const char* key;
    const char* flag;
    bool value;
    const char* help;
};

constexpr FlagOpt kFlagOpts[] = {
    {"strict", "--strict", true, "fail on the first malformed record or row"},
    {"previous_night", "--previous-night", true, "attribute the night before a day instead of the night after"},
    {"sleep_per_episode", "--sleep-per-episode", true, "one derived event per sleep stage episode"},
    {"pseudonymize", "--pseudonymize", true, "replace calendar subjects with pseudonyms"},
    {"category_aware", "--no-category-prefix", false, "use Act<n> pseudonyms regardless of category"},
    {"xes_lifecycle", "--xes-duration", false, "XES: one event with duration_min instead of start/complete pairs"},
};

struct PipelineOptions {
    std::optional<std::string> config_file;
    std::map<std::string, std::string> strings;
    std::map<std::string, std::int64_t> ints;
    std::map<std::string, bool> flags;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "flat TOML/JSON config; flags override it");
        for (const auto& o : kStringOpts) {
            cmd->add_option_function<std::string>(
                o.flag, [this, key = o.key](const std::string& v) { strings[key] = v; }, o.help);
        }
        for (const auto& o : kIntOpts) {
            cmd->add_option_function<std::int64_t>(
                o.flag, [this, key = o.key](std::int64_t v) { ints[key] = v; }, o.help);
        }
        for (const auto& o : kFlagOpts) {
            cmd->add_flag_callback(
                o.flag, [this, key = o.key, value = o.value] { flags[key] = value; }, o.help);
        }
    }

    PipelineConfig resolve() const {
        FlatConfig overrides;
        for (const auto& [k, v] : strings) overrides.set(k, v);
        for (const auto& [k, v] : ints) overrides.set(k, v);
        for (const auto& [k, v] : flags) overrides.set(k, v);
        std::optional<fs::path> file;
        if (config_file) {
            file = fs::path(*config_file);
            if (!fs::is_regular_file(*file)) throw Error(ErrorKind::Config, "key 'config': file not found: " + *config_file);
        }
        return PipelineConfig::from_flat(layer_config(file, overrides));
    }
};

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
}

int run_fixture(const std::optional<std::string>& spec_path, const std::string& out_dir,
                std::optional<std::int64_t> seed) {
    FixtureSpec spec;
    if (spec_path) {
        if (!fs::is_regular_file(*spec_path)) throw Error(ErrorKind::Config, "key 'spec': file not found: " + *spec_path);
        auto cfg = FlatConfig::load(*spec_path);
        if (seed) cfg.set("seed", *seed);
        spec = FixtureSpec::from_config(cfg);
    } else if (seed) {
        if (*seed < 0) throw Error(ErrorKind::Config, "key 'seed': must be nonnegative");
        spec.seed = static_cast<std::uint64_t>(*seed);
    }
    auto fixture = generate_fixture(spec);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + out_dir + ": " + ec.message());
    fs::path dir(out_dir);
    write_file(dir / "calendar.csv", fixture.calendar_csv);
    write_file(dir / "export.xml", fixture.health_xml);
    write_file(dir / "manifest.json", fixture.manifest.to_json());

    std::string toml;
    toml += "home_tz = \"" + spec.home_tz + "\"\n";
    toml += "health = \"export.xml\"\n";
    toml += "calendar = \"calendar.csv\"\n";
    toml += "from = \"" + format_date(spec.first_day) + "\"\n";
    toml += "to = \"" + format_date(spec.last_day) + "\"\n";
    toml += "category_work = \"" + fixture.category_work + "\"\n";
    toml += "category_private = \"" + fixture.category_private + "\"\n";
    write_file(dir / "pipeline.toml", toml);

    std::cout << "wrote fixture to " << dir.string() << ": " << fixture.manifest.timed_events << " timed events, "
              << fixture.manifest.all_day_events << " all-day events, " << fixture.manifest.matched_events
              << " with HRV samples\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Enrich calendar event logs with wearable health data for process mining"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "suppress the summary");

    PipelineOptions ingest_opts, build_opts, export_opts, run_opts;
    auto* ingest_cmd = app.add_subcommand("ingest-check", "parse the inputs and report what would be used");
    auto* build_cmd = app.add_subcommand("build", "build the enriched event log (CSV)");
    auto* export_cmd = app.add_subcommand("export", "convert a built log to CSV, XES or plot data");
    auto* run_cmd = app.add_subcommand("run", "ingest, build and export in one go");
    ingest_opts.attach(ingest_cmd);
    build_opts.attach(build_cmd);
    export_opts.attach(export_cmd);
    run_opts.attach(run_cmd);

    auto* fixture_cmd = app.add_subcommand("fixture", "generate a synthetic calendar + health export");
    std::optional<std::string> spec_path;
    std::string fixture_out;
    std::optional<std::int64_t> fixture_seed;
    fixture_cmd->add_option("--spec", spec_path, "fixture spec (TOML/JSON)");
    fixture_cmd->add_option("--out", fixture_out, "output directory")->required();
    fixture_cmd->add_option("--seed", fixture_seed, "override the spec seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (fixture_cmd->parsed()) return run_fixture(spec_path, fixture_out, fixture_seed);

        Stage stage = Stage::Run;
        const PipelineOptions* opts = &run_opts;
        if (ingest_cmd->parsed()) stage = Stage::IngestCheck, opts = &ingest_opts;
        else if (build_cmd->parsed()) stage = Stage::Build, opts = &build_opts;
        else if (export_cmd->parsed()) stage = Stage::Export, opts = &export_opts;

        auto config = opts->resolve();
        auto report = run_stage(config, stage);
        if (quiet) return 0;
        if (stage == Stage::IngestCheck) {
            std::cout << "events ingested: " << report.events_ingested << " (" << report.all_day_removed
                      << " all-day removed, " << report.out_of_range_removed << " outside range)\n"
                      << "timed events in range: " << report.timed_events << "\n"
                      << "skipped records: " << report.skipped_records << "\n"
                      << "ignored health records: " << report.ignored_records << "\n";
        } else {
            std::cout << report.summary() << "rows written: " << report.rows_written << "\n";
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "wearpm: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "wearpm: " << e.what() << "\n";
        return 1;
    }
}
