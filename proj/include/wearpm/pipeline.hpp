#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wearpm/calendar.hpp"
#include "wearpm/config.hpp"
#include "wearpm/error.hpp"
#include "wearpm/export.hpp"
#include "wearpm/health.hpp"
#include "wearpm/log.hpp"

namespace wearpm {

enum class CalendarFormat { Csv, Ics };
enum class ExportFormat { Csv, Xes, Plot };

struct Strategies {
    bool event_attrs = true;
    bool case_attrs = true;
    bool derived = false;
};

struct PipelineConfig {
    std::string home_tz = "UTC";

    std::optional<std::filesystem::path> health;
    std::optional<std::filesystem::path> calendar;
    std::optional<CalendarFormat> calendar_format;  // unset: from the file extension
    std::optional<std::filesystem::path> column_map;
    std::optional<std::filesystem::path> log;  // input of the export stage
    std::optional<Date> from;
    std::optional<Date> to;
    bool strict = false;
    Seconds sleep_merge_tolerance{60};
    std::vector<std::string> preferred_sources{"Watch"};
    std::string category_work;
    std::string category_private;

    Strategies strategies;
    AggregateSpec aggregate;
    NightPolicy night;
    CohortPredicate cohort;
    DeriveSelection derive{true, true, false};

    bool pseudonymize = false;
    std::uint64_t seed = 0;
    bool category_aware = true;
    std::optional<std::filesystem::path> mapping_out;

    ExportFormat format = ExportFormat::Csv;
    PlotView view = PlotView::HrvByActivityGroup;
    std::string group_pattern = ".*";
    bool xes_lifecycle = true;
    std::optional<std::filesystem::path> out;

    // Keys mirror the CLI flags with '-' replaced by '_'. Unknown keys and
    // malformed values throw Error(Config) naming the key.
    static PipelineConfig from_flat(const FlatConfig& cfg);
};

// Config file (relative paths resolved against its directory) overlaid with
// CLI overrides; WEARPM_HOME_TZ fills home_tz when neither sets it.
FlatConfig layer_config(const std::optional<std::filesystem::path>& file, const FlatConfig& overrides);

enum class Stage { IngestCheck, Build, Export, Run };

// Checks everything that can be checked without reading inputs.
void validate(const PipelineConfig& config, Stage stage);

struct IngestResult {
    HealthBundle health;  // sleep already reconciled
    std::vector<CalendarEvent> events;  // timed, in range
    std::size_t calendar_rows = 0;
    std::size_t all_day_removed = 0;
    std::size_t out_of_range_removed = 0;
    std::size_t calendar_skipped = 0;
};

IngestResult ingest(const PipelineConfig& config);

struct RunReport {
    std::size_t events_ingested = 0;
    std::size_t all_day_removed = 0;
    std::size_t out_of_range_removed = 0;
    std::size_t timed_events = 0;
    MatchStats match_stats;
    std::size_t cases_built = 0;
    std::size_t cases_in_cohort = 0;
    std::size_t skipped_records = 0;
    std::size_t ignored_records = 0;
    std::size_t duplicate_resting_hr = 0;
    std::size_t derived_events = 0;
    std::size_t rows_written = 0;

    std::string summary() const;
};

struct BuildResult {
    EventLog log;  // after cohort filtering
    RunReport report;
};

// ingest -> reconcile -> segment -> strategies -> cohort
BuildResult build_log(const PipelineConfig& config, const IngestResult& input);

// Pseudonymizes (when configured) and writes the configured format to `sink`.
// Returns the pseudonym map when one was produced.
std::optional<PseudonymMap> export_log(const EventLog& log, const PipelineConfig& config, std::ostream& sink,
                                       std::size_t& rows_written);

// Whole stage including output files. Outputs are written to temporaries and
// renamed only once everything succeeded.
RunReport run_stage(const PipelineConfig& config, Stage stage);

int exit_code_for(ErrorKind kind);

}  // namespace wearpm
