#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "wearpm/log.hpp"

namespace wearpm {

struct PseudonymMap {
    std::map<std::string, std::string> mapping;  // original -> pseudonym
    std::uint64_t seed = 0;

    std::string to_json() const;
};

// Calendar-origin activities become "<Work|Private|Act><n>"; numbering follows
// a seeded shuffle of the sorted distinct names. Derived events keep their names.
std::pair<EventLog, PseudonymMap> pseudonymize(const EventLog& log, std::uint64_t seed, bool category_aware = true);

// Shortest text that parses back to exactly `v`.
std::string format_number(double v);

// Header: case_id,activity,start_time,complete_time,origin,<event attrs>,case:<case attrs>.
// Returns the number of data rows written.
std::size_t export_csv(const EventLog& log, std::ostream& sink, const HomeZone& zone);

// Inverse of export_csv. Column types are inferred from the values.
EventLog read_log_csv(std::istream& input, const HomeZone& zone);

struct XesOptions {
    // true: a start/complete event pair per activity; false: one event with a duration_min attribute
    bool lifecycle_pairs = true;
};

// Returns the number of traces written.
std::size_t export_xes(const EventLog& log, std::ostream& sink, const HomeZone& zone, XesOptions options = {});

enum class PlotView { HrvByActivityGroup, CaseAttrsVsAverage };

struct PlotOptions {
    // HrvByActivityGroup: events whose activity matches; capture group 1 (if any) is the label.
    // CaseAttrsVsAverage: cohort cases contain an activity matching it (empty: all cases).
    std::string group_pattern = ".*";
    std::optional<CohortPredicate> cohort;
    // CaseAttrsVsAverage columns; empty means every numeric case attribute in the schema.
    std::vector<std::string> attributes;
};

struct PlotRow {
    std::string label;
    std::string date;
    std::vector<std::optional<double>> values;
};

struct PlotTable {
    std::vector<std::string> columns;  // label column, date column, value columns
    std::vector<PlotRow> rows;
};

inline constexpr const char* kWorkdayMeanLabel = "all_workdays_mean";

PlotTable emit_plot_data(const EventLog& log, PlotView view, const PlotOptions& options = {});
void write_plot_csv(const PlotTable& table, std::ostream& sink);

}  // namespace wearpm
