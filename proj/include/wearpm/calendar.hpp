#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "wearpm/temporal.hpp"

namespace wearpm {

class FlatConfig;

enum class Category { Work, Private, Unknown };

const char* to_string(Category c);

struct CalendarEvent {
    std::string subject;
    Interval interval;
    bool all_day = false;
    Category category = Category::Unknown;
};

// Subject -> category by the first matching (case-insensitive) pattern.
class SubjectClassifier {
public:
    void add_rule(const std::string& pattern, Category category);
    Category classify(const std::string& subject) const;
    bool empty() const { return rules_.empty(); }

    // Reads "category_work" / "category_private" regex keys.
    static SubjectClassifier from_config(const FlatConfig& cfg);

private:
    struct Rule {
        std::string pattern;
        std::regex regex;
        Category category;
    };
    std::vector<Rule> rules_;
};

// Column names and value formats of a delimited calendar export. Defaults
// follow Outlook's CSV export.
//
// Date formats use YYYY, M/MM and D/DD; time formats use H/HH, MM, SS and an
// optional AM/PM marker. Any other character must match literally.
struct CalendarColumns {
    std::string subject = "Subject";
    std::string start_date = "Start Date";
    std::string start_time = "Start Time";
    std::string end_date = "End Date";
    std::string end_time = "End Time";
    std::string all_day = "All day event";
    std::string date_format = "M/D/YYYY";
    std::string time_format = "H:MM:SS AM/PM";
    char delimiter = ',';

    static CalendarColumns from_config(const FlatConfig& cfg);
};

std::optional<Date> parse_date_format(std::string_view text, std::string_view format);
std::optional<Seconds> parse_time_format(std::string_view text, std::string_view format);

struct CalendarParseResult {
    std::vector<CalendarEvent> events;
    std::size_t skipped_rows = 0;
};

struct CalendarIngestConfig {
    CalendarColumns columns;
    SubjectClassifier classifier;
    bool strict = false;
};

// Wall-clock values are interpreted in `zone`.
CalendarParseResult parse_calendar_csv(std::istream& input, const HomeZone& zone,
                                       const CalendarIngestConfig& config = {});

// Non-recurring VEVENTs; a recurring event contributes only its DTSTART
// occurrence. DATE-valued DTSTART marks an all-day event.
CalendarParseResult parse_calendar_ics(std::istream& input, const HomeZone& zone,
                                       const CalendarIngestConfig& config = {});

std::vector<CalendarEvent> filter_all_day(const std::vector<CalendarEvent>& events);

// Keeps events lying entirely inside [from 00:00, to + 1 day 00:00) home time.
std::vector<CalendarEvent> filter_date_range(const std::vector<CalendarEvent>& events, Date from, Date to,
                                             const HomeZone& zone);

}  // namespace wearpm
