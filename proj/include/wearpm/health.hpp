#pragma once

#include <cstddef>
#include <functional>
#include <istream>
#include <string>
#include <variant>
#include <vector>

#include "wearpm/temporal.hpp"

namespace wearpm {

enum class SampleKind { HrvSdnn, RestingHeartRate };

struct HealthSample {
    SampleKind kind = SampleKind::HrvSdnn;
    Instant at;
    double value = 0.0;  // ms for HrvSdnn, bpm for RestingHeartRate
    std::string source;
};

enum class SleepStage { Awake, Core, Deep, Rem, InBedUnspecified };

const char* to_string(SleepStage stage);
bool is_asleep(SleepStage stage);

struct SleepEpisode {
    Interval interval;
    SleepStage stage = SleepStage::InBedUnspecified;
    std::string source;
};

struct Workout {
    Interval interval;
    std::string activity;  // "Walking", "Running", ...
    std::string source;
};

struct HealthBundle {
    std::vector<HealthSample> samples;
    std::vector<SleepEpisode> sleep;
    std::vector<Workout> workouts;
    std::size_t skipped_records = 0;
    std::size_t ignored_records = 0;  // Record/Workout elements of types we do not track
    Interval date_range;

    std::vector<TimedValue> values_of(SampleKind kind) const;
};

struct HealthIngestConfig {
    bool strict = false;
};

using HealthItem = std::variant<HealthSample, SleepEpisode, Workout>;

struct HealthStreamSummary {
    std::size_t records_seen = 0;
    std::size_t emitted = 0;
    std::size_t skipped = 0;
    std::size_t ignored = 0;
};

// Event-driven reader over an Apple Health export.xml. Each Record/Workout is
// converted and handed to the sink when its end tag is seen; nothing else is
// retained, so memory use does not grow with the document.
class HealthExportReader {
public:
    using Sink = std::function<void(HealthItem&&)>;

    explicit HealthExportReader(HealthIngestConfig config = {});

    HealthStreamSummary read(std::istream& input, const Sink& sink);

    // Records currently held by the reader (0 or 1).
    std::size_t buffered_records() const { return buffered_; }
    std::size_t peak_buffered_records() const { return peak_buffered_; }

private:
    struct State;

    HealthIngestConfig config_;
    std::size_t buffered_ = 0;
    std::size_t peak_buffered_ = 0;
};

HealthBundle parse_health_export(std::istream& input, const HealthIngestConfig& config = {});

struct SleepPolicy {
    // Sources matching an earlier pattern win; unmatched sources rank last.
    std::vector<std::string> preferred_sources{"Watch"};
    Seconds merge_tolerance{60};
};

// Output episodes are pairwise disjoint and sorted by start.
std::vector<SleepEpisode> reconcile_sleep(const std::vector<SleepEpisode>& episodes,
                                          const SleepPolicy& policy = {});

}  // namespace wearpm
