#include "wearpm/health.hpp"

#include <expat.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <exception>
#include <map>
#include <memory>
#include <optional>
#include <string_view>
#include <tuple>

#include "wearpm/error.hpp"

namespace wearpm {

namespace {

constexpr std::string_view kHrvType = "HKQuantityTypeIdentifierHeartRateVariabilitySDNN";
constexpr std::string_view kRestingHrType = "HKQuantityTypeIdentifierRestingHeartRate";
constexpr std::string_view kSleepType = "HKCategoryTypeIdentifierSleepAnalysis";
constexpr std::string_view kWorkoutPrefix = "HKWorkoutActivityType";

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

SleepStage stage_from_value(std::string_view value) {
    if (ends_with(value, "AsleepDeep")) return SleepStage::Deep;
    if (ends_with(value, "AsleepCore")) return SleepStage::Core;
    if (ends_with(value, "AsleepREM")) return SleepStage::Rem;
    if (ends_with(value, "Awake")) return SleepStage::Awake;
    // InBed, AsleepUnspecified, legacy "Asleep" and anything unrecognised
    return SleepStage::InBedUnspecified;
}

std::optional<double> parse_number(std::string_view text) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
    return v;
}

// Attributes of the record currently being read.
struct PendingRecord {
    bool is_workout = false;
    std::map<std::string, std::string, std::less<>> attrs;

    std::string_view get(std::string_view key) const {
        auto it = attrs.find(key);
        return it == attrs.end() ? std::string_view{} : std::string_view(it->second);
    }
};

struct MalformedRecord {
    std::string reason;
};

using Conversion = std::variant<std::monostate, HealthItem, MalformedRecord>;

Conversion timed_interval(const PendingRecord& rec, Interval& out) {
    auto start = parse_apple_timestamp(rec.get("startDate"));
    auto end = parse_apple_timestamp(rec.get("endDate"));
    if (!start || !end) return MalformedRecord{"unparseable startDate/endDate"};
    if (!(*start < *end)) return MalformedRecord{"endDate not after startDate"};
    out = Interval(*start, *end);
    return std::monostate{};
}

Conversion convert(const PendingRecord& rec) {
    if (rec.is_workout) {
        auto type = rec.get("workoutActivityType");
        if (type.empty()) return MalformedRecord{"Workout without workoutActivityType"};
        if (type.substr(0, kWorkoutPrefix.size()) == kWorkoutPrefix) type.remove_prefix(kWorkoutPrefix.size());
        Workout w;
        if (auto bad = timed_interval(rec, w.interval); !std::holds_alternative<std::monostate>(bad)) return bad;
        w.activity = std::string(type);
        w.source = std::string(rec.get("sourceName"));
        return HealthItem(std::move(w));
    }

    auto type = rec.get("type");
    if (type == kHrvType || type == kRestingHrType) {
        HealthSample s;
        s.kind = type == kHrvType ? SampleKind::HrvSdnn : SampleKind::RestingHeartRate;
        auto at = parse_apple_timestamp(rec.get("startDate"));
        if (!at) return MalformedRecord{"unparseable startDate"};
        auto value = parse_number(rec.get("value"));
        if (!value || !std::isfinite(*value)) return MalformedRecord{"non-numeric value"};
        if (s.kind == SampleKind::HrvSdnn && !(*value > 0.0)) return MalformedRecord{"SDNN must be positive"};
        if (s.kind == SampleKind::RestingHeartRate && !(*value > 20.0 && *value < 250.0)) {
            return MalformedRecord{"resting heart rate out of range"};
        }
        s.at = *at;
        s.value = *value;
        s.source = std::string(rec.get("sourceName"));
        return HealthItem(std::move(s));
    }
    if (type == kSleepType) {
        auto value = rec.get("value");
        if (value.empty()) return MalformedRecord{"sleep record without value"};
        SleepEpisode e;
        if (auto bad = timed_interval(rec, e.interval); !std::holds_alternative<std::monostate>(bad)) return bad;
        e.stage = stage_from_value(value);
        e.source = std::string(rec.get("sourceName"));
        return HealthItem(std::move(e));
    }
    return std::monostate{};
}

}  // namespace

const char* to_string(SleepStage stage) {
    switch (stage) {
        case SleepStage::Awake: return "Awake";
        case SleepStage::Core: return "Core";
        case SleepStage::Deep: return "Deep";
        case SleepStage::Rem: return "REM";
        case SleepStage::InBedUnspecified: return "InBed";
    }
    return "?";
}

bool is_asleep(SleepStage stage) {
    return stage == SleepStage::Core || stage == SleepStage::Deep || stage == SleepStage::Rem;
}

std::vector<TimedValue> HealthBundle::values_of(SampleKind kind) const {
    std::vector<TimedValue> out;
    for (const auto& s : samples) {
        if (s.kind == kind) out.push_back({s.at, s.value});
    }
    return out;
}

struct HealthExportReader::State {
    HealthExportReader* reader = nullptr;
    const Sink* sink = nullptr;
    XML_Parser parser = nullptr;
    int depth = 0;
    bool saw_root = false;
    std::optional<PendingRecord> pending;
    HealthStreamSummary summary;
    std::exception_ptr failure;

    void fail(std::exception_ptr e) {
        if (!failure) failure = e;
        XML_StopParser(parser, XML_FALSE);
    }

    void on_start(const XML_Char* name, const XML_Char** attrs) {
        ++depth;
        if (depth == 1) {
            if (std::strcmp(name, "HealthData") != 0) {
                throw Error(ErrorKind::MalformedXml, std::string("root element is '") + name + "', expected HealthData");
            }
            saw_root = true;
            return;
        }
        if (depth != 2) return;
        bool is_record = std::strcmp(name, "Record") == 0;
        bool is_workout = std::strcmp(name, "Workout") == 0;
        if (!is_record && !is_workout) return;

        PendingRecord rec;
        rec.is_workout = is_workout;
        for (int i = 0; attrs[i] != nullptr; i += 2) rec.attrs.emplace(attrs[i], attrs[i + 1]);
        pending = std::move(rec);
        reader->buffered_ = 1;
        reader->peak_buffered_ = std::max(reader->peak_buffered_, reader->buffered_);
    }

    void on_end() {
        if (depth == 2 && pending) {
            auto record = std::move(*pending);
            pending.reset();
            reader->buffered_ = 0;
            ++summary.records_seen;
            auto converted = convert(record);
            if (auto* item = std::get_if<HealthItem>(&converted)) {
                ++summary.emitted;
                (*sink)(std::move(*item));
            } else if (auto* bad = std::get_if<MalformedRecord>(&converted)) {
                if (reader->config_.strict) {
                    throw Error(ErrorKind::MalformedRecord,
                                "line " + std::to_string(XML_GetCurrentLineNumber(parser)) + ": " + bad->reason);
                }
                ++summary.skipped;
            } else {
                ++summary.ignored;
            }
        }
        --depth;
    }
};

HealthExportReader::HealthExportReader(HealthIngestConfig config) : config_(config) {}

HealthStreamSummary HealthExportReader::read(std::istream& input, const Sink& sink) {
    std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
        XML_ParserCreate(nullptr), &XML_ParserFree);
    if (!parser) throw std::bad_alloc();

    State state;
    state.reader = this;
    state.sink = &sink;
    state.parser = parser.get();
    buffered_ = 0;
    peak_buffered_ = 0;

    XML_SetUserData(parser.get(), &state);
    auto on_start = [](void* user, const XML_Char* name, const XML_Char** attrs) {
        auto* st = static_cast<State*>(user);
        try {
            st->on_start(name, attrs);
        } catch (...) {
            st->fail(std::current_exception());
        }
    };
    XML_SetElementHandler(parser.get(), on_start, [](void* user, const XML_Char*) {
        auto* st = static_cast<State*>(user);
        try {
            st->on_end();
        } catch (...) {
            st->fail(std::current_exception());
        }
    });

    std::vector<char> buffer(1 << 16);
    bool done = false;
    while (!done) {
        input.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
        auto got = input.gcount();
        if (input.bad()) throw Error(ErrorKind::Io, "failed reading health export");
        done = got < static_cast<std::streamsize>(buffer.size());
        if (XML_Parse(parser.get(), buffer.data(), static_cast<int>(got), done ? XML_TRUE : XML_FALSE) ==
            XML_STATUS_ERROR) {
            if (state.failure) std::rethrow_exception(state.failure);
            throw Error(ErrorKind::MalformedXml,
                        "line " + std::to_string(XML_GetCurrentLineNumber(parser.get())) + ": " +
                            XML_ErrorString(XML_GetErrorCode(parser.get())));
        }
    }
    if (state.failure) std::rethrow_exception(state.failure);
    if (!state.saw_root) throw Error(ErrorKind::MalformedXml, "document has no HealthData root");
    return state.summary;
}

HealthBundle parse_health_export(std::istream& input, const HealthIngestConfig& config) {
    HealthBundle bundle;
    HealthExportReader reader(config);
    auto summary = reader.read(input, [&](HealthItem&& item) {
        std::visit(
            [&](auto&& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, HealthSample>) {
                    bundle.samples.push_back(std::move(v));
                } else if constexpr (std::is_same_v<T, SleepEpisode>) {
                    bundle.sleep.push_back(std::move(v));
                } else {
                    bundle.workouts.push_back(std::move(v));
                }
            },
            std::move(item));
    });
    bundle.skipped_records = summary.skipped;
    bundle.ignored_records = summary.ignored;

    std::stable_sort(bundle.samples.begin(), bundle.samples.end(),
                     [](const auto& a, const auto& b) { return a.at < b.at; });
    auto by_start = [](const auto& a, const auto& b) { return a.interval.start < b.interval.start; };
    std::stable_sort(bundle.sleep.begin(), bundle.sleep.end(), by_start);
    std::stable_sort(bundle.workouts.begin(), bundle.workouts.end(), by_start);

    std::optional<Instant> lo, hi;
    auto widen = [&](Instant a, Instant b) {
        if (!lo || a < *lo) lo = a;
        if (!hi || *hi < b) hi = b;
    };
    for (const auto& s : bundle.samples) widen(s.at, s.at);
    for (const auto& e : bundle.sleep) widen(e.interval.start, e.interval.end);
    for (const auto& w : bundle.workouts) widen(w.interval.start, w.interval.end);
    if (lo) bundle.date_range = Interval(*lo, *hi);
    return bundle;
}

std::vector<SleepEpisode> reconcile_sleep(const std::vector<SleepEpisode>& episodes, const SleepPolicy& policy) {
    auto source_rank = [&](const std::string& source) {
        for (std::size_t i = 0; i < policy.preferred_sources.size(); ++i) {
            if (source.find(policy.preferred_sources[i]) != std::string::npos) return i;
        }
        return policy.preferred_sources.size();
    };
    auto stage_rank = [](SleepStage s) {
        if (is_asleep(s)) return 0;
        return s == SleepStage::Awake ? 1 : 2;
    };

    std::vector<std::size_t> order(episodes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = episodes[a];
        const auto& y = episodes[b];
        return std::forward_as_tuple(source_rank(x.source), x.source, stage_rank(x.stage), x.interval.start, a) <
               std::forward_as_tuple(source_rank(y.source), y.source, stage_rank(y.stage), y.interval.start, b);
    });

    // Higher-priority episodes claim time first; later ones keep only the unclaimed remainder.
    std::map<Instant, Instant> claimed;
    std::vector<SleepEpisode> pieces;
    for (auto idx : order) {
        const auto& ep = episodes[idx];
        Instant cursor = ep.interval.start;
        const Instant end = ep.interval.end;

        auto it = claimed.upper_bound(cursor);
        if (it != claimed.begin()) {
            auto prev = std::prev(it);
            if (cursor < prev->second) cursor = std::min(prev->second, end);
        }
        for (; it != claimed.end() && it->first < end; ++it) {
            if (cursor < it->first) pieces.push_back({Interval(cursor, it->first), ep.stage, ep.source});
            if (cursor < it->second) cursor = std::min(it->second, end);
        }
        if (cursor < end) pieces.push_back({Interval(cursor, end), ep.stage, ep.source});

        // Merge [start, end) into the claimed set.
        Instant lo = ep.interval.start;
        Instant hi = ep.interval.end;
        auto first = claimed.upper_bound(lo);
        if (first != claimed.begin() && lo <= std::prev(first)->second) --first;
        auto last = first;
        while (last != claimed.end() && last->first <= hi) {
            lo = std::min(lo, last->first);
            hi = std::max(hi, last->second);
            ++last;
        }
        claimed.erase(first, last);
        claimed.emplace(lo, hi);
    }

    std::sort(pieces.begin(), pieces.end(),
              [](const auto& a, const auto& b) { return a.interval.start < b.interval.start; });

    std::vector<SleepEpisode> out;
    for (auto& piece : pieces) {
        if (!out.empty()) {
            auto& back = out.back();
            if (back.source == piece.source && back.stage == piece.stage &&
                piece.interval.start - back.interval.end <= policy.merge_tolerance) {
                back.interval.end = piece.interval.end;
                continue;
            }
        }
        out.push_back(std::move(piece));
    }
    return out;
}

}  // namespace wearpm
