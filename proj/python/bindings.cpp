#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "wearpm/config.hpp"
#include "wearpm/error.hpp"
#include "wearpm/fixture.hpp"
#include "wearpm/health.hpp"
#include "wearpm/pipeline.hpp"

namespace py = pybind11;
using namespace wearpm;

namespace {

FlatConfig to_flat(const py::dict& d) {
    FlatConfig cfg;
    for (const auto& [k, v] : d) {
        auto key = py::cast<std::string>(k);
        // bool first: Python bools are also ints
        if (py::isinstance<py::bool_>(v)) cfg.set(key, v.cast<bool>());
        else if (py::isinstance<py::int_>(v)) cfg.set(key, v.cast<std::int64_t>());
        else if (py::isinstance<py::float_>(v)) cfg.set(key, v.cast<double>());
        else cfg.set(key, py::str(v).cast<std::string>());
    }
    return cfg;
}

Stage stage_from(const std::string& name) {
    if (name == "ingest-check") return Stage::IngestCheck;
    if (name == "build") return Stage::Build;
    if (name == "export") return Stage::Export;
    if (name == "run") return Stage::Run;
    throw py::value_error("unknown stage '" + name + "' (expected ingest-check, build, export or run)");
}

py::dict report_dict(const RunReport& r) {
    py::dict d;
    d["events_ingested"] = r.events_ingested;
    d["all_day_removed"] = r.all_day_removed;
    d["out_of_range_removed"] = r.out_of_range_removed;
    d["timed_events"] = r.timed_events;
    d["total_events"] = r.match_stats.total_events;
    d["matched_events"] = r.match_stats.matched_events;
    d["cases_built"] = r.cases_built;
    d["cases_in_cohort"] = r.cases_in_cohort;
    d["skipped_records"] = r.skipped_records;
    d["ignored_records"] = r.ignored_records;
    d["duplicate_resting_hr"] = r.duplicate_resting_hr;
    d["derived_events"] = r.derived_events;
    d["rows_written"] = r.rows_written;
    d["summary"] = r.summary();
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Calendar event logs enriched with wearable health data";

    static py::exception<Error> error_type(m, "WearpmError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
            exc.attr("kind") = to_string(e.kind());
            exc.attr("exit_code") = exit_code_for(e.kind());
            PyErr_SetObject(error_type.ptr(), exc.ptr());
        }
    });

    m.def(
        "aggregate",
        [](const std::vector<double>& values, const std::string& method) {
            auto a = parse_aggregate(method);
            if (!a) throw py::value_error("unknown aggregate '" + method + "'");
            return aggregate(values, {*a});
        },
        py::arg("values"), py::arg("method") = "median");

    m.def(
        "interval_join",
        [](const std::vector<std::pair<std::int64_t, std::int64_t>>& intervals,
           const std::vector<std::pair<std::int64_t, double>>& points) {
            std::vector<Interval> ivs;
            ivs.reserve(intervals.size());
            for (auto [s, e] : intervals) {
                if (e < s) throw py::value_error("interval ends before it starts");
                ivs.emplace_back(Instant(s), Instant(e));
            }
            std::vector<TimedValue> pts;
            pts.reserve(points.size());
            for (auto [t, v] : points) pts.push_back({Instant(t), v});
            return interval_join(ivs, pts);
        },
        py::arg("intervals"), py::arg("points"),
        "Half-open [start, end) intervals in epoch seconds, both inputs sorted.");

    m.def(
        "generate_fixture",
        [](const std::optional<py::dict>& spec) {
            auto s = spec ? FixtureSpec::from_config(to_flat(*spec)) : FixtureSpec{};
            auto fx = generate_fixture(s);
            py::dict d;
            d["calendar_csv"] = fx.calendar_csv;
            d["health_xml"] = fx.health_xml;
            d["manifest_json"] = fx.manifest.to_json();
            d["category_work"] = fx.category_work;
            d["category_private"] = fx.category_private;
            d["home_tz"] = s.home_tz;
            return d;
        },
        py::arg("spec") = py::none());

    m.def(
        "load_fixture_spec",
        [](const std::string& path) {
            auto cfg = FlatConfig::load(path);
            FixtureSpec::from_config(cfg);  // validate
            py::dict d;
            for (const auto& [k, v] : cfg.entries()) {
                std::visit([&](const auto& x) { d[py::str(k)] = x; }, v);
            }
            return d;
        },
        py::arg("path"));

    m.def(
        "scan_health_export",
        [](const std::string& path, bool strict) {
            std::ifstream in(path, std::ios::binary);
            if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
            HealthExportReader reader(HealthIngestConfig{strict});
            std::size_t hrv = 0, rhr = 0, sleep = 0, workouts = 0;
            auto s = reader.read(in, [&](HealthItem&& item) {
                if (auto* x = std::get_if<HealthSample>(&item)) (x->kind == SampleKind::HrvSdnn ? hrv : rhr)++;
                else if (std::holds_alternative<SleepEpisode>(item)) ++sleep;
                else ++workouts;
            });
            py::dict d;
            d["records_seen"] = s.records_seen;
            d["skipped"] = s.skipped;
            d["ignored"] = s.ignored;
            d["hrv_samples"] = hrv;
            d["resting_hr_samples"] = rhr;
            d["sleep_episodes"] = sleep;
            d["workouts"] = workouts;
            d["peak_buffered_records"] = reader.peak_buffered_records();
            return d;
        },
        py::arg("path"), py::arg("strict") = false, "Streams an export.xml and counts what it contains.");

    m.def(
        "run",
        [](const std::string& stage, const py::dict& config, const std::optional<std::string>& config_file) {
            std::optional<std::filesystem::path> file;
            if (config_file) file = *config_file;
            auto cfg = PipelineConfig::from_flat(layer_config(file, to_flat(config)));
            return report_dict(run_stage(cfg, stage_from(stage)));
        },
        py::arg("stage"), py::arg("config"), py::arg("config_file") = py::none(),
        "Runs a pipeline stage; keys match the CLI flags with '-' replaced by '_'.");
}
