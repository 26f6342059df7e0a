#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "wearpm/error.hpp"
#include "wearpm/fixture.hpp"
#include "wearpm/pipeline.hpp"

using namespace wearpm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spill(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

struct Workspace {
    fs::path dir;
    Fixture fixture;

    explicit Workspace(const std::string& name, std::uint64_t seed = 3) {
        dir = fs::temp_directory_path() / ("wearpm_test_" + name);
        fs::remove_all(dir);
        fs::create_directories(dir);
        FixtureSpec spec;
        spec.seed = seed;
        spec.all_day_events = 3;
        fixture = generate_fixture(spec);
        spill(dir / "calendar.csv", fixture.calendar_csv);
        spill(dir / "export.xml", fixture.health_xml);
    }
    ~Workspace() { fs::remove_all(dir); }

    PipelineConfig config() const {
        PipelineConfig c;
        c.home_tz = "Europe/Amsterdam";
        c.health = dir / "export.xml";
        c.calendar = dir / "calendar.csv";
        c.category_work = fixture.category_work;
        c.category_private = fixture.category_private;
        c.out = dir / "out.csv";
        return c;
    }
};

int run_cli(const std::string& args) {
    std::string cmd = std::string(WEARPM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config keys are validated") {
    try {
        PipelineConfig::from_flat(FlatConfig::parse_toml("hoem_tz = \"UTC\"\n"));
        FAIL("expected Config");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
        CHECK(std::string(e.what()).find("hoem_tz") != std::string::npos);
    }
    for (const char* bad : {"strategy = \"event-attrs,magic\"\n", "aggregate = \"mode\"\n", "seed = -1\n",
                            "night_window = \"18-12\"\n", "cohort = \"total_sleep_min\"\n", "format = \"pdf\"\n",
                            "from = \"2025-13-01\"\n", "strict = \"yes\"\n"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(PipelineConfig::from_flat(FlatConfig::parse_toml(bad)), Error);
    }
    auto c = PipelineConfig::from_flat(FlatConfig::parse_toml(
        "strategy = \"case-attrs\"\naggregate = \"mean\"\ncohort = \"total_sleep_min>=480,awake_min<60\"\n"
        "derive = \"sleep\"\nformat = \"xes\"\nview = \"case-vs-average\"\n"));
    CHECK_FALSE(c.strategies.event_attrs);
    CHECK(c.strategies.case_attrs);
    CHECK(c.aggregate.method == Aggregate::Mean);
    CHECK(c.cohort.clauses.size() == 2);
    CHECK_FALSE(c.derive.workouts);
    CHECK(c.format == ExportFormat::Xes);
    CHECK(c.view == PlotView::CaseAttrsVsAverage);
}

TEST_CASE("layering: CLI over file over environment") {
    auto dir = fs::temp_directory_path() / "wearpm_test_layers";
    fs::create_directories(dir);
    spill(dir / "p.toml", "health = \"data/export.xml\"\nseed = 4\n");
    FlatConfig overrides;
    overrides.set("seed", std::int64_t{8});
    setenv("WEARPM_HOME_TZ", "Asia/Tokyo", 1);
    auto merged = layer_config(dir / "p.toml", overrides);
    CHECK(merged.integer("seed") == 8);
    CHECK(fs::path(*merged.string("health")) == (dir / "data/export.xml").lexically_normal());
    CHECK(merged.string("home_tz") == "Asia/Tokyo");

    overrides.set("home_tz", std::string("UTC"));
    CHECK(layer_config(dir / "p.toml", overrides).string("home_tz") == "UTC");
    unsetenv("WEARPM_HOME_TZ");
    CHECK_FALSE(layer_config(dir / "p.toml", FlatConfig{}).contains("home_tz"));
    fs::remove_all(dir);
}

TEST_CASE("validation happens before reading") {
    Workspace ws("validate");
    auto c = ws.config();
    c.health = ws.dir / "nope.xml";
    try {
        run_stage(c, Stage::Run);
        FAIL("expected Config");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
        CHECK(exit_code_for(e.kind()) == 2);
        CHECK(std::string(e.what()).find("health") != std::string::npos);
    }
    CHECK_FALSE(fs::exists(*c.out));

    auto z = ws.config();
    z.home_tz = "Nowhere/Town";
    CHECK_THROWS_AS(validate(z, Stage::Run), Error);

    auto k = ws.config();
    k.strategies.case_attrs = false;
    k.cohort = CohortPredicate::parse("total_sleep_min>=480");
    try {
        validate(k, Stage::Build);
        FAIL("expected UnknownAttribute");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnknownAttribute);
    }
}

TEST_CASE("parse failures leave no output behind") {
    Workspace ws("partial");
    spill(ws.dir / "export.xml", "<HealthData><Record type=\"x\">");
    auto c = ws.config();
    try {
        run_stage(c, Stage::Run);
        FAIL("expected MalformedXml");
    } catch (const Error& e) {
        CHECK(exit_code_for(e.kind()) == 3);
    }
    CHECK_FALSE(fs::exists(*c.out));
    for (const auto& entry : fs::directory_iterator(ws.dir)) CHECK(entry.path().extension() != ".partial");
}

TEST_CASE("run reports the manifest counts and the CSV agrees") {
    Workspace ws("summary");
    auto c = ws.config();
    auto report = run_stage(c, Stage::Run);
    CHECK(report.events_ingested == ws.fixture.manifest.timed_events + ws.fixture.manifest.all_day_events);
    CHECK(report.all_day_removed == 3);
    CHECK(report.match_stats.total_events == ws.fixture.manifest.timed_events);
    CHECK(report.match_stats.matched_events == ws.fixture.manifest.matched_events);
    CHECK(report.summary().find("matched " + std::to_string(ws.fixture.manifest.matched_events) + " of " +
                                std::to_string(ws.fixture.manifest.timed_events) + " events") != std::string::npos);

    std::istringstream in(slurp(*c.out));
    auto back = read_log_csv(in, HomeZone::load(c.home_tz));
    CHECK(back.cases.size() == report.cases_in_cohort);
    CHECK(back.event_count() == report.rows_written);
    CHECK(back.match_stats == report.match_stats);
}

TEST_CASE("reruns are byte-identical and export reads build output") {
    Workspace ws("rerun");
    auto c = ws.config();
    c.strategies.derived = true;
    c.pseudonymize = true;
    c.seed = 77;
    c.mapping_out = ws.dir / "map.json";
    run_stage(c, Stage::Build);
    auto first = slurp(*c.out);
    auto first_map = slurp(*c.mapping_out);
    run_stage(c, Stage::Build);
    CHECK(slurp(*c.out) == first);
    CHECK(slurp(*c.mapping_out) == first_map);
    CHECK(first.find("Work") != std::string::npos);

    auto e = ws.config();
    e.log = ws.dir / "out.csv";
    e.out = ws.dir / "out.xes";
    e.format = ExportFormat::Xes;
    auto report = run_stage(e, Stage::Export);
    CHECK(report.rows_written == report.cases_built);
    CHECK(slurp(*e.out).find("<trace>") != std::string::npos);

    auto p = ws.config();
    p.format = ExportFormat::Plot;
    p.view = PlotView::CaseAttrsVsAverage;
    p.group_pattern = "^Walking$";
    p.strategies.derived = true;
    p.out = ws.dir / "plot.csv";
    run_stage(p, Stage::Run);
    CHECK(slurp(*p.out).find(kWorkdayMeanLabel) != std::string::npos);
}

TEST_CASE("CLI exit codes") {
    Workspace ws("cli");
    auto d = ws.dir.string();
    CHECK(run_cli("fixture --out " + d + "/fx") == 0);
    CHECK(fs::exists(ws.dir / "fx" / "pipeline.toml"));
    CHECK(run_cli("run --config " + d + "/fx/pipeline.toml --out " + d + "/fx/log.csv") == 0);
    CHECK(fs::exists(ws.dir / "fx" / "log.csv"));
    CHECK(run_cli("export --config " + d + "/fx/pipeline.toml --log " + d + "/fx/log.csv --format xes --out " + d +
                  "/fx/log.xes") == 0);
    CHECK(run_cli("run --config " + d + "/fx/pipeline.toml --health " + d + "/missing.xml --out " + d + "/x.csv") == 2);
    CHECK_FALSE(fs::exists(ws.dir / "x.csv"));
    CHECK(run_cli("run --config " + d + "/fx/pipeline.toml --bogus-flag") == 2);

    spill(ws.dir / "bad.xml", "<HealthData>");
    CHECK(run_cli("ingest-check --config " + d + "/fx/pipeline.toml --health " + d + "/bad.xml") == 3);
    CHECK(run_cli("run --config " + d + "/fx/pipeline.toml --out /proc/definitely/not/here.csv") == 2);
    // the destination is a directory, so the final rename fails
    CHECK(run_cli("run --config " + d + "/fx/pipeline.toml --out " + d + "/fx") == 4);
    CHECK_FALSE(fs::exists(ws.dir / "fx.partial"));
}
